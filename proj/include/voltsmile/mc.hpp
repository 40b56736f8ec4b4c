#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "voltsmile/delivery.hpp"
#include "voltsmile/detail/parallel.hpp"
#include "voltsmile/forward_model.hpp"
#include "voltsmile/nig.hpp"
#include "voltsmile/rng.hpp"

namespace voltsmile {

struct McConfig {
  std::int64_t n_paths = 1'000'000;
  int n_steps = 32;  // time steps for the Samuelson integral
  std::uint64_t seed = 0;
};

struct McPrice {
  double price = 0.0;
  double stderr_ = 0.0;
};

namespace detail {

inline constexpr int kMcBatches = 64;

}  // namespace detail

/// Simulates terminal futures prices
///   F(T) = F(t) + sum_i Gamma1(u_i) dJ1_i + Gamma2 (J2(T) - J2(t))
/// with a left-endpoint Euler rule for the Samuelson integral (the seasonal
/// term needs no discretization since its coefficient is constant in time).
/// Batches carry independent sub-seeds derived from the master seed and fill
/// disjoint slices, so the sample vector does not depend on thread count.
inline std::vector<double> simulate_terminal(const TwoFactorParams& params, double t, double T,
                                             const DeliveryPeriod& period,
                                             const AtomicDecomposition& decomp,
                                             double futures_price, const McConfig& mc) {
  validate(params);
  if (mc.n_paths < 1 || mc.n_steps < 1)
    throw std::invalid_argument("McConfig: need n_paths >= 1 and n_steps >= 1");
  if (!(t < T) || !(T <= static_cast<double>(period.start)))
    throw std::invalid_argument("simulate_terminal: need t < T <= delivery start");

  const double gamma2 = resolve_gamma2(params, decomp, period);
  const double horizon = T - t;
  const double dt = horizon / mc.n_steps;
  std::vector<double> coeff1(params.gamma1 > 0.0 ? mc.n_steps : 0);
  for (int i = 0; i < static_cast<int>(coeff1.size()); ++i)
    coeff1[i] = gamma1_coeff(t + i * dt, period, params.gamma1, params.mu);

  std::vector<double> terminal(mc.n_paths);
  const std::int64_t batches = std::min<std::int64_t>(detail::kMcBatches, mc.n_paths);
  detail::parallel_for(batches, [&](std::size_t b) {
    const std::int64_t begin = mc.n_paths * static_cast<std::int64_t>(b) / batches;
    const std::int64_t end = mc.n_paths * static_cast<std::int64_t>(b + 1) / batches;
    Rng rng(Rng::mix(mc.seed, b));
    for (std::int64_t path = begin; path < end; ++path) {
      double x = futures_price;
      for (const double c : coeff1) x += c * sample_increment(params.factor1, dt, rng);
      x += gamma2 * sample_increment(params.factor2, horizon, rng);
      terminal[path] = x;
    }
  });
  return terminal;
}

/// Sample mean and standard error of the call payoff over a prepared set of
/// terminal prices (zero rate, no discounting).
inline McPrice mc_payoff_stats(std::span<const double> terminal, double strike) {
  double sum = 0.0, sumsq = 0.0;
  for (const double f : terminal) {
    const double payoff = f > strike ? f - strike : 0.0;
    sum += payoff;
    sumsq += payoff * payoff;
  }
  const double n = static_cast<double>(terminal.size());
  const double mean = sum / n;
  const double var = std::max(sumsq / n - mean * mean, 0.0);
  return {mean, n > 1 ? std::sqrt(var / (n - 1)) : 0.0};
}

/// Prices several strikes off one common set of paths (common random numbers
/// keep the price curve smooth in strike).
inline std::vector<McPrice> mc_price_strikes(std::span<const double> strikes,
                                             const TwoFactorParams& params, double t, double T,
                                             const DeliveryPeriod& period,
                                             const AtomicDecomposition& decomp,
                                             double futures_price, const McConfig& mc) {
  const std::vector<double> terminal =
      simulate_terminal(params, t, T, period, decomp, futures_price, mc);
  std::vector<McPrice> out(strikes.size());
  for (std::size_t u = 0; u < strikes.size(); ++u) out[u] = mc_payoff_stats(terminal, strikes[u]);
  return out;
}

inline McPrice mc_call_price(double strike, const TwoFactorParams& params, double t, double T,
                             const DeliveryPeriod& period, const AtomicDecomposition& decomp,
                             double futures_price, const McConfig& mc) {
  return mc_price_strikes(std::span<const double>(&strike, 1), params, t, T, period, decomp,
                          futures_price, mc)[0];
}

}  // namespace voltsmile
