#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "voltsmile/detail/parallel.hpp"
#include "voltsmile/detail/quadrature.hpp"

namespace voltsmile {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }
inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Frequency-integration settings for the transform pricer.
///
/// `truncation` (A) splits the inversion integral: [0, A] is integrated on
/// the chosen rule, beyond A the strike-independent 1/v^2 part is added in
/// closed form and the remaining cf part is integrated until it is provably
/// below tolerance. Prices are therefore insensitive to A well past
/// `abs_tol`. In euler_sum mode the cf is evaluated once per node and shared
/// across strikes; the node count is raised automatically if the requested
/// strikes need finer phase resolution than `nodes` provides.
struct PricingGrid {
  double truncation = 10.0;
  enum class QuadMode { adaptive_simpson, euler_sum } quad_mode = QuadMode::adaptive_simpson;
  int nodes = 4096;
  double abs_tol = 1e-8;

  void validate() const {
    if (!(truncation > 0.0)) throw std::invalid_argument("PricingGrid: truncation must be > 0");
    if (nodes < 16) throw std::invalid_argument("PricingGrid: need at least 16 nodes");
    if (!(abs_tol > 0.0)) throw std::invalid_argument("PricingGrid: abs_tol must be > 0");
  }
};
using QuadMode = PricingGrid::QuadMode;

namespace detail {

// exp(z) - 1 without cancellation for small |z|.
inline std::complex<double> expm1_complex(const std::complex<double>& z) {
  if (std::abs(z) < 1e-4)
    return z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0))));
  return std::exp(z) - 1.0;
}

}  // namespace detail

/// Var(Z) from the characteristic exponent: Richardson-extrapolated second
/// central difference of log Psi at 0 (Hermitian symmetry folds the two
/// sides into -2 Re). Returns 0 for a flat exponent.
template <typename LogCf>
double variance_from_log_cf(LogCf&& log_cf) {
  const auto second_diff = [&](double h) { return -2.0 * std::real(log_cf(h)) / (h * h); };
  const double rough = second_diff(1e-2);
  if (!(rough > 0.0)) return std::max(rough, 0.0);
  const double h = std::clamp(std::sqrt(2e-3 / rough), 1e-10, 1e6);
  const double v1 = second_diff(h);
  const double v2 = second_diff(0.5 * h);
  return std::max((4.0 * v2 - v1) / 3.0, 0.0);
}

/// Fourier transform of the modified time value:
///   xi(v) = e^{ivF} (1 - Psi(v)) / v^2,
/// with the removable v=0 singularity evaluated as Var(Z)/2.
template <typename LogCf>
std::complex<double> xi_mt(double v, double futures_price, LogCf&& log_cf) {
  if (v < 0.0) throw std::invalid_argument("xi_mt: v must be >= 0");
  if (v == 0.0) return {0.5 * variance_from_log_cf(log_cf), 0.0};
  const std::complex<double> phase = std::exp(std::complex<double>(0.0, v * futures_price));
  return phase * (-detail::expm1_complex(log_cf(v))) / (v * v);
}

/// Upper tail of the sine integral, q(c) = integral_c^inf sin(t)/t dt.
/// Power series below c=4; auxiliary-function form above, with the
/// Laplace-type integrals evaluated by adaptive quadrature.
inline double upper_tail_si(double c) {
  if (c < 0.0) throw std::invalid_argument("upper_tail_si: c must be >= 0");
  constexpr double half_pi = std::numbers::pi / 2.0;
  if (c == 0.0) return half_pi;
  if (c <= 4.0) {
    double term = c;
    double si = c;
    for (int k = 1; k < 40; ++k) {
      term *= -c * c * (2 * k - 1) /
              (static_cast<double>(2 * k + 1) * (2 * k + 1) * (2 * k));
      si += term;
      if (std::abs(term) < 1e-17 * std::abs(si)) break;
    }
    return half_pi - si;
  }
  const double t_max = 45.0 / c;
  const double f = detail::adaptive_simpson(
      [&](double t) { return std::exp(-c * t) / (1.0 + t * t); }, 0.0, t_max, 1e-14);
  const double g = detail::adaptive_simpson(
      [&](double t) { return t * std::exp(-c * t) / (1.0 + t * t); }, 0.0, t_max, 1e-14);
  return f * std::cos(c) + g * std::sin(c);
}

namespace detail {

// integral_A^inf cos(b v) / v^2 dv, the closed-form far tail of the
// inversion integral (strike-dependent, cf-independent).
inline double cos_tail(double b, double A) {
  const double ab = std::abs(b);
  return std::cos(ab * A) / A - ab * upper_tail_si(ab * A);
}

// Shared-node evaluation of the transform integrand on [0, A] plus the cf
// tail beyond A. Modes differ only in how the inner integral is quadratured.
template <typename LogCf>
std::vector<double> raw_time_values(std::span<const double> strikes, double futures_price,
                                    LogCf&& log_cf, const PricingGrid& grid) {
  grid.validate();
  const std::size_t n = strikes.size();
  std::vector<double> z(n, 0.0);
  if (n == 0) return z;

  const double variance = variance_from_log_cf(log_cf);
  if (variance <= 1e-18) return z;  // deterministic underlying: zero time value

  const double A = grid.truncation;
  std::vector<double> b(n);
  double b_max = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    b[u] = futures_price - strikes[u];
    b_max = std::max(b_max, std::abs(b[u]));
  }

  // xi with the strike phase stripped: (1 - Psi(v)) / v^2.
  const auto xi0 = [&](double v) -> std::complex<double> {
    if (v == 0.0) return {0.5 * variance, 0.0};
    return -expm1_complex(log_cf(v)) / (v * v);
  };

  // --- inner integral over [0, A] ---
  if (grid.quad_mode == QuadMode::adaptive_simpson) {
    // The exponent carries O(1e-15) float noise that 1/v^2 amplifies without
    // bound as v -> 0; below v0 (far inside the cf's frequency scale) the
    // integrand is polynomial-flat, so a fixed stencil anchored at the exact
    // v = 0 limit integrates it and the adaptive rule starts at v0.
    const double v0 = std::min(1e-3, 1.0 / (30.0 * std::sqrt(variance)));
    parallel_for(n, [&](std::size_t u) {
      const auto g = [&](double v) {
        const std::complex<double> w = xi0(v);
        return std::real(w) * std::cos(b[u] * v) - std::imag(w) * std::sin(b[u] * v);
      };
      z[u] = simpson_fixed(g, 0.0, v0, 4) + adaptive_simpson(g, v0, A, grid.abs_tol);
    });
  } else {
    // Uniform frequency grid v_j = j eta shared by all strikes, trapezoidal
    // end weights. Refine past `nodes` when strike phases need it.
    const int n_panels = std::max<int>(
        grid.nodes, static_cast<int>(std::ceil(A * (b_max + 1.0) / 0.3)));
    const double eta = A / n_panels;
    std::vector<std::complex<double>> xi(n_panels + 1);
    parallel_for(static_cast<std::size_t>(n_panels) + 1,
                 [&](std::size_t j) { xi[j] = xi0(j * eta); });
    parallel_for(n, [&](std::size_t u) {
      double acc = 0.5 * std::real(xi[0]);
      for (int j = 1; j < n_panels; ++j) {
        const double phase = b[u] * (j * eta);
        acc += std::real(xi[j]) * std::cos(phase) - std::imag(xi[j]) * std::sin(phase);
      }
      const double phase_end = b[u] * A;
      acc += 0.5 * (std::real(xi[n_panels]) * std::cos(phase_end) -
                    std::imag(xi[n_panels]) * std::sin(phase_end));
      z[u] = acc * eta;
    });
  }

  // --- analytic far tail of the 1/v^2 part ---
  for (std::size_t u = 0; u < n; ++u) z[u] += cos_tail(b[u], A);

  // --- cf part beyond A: - integral_A^B Re(e^{ibv} Psi(v)) / v^2 dv ---
  // Doubling segments until the remaining mass is provably below tolerance;
  // |Psi(v)| = e^{Re log Psi} decays for any non-degenerate exponent.
  const double stop_tol = 0.25 * grid.abs_tol;
  double lo = A;
  bool converged = false;
  for (int segment = 0; segment < 24 && !converged; ++segment) {
    const double hi = 2.0 * lo;
    if (grid.quad_mode == QuadMode::adaptive_simpson) {
      parallel_for(n, [&](std::size_t u) {
        z[u] -= adaptive_simpson(
            [&](double v) {
              const std::complex<double> k = log_cf(v);
              return std::exp(k.real()) * std::cos(b[u] * v + k.imag()) / (v * v);
            },
            lo, hi, stop_tol);
      });
    } else {
      const int panels = std::max<int>(512, static_cast<int>(std::ceil((hi - lo) * (b_max + 1.0) / 0.3)));
      const double h = (hi - lo) / panels;
      std::vector<double> amp(panels + 1), phase(panels + 1);
      parallel_for(static_cast<std::size_t>(panels) + 1, [&](std::size_t j) {
        const double v = lo + j * h;
        const std::complex<double> k = log_cf(v);
        amp[j] = std::exp(k.real()) / (v * v);
        phase[j] = k.imag();
      });
      parallel_for(n, [&](std::size_t u) {
        double acc = 0.5 * amp[0] * std::cos(b[u] * lo + phase[0]);
        for (int j = 1; j < panels; ++j) acc += amp[j] * std::cos(b[u] * (lo + j * h) + phase[j]);
        acc += 0.5 * amp[panels] * std::cos(b[u] * hi + phase[panels]);
        z[u] -= acc * h;
      });
    }
    // Remaining tail is bounded by |Psi(hi)| / hi when |Psi| keeps decaying.
    const double psi_hi = std::exp(std::real(log_cf(hi)));
    if (psi_hi / hi <= stop_tol) converged = true;
    lo = hi;
  }
  if (!converged)
    throw QuadratureError(
        "time_value: characteristic function decays too slowly beyond the truncation bound");

  for (std::size_t u = 0; u < n; ++u) z[u] /= std::numbers::pi;
  return z;
}

}  // namespace detail

/// Time value of the call: the inverse transform
///   z(K) = (1/pi) integral_0^inf Re(e^{-iKv} xi(v)) dv.
template <typename LogCf>
double time_value(double strike, double futures_price, LogCf&& log_cf, const PricingGrid& grid) {
  const double k = strike;
  return detail::raw_time_values(std::span<const double>(&k, 1), futures_price, log_cf, grid)[0];
}

/// European call on the futures: time value plus intrinsic value. Quadrature
/// noise below zero is clipped so the price respects the intrinsic floor.
template <typename LogCf>
double call_price(double strike, double futures_price, LogCf&& log_cf, const PricingGrid& grid) {
  const double z = time_value(strike, futures_price, log_cf, grid);
  return std::max(z, 0.0) + std::max(futures_price - strike, 0.0);
}

/// Prices a whole strike set off one shared set of cf evaluations (the point
/// of euler_sum mode; adaptive mode prices per strike).
template <typename LogCf>
std::vector<double> price_strikes(std::span<const double> strikes, double futures_price,
                                  LogCf&& log_cf, const PricingGrid& grid) {
  std::vector<double> out = detail::raw_time_values(strikes, futures_price, log_cf, grid);
  for (std::size_t u = 0; u < strikes.size(); ++u)
    out[u] = std::max(out[u], 0.0) + std::max(futures_price - strikes[u], 0.0);
  return out;
}

/// Uniform strike ladder K_u = k_lowest + k_step (u-1), u = 1..n_strikes.
template <typename LogCf>
std::vector<double> call_price_grid(double k_lowest, double k_step, int n_strikes,
                                    double futures_price, LogCf&& log_cf,
                                    const PricingGrid& grid) {
  if (n_strikes < 1) throw std::invalid_argument("call_price_grid: need at least one strike");
  if (!(k_step > 0.0)) throw std::invalid_argument("call_price_grid: strike step must be > 0");
  std::vector<double> strikes(n_strikes);
  for (int u = 0; u < n_strikes; ++u) strikes[u] = k_lowest + k_step * u;
  return price_strikes(strikes, futures_price, log_cf, grid);
}

/// Black-76 call with zero rate; sigma is per sqrt(day), tau in days.
inline double black_call(double futures_price, double strike, double sigma, double tau) {
  if (!(futures_price > 0.0) || !(strike > 0.0))
    throw std::invalid_argument("black_call: futures price and strike must be > 0");
  if (!(sigma >= 0.0) || !(tau > 0.0))
    throw std::invalid_argument("black_call: need sigma >= 0 and tau > 0");
  const double s = sigma * std::sqrt(tau);
  if (s == 0.0) return std::max(futures_price - strike, 0.0);
  const double d1 = std::log(futures_price / strike) / s + 0.5 * s;
  const double d2 = d1 - s;
  return futures_price * norm_cdf(d1) - strike * norm_cdf(d2);
}

/// Additive-model (arithmetic Brownian) call, the closed-form oracle for the
/// Gaussian limit: C = (F-K) N(d) + s phi(d), d = (F-K)/s, s the std dev of
/// the terminal price.
inline double bachelier_call(double futures_price, double strike, double sigma_total) {
  if (!(sigma_total >= 0.0)) throw std::invalid_argument("bachelier_call: sigma_total must be >= 0");
  const double m = futures_price - strike;
  if (sigma_total == 0.0) return std::max(m, 0.0);
  const double d = m / sigma_total;
  return m * norm_cdf(d) + sigma_total * norm_pdf(d);
}

/// Black implied volatility by bisection on a geometrically expanded bracket.
/// The price must lie strictly inside the no-arbitrage band
/// ((F-K)+, F); either violation is reported by name.
inline double implied_vol(double price, double futures_price, double strike, double tau) {
  if (!(futures_price > 0.0) || !(strike > 0.0) || !(tau > 0.0))
    throw std::invalid_argument("implied_vol: need F > 0, K > 0, tau > 0");
  const double intrinsic = std::max(futures_price - strike, 0.0);
  if (!(price > intrinsic))
    throw std::invalid_argument("implied_vol: price " + std::to_string(price) +
                                " is at or below the intrinsic floor " + std::to_string(intrinsic));
  if (futures_price - price <= 1e-11 * std::max(1.0, futures_price))
    throw std::invalid_argument("implied_vol: price " + std::to_string(price) +
                                " is at or above the forward upper bound " +
                                std::to_string(futures_price));
  double lo = 0.0;
  double hi = 1.0;
  int guard = 0;
  while (black_call(futures_price, strike, hi, tau) < price) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 60)
      throw std::invalid_argument("implied_vol: no volatility reproduces the price (upper bound)");
  }
  // lo may still price above target when the initial bracket started high.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (black_call(futures_price, strike, mid, tau) < price)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace voltsmile
