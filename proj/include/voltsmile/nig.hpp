#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "voltsmile/rng.hpp"

namespace voltsmile {

/// Parameters of a centered Normal Inverse Gaussian Levy driver.
/// alpha rules tail heaviness, beta skewness, delta is the scale per unit
/// time. The location is pinned to -delta*beta/sqrt(alpha^2-beta^2) so the
/// process has zero mean and is not stored.
struct NigParams {
  double alpha = 0.0;
  double beta = 0.0;
  double delta = 1.0;
};

inline void validate(const NigParams& p) {
  if (!(p.alpha > 0.0) || !std::isfinite(p.alpha))
    throw std::invalid_argument("NigParams: alpha must be positive and finite");
  if (!(std::abs(p.beta) < p.alpha))
    throw std::invalid_argument("NigParams: |beta| must be < alpha");
  if (!(p.delta > 0.0) || !std::isfinite(p.delta))
    throw std::invalid_argument("NigParams: delta must be positive and finite");
}

/// sqrt(alpha^2 - beta^2), the steepness of the distribution.
inline double steepness(const NigParams& p) {
  return std::sqrt((p.alpha - p.beta) * (p.alpha + p.beta));
}

/// Cumulant (log characteristic function) of the centered process at t=1:
///   psi(theta) = delta * (g - R - i theta beta / g),
/// g = sqrt(alpha^2 - beta^2), R = sqrt(alpha^2 - (beta + i theta)^2) on the
/// principal branch (for real theta and |beta| < alpha the radicand never
/// crosses the negative real axis). Evaluated in the exactly equivalent form
///   psi(theta) = delta theta^2 (-2 beta^2 - i beta theta - g (g + R))
///                / (g (g + R)^2),
/// which factors out the theta^2 scale instead of cancelling it away and so
/// keeps full relative precision near theta = 0 (the transform pricer
/// divides by theta^2 there).
inline std::complex<double> cumulant_centered(const NigParams& p, double theta) {
  validate(p);
  const double g = steepness(p);
  const std::complex<double> shifted(p.beta, theta);
  const std::complex<double> root = std::sqrt(p.alpha * p.alpha - shifted * shifted);
  const std::complex<double> g_plus_root = g + root;
  const std::complex<double> numer =
      std::complex<double>(-2.0 * p.beta * p.beta, -p.beta * theta) - g * g_plus_root;
  return p.delta * theta * theta * numer / (g * g_plus_root * g_plus_root);
}

namespace detail {

// log K1(z) for large z by the asymptotic expansion; keeps the density finite
// where exp and K1 would over/underflow separately.
inline double log_bessel_k1_asymptotic(double z) {
  return -z + 0.5 * std::log(std::numbers::pi / (2.0 * z)) + std::log1p(3.0 / (8.0 * z));
}

}  // namespace detail

/// Density of the centered NIG law at t=1:
///   f(x) = (alpha delta / pi) exp(delta g + beta (x - m)) K1(alpha s) / s,
/// with m = -delta beta / g and s = sqrt(delta^2 + (x - m)^2).
inline double density_centered(const NigParams& p, double x) {
  validate(p);
  const double g = steepness(p);
  const double m = -p.delta * p.beta / g;
  const double dx = x - m;
  const double s = std::hypot(p.delta, dx);
  const double z = p.alpha * s;
  const double coeff = p.alpha * p.delta / std::numbers::pi;
  const double expo = p.delta * g + p.beta * dx;
  if (z < 600.0) {
    return coeff * std::exp(expo) * std::cyl_bessel_k(1.0, z) / s;
  }
  // |beta| < alpha makes expo - z -> -inf in both tails; evaluate in logs.
  const double log_f = std::log(coeff) + expo + detail::log_bessel_k1_asymptotic(z) - std::log(s);
  return std::exp(log_f);
}

struct NigMoments {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

/// Closed-form moments of the centered process at t=1.
inline NigMoments moments(const NigParams& p) {
  validate(p);
  const double g = steepness(p);
  NigMoments m;
  m.mean = 0.0;
  m.variance = p.delta * p.alpha * p.alpha / (g * g * g);
  m.skewness = 3.0 * p.beta / (p.alpha * std::sqrt(p.delta * g));
  m.excess_kurtosis = 3.0 * (1.0 + 4.0 * p.beta * p.beta / (p.alpha * p.alpha)) / (p.delta * g);
  return m;
}

/// Scaling rule: c * X ~ NIG(alpha/c, beta/c, delta*c) for c > 0, so
/// cumulant_centered(scale(p, c), theta) == cumulant_centered(p, c*theta).
inline NigParams scale(const NigParams& p, double c) {
  validate(p);
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("scale: c must be positive");
  return {p.alpha / c, p.beta / c, p.delta * c};
}

namespace detail {

// Inverse Gaussian IG(mean, shape) sampler, Michael-Schucany-Haas
// transformation method.
inline double sample_inverse_gaussian(double mean, double shape, Rng& rng) {
  const double nu = rng.normal();
  const double y = nu * nu;
  const double my = mean * y;
  const double x = mean + mean / (2.0 * shape) * (my - std::sqrt(my * (4.0 * shape + my)));
  if (rng.uniform01() <= mean / (mean + x)) return x;
  return mean * mean / x;
}

}  // namespace detail

/// One increment J(dt) of the centered process: subordinate a Gaussian by an
/// inverse Gaussian time change, then remove the mean delta*dt*beta/g.
inline double sample_increment(const NigParams& p, double dt, Rng& rng) {
  validate(p);
  if (!(dt > 0.0)) throw std::invalid_argument("sample_increment: dt must be positive");
  const double g = steepness(p);
  const double d = p.delta * dt;
  const double z = detail::sample_inverse_gaussian(d / g, d * d, rng);
  return p.beta * z + std::sqrt(z) * rng.normal() - d * p.beta / g;
}

}  // namespace voltsmile
