#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "voltsmile/delivery.hpp"
#include "voltsmile/detail/quadrature.hpp"
#include "voltsmile/nig.hpp"

namespace voltsmile {

/// Full two-factor model parameter set. Both drivers have delta fixed to 1;
/// letting delta vary would over-parametrize the fit because the Gamma
/// coefficients already scale the factors. All rates and volatilities are
/// per day (mu in 1/day, gamma's in price units per sqrt(day)).
struct TwoFactorParams {
  NigParams factor1{0.1, 0.0, 1.0};  // Samuelson (short-end) driver
  NigParams factor2{0.1, 0.0, 1.0};  // seasonal driver
  double gamma1 = 0.0;               // base volatility of the Samuelson term
  double mu = 0.0;                   // exponential rate of the Samuelson term
  std::map<std::string, double> gamma2;  // atomic period label -> coefficient
};

inline void validate(const TwoFactorParams& p) {
  validate(p.factor1);
  validate(p.factor2);
  if (p.factor1.delta != 1.0 || p.factor2.delta != 1.0)
    throw std::invalid_argument("TwoFactorParams: driver delta must be 1");
  if (!(p.gamma1 >= 0.0) || !std::isfinite(p.gamma1))
    throw std::invalid_argument("TwoFactorParams: gamma1 must be >= 0");
  if (!(p.mu >= 0.0) || !std::isfinite(p.mu))
    throw std::invalid_argument("TwoFactorParams: mu must be >= 0");
  for (const auto& [label, g] : p.gamma2)
    if (!(g > 0.0) || !std::isfinite(g))
      throw std::invalid_argument("TwoFactorParams: gamma2 for '" + label + "' must be > 0");
}

namespace detail {

// (1 - e^{-x}) / x with a series branch near zero.
inline double expm1_ratio(double x) {
  if (std::abs(x) < 1e-6) return 1.0 - x / 2.0 + x * x / 6.0;
  return -std::expm1(-x) / x;
}

// log(1 + z), principal branch, stable for small |z|.
inline std::complex<double> log1p_complex(const std::complex<double>& z) {
  if (std::abs(z) < 1e-4) return z * (1.0 + z * (-0.5 + z * (1.0 / 3.0 - 0.25 * z)));
  return std::log(1.0 + z);
}

}  // namespace detail

/// Delivery-averaged Samuelson coefficient at observation time u:
///   Gamma1(u) = gamma1 (e^{-mu (T1-u)} - e^{-mu (T2-u)}) / (mu (T2-T1)).
/// Increases towards delivery; equals gamma1 in the mu -> 0 limit.
inline double gamma1_coeff(double u, const DeliveryPeriod& period, double gamma1, double mu) {
  if (!(u <= static_cast<double>(period.start)))
    throw std::invalid_argument("gamma1_coeff: u must not exceed delivery start of " +
                                period.label);
  if (!(mu >= 0.0) || !(gamma1 >= 0.0))
    throw std::invalid_argument("gamma1_coeff: gamma1 and mu must be >= 0");
  const double len = static_cast<double>(period.days());
  return gamma1 * std::exp(-mu * (period.start - u)) * detail::expm1_ratio(mu * len);
}

/// Day-count-weighted average of atomic coefficients for a composite period.
inline double gamma2_composite(const std::map<std::string, double>& values,
                               const AtomicDecomposition& decomp,
                               const DeliveryPeriod& composite) {
  const auto it = decomp.compositions.find(composite.label);
  if (it == decomp.compositions.end())
    throw std::invalid_argument("gamma2_composite: '" + composite.label +
                                "' is not a composite period");
  double acc = 0.0;
  for (const auto& [atom, weight] : it->second) {
    const auto v = values.find(atom);
    if (v == values.end())
      throw std::invalid_argument("gamma2_composite: missing value for atom '" + atom + "'");
    acc += weight.value() * v->second;
  }
  return acc;
}

/// Coefficient for any listed period: direct value if present, otherwise the
/// weighted average over its atoms.
inline double resolve_gamma2(const TwoFactorParams& params, const AtomicDecomposition& decomp,
                             const DeliveryPeriod& period) {
  if (const auto it = params.gamma2.find(period.label); it != params.gamma2.end())
    return it->second;
  if (decomp.is_composite(period.label)) return gamma2_composite(params.gamma2, decomp, period);
  throw std::invalid_argument("no gamma2 coefficient resolvable for period '" + period.label +
                              "'");
}

/// Antiderivative (in w, up to the substitution w = c(v,u)) of
/// sqrt(alpha1^2 + w^2) along the exponential Samuelson path:
///   eta(w) = (1/mu) [ sqrt(a^2+w^2) - i b asinh(w/a)
///            - g log( 2a^2 (a^2 - i b w + g sqrt(a^2+w^2)) / ((w+ib) g^3) ) ],
/// a = alpha1, b = beta1, g = sqrt(a^2-b^2). Principal branches throughout;
/// for Re(w) > 0 every branch argument stays in the right half-plane.
inline std::complex<double> eta(std::complex<double> w, double alpha1, double beta1, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("eta: mu must be positive");
  validate(NigParams{alpha1, beta1, 1.0});
  const std::complex<double> i(0.0, 1.0);
  const double a2 = alpha1 * alpha1;
  const double g = std::sqrt((alpha1 - beta1) * (alpha1 + beta1));
  const std::complex<double> denom = w + i * beta1;
  if (std::abs(denom) == 0.0)
    throw std::invalid_argument("eta: singular at w = -i beta1");
  const std::complex<double> root = std::sqrt(a2 + w * w);
  const std::complex<double> log_arg =
      2.0 * a2 * (a2 - i * beta1 * w + g * root) / (denom * (g * g * g));
  return (root - i * beta1 * std::asinh(w / alpha1) - g * std::log(log_arg)) / mu;
}

/// Characteristic exponent log Psi(v) of the price increment
/// Z = F(T,.) - F(t,.) under the two-factor model, for one delivery period.
/// Built once per (params, t, T, period); cheap to evaluate repeatedly.
///
/// The Samuelson part has a closed form through eta(); because its complex
/// logs are evaluated far from their cuts only for v > 0, the constructor
/// cross-checks the closed form at a sentinel frequency against a numeric
/// time quadrature and switches the whole call to the quadrature route if
/// they disagree. Negative v is served by Hermitian symmetry.
class TwoFactorCf {
 public:
  TwoFactorCf(const TwoFactorParams& params, double t, double T, const DeliveryPeriod& period,
              const AtomicDecomposition& decomp)
      : p_(params), t_(t), T_(T), period_(period) {
    validate(params);
    if (!(t < T))
      throw std::invalid_argument("TwoFactorCf: need t < T");
    if (!(T <= static_cast<double>(period.start)))
      throw std::invalid_argument("TwoFactorCf: exercise after delivery start of " +
                                  period.label);
    gamma2_ = resolve_gamma2(params, decomp, period);
    const double len = static_cast<double>(period.days());
    if (p_.gamma1 > 0.0 && p_.mu > 1e-8) {
      gtilde1_ = p_.gamma1 * std::exp(-p_.mu * period.start) * detail::expm1_ratio(p_.mu * len);
      // gtilde1_ carries e^{-mu T1}; Gamma1(u) = gtilde1_ e^{mu u}.
      use_closed_ = gtilde1_ > 0.0;
      if (use_closed_) {
        try {
          const double v_probe = 1.0;
          const std::complex<double> closed = psi1_closed(v_probe);
          const std::complex<double> quad =
              psi1_numeric(v_probe, 1e-10 * (1.0 + std::abs(closed)));
          const double scale = std::max({std::abs(closed), std::abs(quad), 1e-300});
          if (std::abs(closed - quad) > 1e-6 * scale) use_closed_ = false;
        } catch (const std::exception&) {
          use_closed_ = false;
        }
      }
    } else {
      use_closed_ = false;
    }
  }

  double gamma2_value() const { return gamma2_; }

  std::complex<double> operator()(double v) const {
    if (v == 0.0) return {0.0, 0.0};
    if (v < 0.0) return std::conj((*this)(-v));
    std::complex<double> acc = static_cast<double>(T_ - t_) *
                               cumulant_centered(p_.factor2, v * gamma2_);
    if (p_.gamma1 > 0.0) acc += use_closed_ ? psi1_closed(v) : psi1_numeric(v, numeric_tol(v));
    return acc;
  }

 private:
  // Tolerance keyed to the integral's own scale: the integrand magnitude is
  // largest at u = T (the coefficient grows towards delivery), so the
  // endpoint value bounds |psi1| up to the horizon factor.
  double numeric_tol(double v) const {
    const double edge = std::abs(cumulant_centered(p_.factor1, v * gamma1_coeff(T_, period_, p_.gamma1, p_.mu)));
    return std::max(1e-11 * (T_ - t_) * edge, 1e-18);
  }

  // Time integral of the factor-1 cumulant along the delivery-averaged
  // exponential coefficient: psi1 = (T-t) g - [eta(c(v,T)) - eta(c(v,t))]
  // - i v gtilde beta (e^{mu T} - e^{mu t}) / (mu g). The eta difference is
  // assembled from difference primitives (sqrt and log1p quotient forms, and
  // the (w + i beta) log ratio telescoping to exactly mu (T-t)); the naive
  // two-point evaluation cancels catastrophically as v -> 0, which the
  // transform pricer then amplifies by 1/v^2.
  std::complex<double> psi1_closed(double v) const {
    const std::complex<double> i(0.0, 1.0);
    const double a = p_.factor1.alpha;
    const double b = p_.factor1.beta;
    const double g = std::sqrt((a - b) * (a + b));
    const double horizon = T_ - t_;
    const double emT = std::exp(p_.mu * T_);
    const double emt = std::exp(p_.mu * t_);

    const std::complex<double> w_T(v * gtilde1_ * emT, -b);
    const std::complex<double> w_t(v * gtilde1_ * emt, -b);
    const std::complex<double> dw(v * gtilde1_ * (emT - emt), 0.0);
    const std::complex<double> r_T = std::sqrt(a * a + w_T * w_T);
    const std::complex<double> r_t = std::sqrt(a * a + w_t * w_t);
    const std::complex<double> dr = dw * (w_T + w_t) / (r_T + r_t);

    // asinh(w_T/a) - asinh(w_t/a) = log((w_T + r_T) / (w_t + r_t))
    const std::complex<double> d_asinh = detail::log1p_complex((dw + dr) / (w_t + r_t));
    // numerator of eta's log argument: N = a^2 - i b w + g r
    const std::complex<double> d_logN =
        detail::log1p_complex((-i * b * dw + g * dr) / (a * a - i * b * w_t + g * r_t));

    const std::complex<double> eta_diff =
        (dr - i * b * d_asinh - g * (d_logN - p_.mu * horizon)) / p_.mu;
    return horizon * g - eta_diff - i * (v * gtilde1_ * b * (emT - emt)) / (p_.mu * g);
  }

  std::complex<double> psi1_numeric(double v, double abs_tol) const {
    return detail::adaptive_simpson(
        [&](double u) {
          return cumulant_centered(p_.factor1, v * gamma1_coeff(u, period_, p_.gamma1, p_.mu));
        },
        t_, T_, abs_tol);
  }

  TwoFactorParams p_;
  double t_, T_;
  DeliveryPeriod period_;
  double gamma2_ = 0.0;
  double gtilde1_ = 0.0;
  bool use_closed_ = false;
};

/// One-shot characteristic function Psi(t,T,T1,T2,v); Psi(0) = 1, |Psi| <= 1.
inline std::complex<double> cf_two_factor(double t, double T, const DeliveryPeriod& period,
                                          double v, const TwoFactorParams& params,
                                          const AtomicDecomposition& decomp) {
  return std::exp(TwoFactorCf(params, t, T, period, decomp)(v));
}

inline std::complex<double> log_cf_two_factor(double t, double T, const DeliveryPeriod& period,
                                              double v, const TwoFactorParams& params,
                                              const AtomicDecomposition& decomp) {
  return TwoFactorCf(params, t, T, period, decomp)(v);
}

// --- generic multifactor cumulant assembly (oracle/testing machinery) ------

/// Brownian factor with constant coefficient.
struct GaussianConst {
  double sigma = 0.0;
};
/// Centered jump factor with constant coefficient.
struct JumpConst {
  NigParams nig;
  double coeff = 0.0;
};
/// Centered jump factor with the delivery-averaged exponential coefficient.
struct JumpExpAvg {
  NigParams nig;
  double gamma1 = 0.0;
  double mu = 0.0;
  DeliveryPeriod period;
};
using FactorSpec = std::variant<GaussianConst, JumpConst, JumpExpAvg>;

/// Sum of per-factor log-cumulant contributions over [t, T]. An empty factor
/// list yields 0 (deterministic price).
inline std::complex<double> cumulant_multifactor(double t, double T, double v,
                                                 const std::vector<FactorSpec>& factors) {
  if (!(t < T)) throw std::invalid_argument("cumulant_multifactor: need t < T");
  std::complex<double> acc{0.0, 0.0};
  for (const auto& factor : factors) {
    if (const auto* gc = std::get_if<GaussianConst>(&factor)) {
      if (!(gc->sigma >= 0.0)) throw std::invalid_argument("GaussianConst: sigma must be >= 0");
      acc += -0.5 * v * v * gc->sigma * gc->sigma * (T - t);
    } else if (const auto* jc = std::get_if<JumpConst>(&factor)) {
      if (!(jc->coeff >= 0.0)) throw std::invalid_argument("JumpConst: coeff must be >= 0");
      if (jc->coeff > 0.0 && v != 0.0) acc += (T - t) * cumulant_centered(jc->nig, v * jc->coeff);
    } else {
      const auto& je = std::get<JumpExpAvg>(factor);
      if (!(je.gamma1 >= 0.0) || !(je.mu >= 0.0))
        throw std::invalid_argument("JumpExpAvg: gamma1 and mu must be >= 0");
      if (je.gamma1 > 0.0 && v != 0.0) {
        validate(je.nig);
        const double edge =
            std::abs(cumulant_centered(je.nig, v * gamma1_coeff(T, je.period, je.gamma1, je.mu)));
        acc += detail::adaptive_simpson(
            [&](double u) {
              return cumulant_centered(je.nig, v * gamma1_coeff(u, je.period, je.gamma1, je.mu));
            },
            t, T, std::max(1e-11 * (T - t) * edge, 1e-18));
      }
    }
  }
  return acc;
}

/// One NOA violation record: a composite whose value is not the day-count
/// weighted average of its parts.
struct NoaViolation {
  std::string label;
  double expected = 0.0;
  double observed = 0.0;
};

/// Checks a coefficient map against the composite constraints. Composites
/// absent from the map are skipped; a missing atom value is an input error.
inline std::vector<NoaViolation> noa_check_gamma2(const std::map<std::string, double>& gamma2,
                                                  const AtomicDecomposition& decomp, double tol) {
  std::vector<NoaViolation> out;
  for (const auto& [label, weights] : decomp.compositions) {
    const auto observed = gamma2.find(label);
    if (observed == gamma2.end()) continue;
    double expected = 0.0;
    for (const auto& [atom, w] : weights) {
      const auto v = gamma2.find(atom);
      if (v == gamma2.end())
        throw std::invalid_argument("noa_check_gamma2: missing value for atom '" + atom + "'");
      expected += w.value() * v->second;
    }
    if (std::abs(expected - observed->second) > tol)
      out.push_back({label, expected, observed->second});
  }
  return out;
}

}  // namespace voltsmile
