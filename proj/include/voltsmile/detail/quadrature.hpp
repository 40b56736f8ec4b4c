#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

namespace voltsmile {

// Thrown when a quadrature routine cannot reach its tolerance within its
// node/depth budget. The message carries the offending interval.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const std::complex<double>& x) { return std::abs(x); }

template <typename T, typename F>
T adaptive_simpson_rec(F& f, double a, double b, const T& fa, const T& fm, const T& fb,
                       const T& whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const T flm = f(lm);
  const T frm = f(rm);
  const T left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const T right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const T delta = left + right - whole;
  if (magnitude(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) {
    throw QuadratureError("adaptive Simpson: depth budget exhausted on [" + std::to_string(a) +
                          ", " + std::to_string(b) + "]");
  }
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson with absolute tolerance. Works for real and complex
// integrands; throws QuadratureError past max_depth.
template <typename F>
auto adaptive_simpson(F&& f, double a, double b, double abs_tol, int max_depth = 48)
    -> decltype(f(a)) {
  using T = decltype(f(a));
  if (a == b) return T{};
  const double m = 0.5 * (a + b);
  const T fa = f(a);
  const T fm = f(m);
  const T fb = f(b);
  const T whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

// Composite Simpson on a fixed number of panels.
template <typename F>
auto simpson_fixed(F&& f, double a, double b, int n_panels) -> decltype(f(a)) {
  using T = decltype(f(a));
  const double h = (b - a) / n_panels;
  T acc = f(a) + f(b);
  for (int i = 1; i < n_panels; ++i) acc += 2.0 * f(a + i * h);
  for (int i = 0; i < n_panels; ++i) acc += 4.0 * f(a + (i + 0.5) * h);
  return acc * (h / 6.0);
}

}  // namespace detail
}  // namespace voltsmile
