#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace voltsmile {

struct NelderMeadOptions {
  std::int64_t max_evals = 10000;
  double f_tol = 1e-13;      // relative spread of simplex values
  double init_step = 0.2;    // edge length of the initial simplex
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  std::int64_t evals = 0;
  bool converged = false;
};

/// Downhill simplex with the dimension-adaptive coefficients of Gao and Han
/// (reflection 1, expansion 1+2/n, contraction 3/4-1/(2n), shrink 1-1/n),
/// which behave much better than the classic constants above ~10 dimensions.
/// Deterministic: no randomness, ties broken by vertex index.
template <typename F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> x0, const NelderMeadOptions& opt) {
  const std::size_t n = x0.size();
  if (n == 0) throw std::invalid_argument("nelder_mead: empty start point");
  const double nd = static_cast<double>(n);
  const double refl = 1.0;
  const double expa = 1.0 + 2.0 / nd;
  const double contr = 0.75 - 0.5 / nd;
  const double shrink = 1.0 - 1.0 / nd;

  std::vector<std::vector<double>> x(n + 1, x0);
  for (std::size_t j = 0; j < n; ++j) x[j + 1][j] += opt.init_step;
  std::vector<double> fx(n + 1);
  std::int64_t evals = 0;
  const auto eval = [&](const std::vector<double>& p) {
    ++evals;
    return f(p);
  };
  for (std::size_t j = 0; j <= n; ++j) fx[j] = eval(x[j]);

  std::vector<std::size_t> order(n + 1);
  const auto sort_order = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
  };

  NelderMeadResult result;
  while (evals < opt.max_evals) {
    sort_order();
    const std::size_t best = order[0], second_worst = order[n - 1], worst = order[n];
    const double spread = std::abs(fx[worst] - fx[best]);
    if (spread <= opt.f_tol * (1.0 + std::abs(fx[best]))) {
      result.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t j = 0; j <= n; ++j) {
      if (j == worst) continue;
      for (std::size_t i = 0; i < n; ++i) centroid[i] += x[j][i];
    }
    for (double& c : centroid) c /= nd;

    std::vector<double> xr(n);
    for (std::size_t i = 0; i < n; ++i) xr[i] = centroid[i] + refl * (centroid[i] - x[worst][i]);
    const double fr = eval(xr);

    if (fr < fx[best]) {
      std::vector<double> xe(n);
      for (std::size_t i = 0; i < n; ++i) xe[i] = centroid[i] + expa * (xr[i] - centroid[i]);
      const double fe = eval(xe);
      if (fe < fr) {
        x[worst] = std::move(xe);
        fx[worst] = fe;
      } else {
        x[worst] = std::move(xr);
        fx[worst] = fr;
      }
    } else if (fr < fx[second_worst]) {
      x[worst] = std::move(xr);
      fx[worst] = fr;
    } else {
      const bool outside = fr < fx[worst];
      std::vector<double> xc(n);
      if (outside) {
        for (std::size_t i = 0; i < n; ++i) xc[i] = centroid[i] + contr * (xr[i] - centroid[i]);
      } else {
        for (std::size_t i = 0; i < n; ++i)
          xc[i] = centroid[i] - contr * (centroid[i] - x[worst][i]);
      }
      const double fc = eval(xc);
      if (fc < (outside ? fr : fx[worst])) {
        x[worst] = std::move(xc);
        fx[worst] = fc;
      } else {
        for (std::size_t j = 0; j <= n; ++j) {
          if (j == order[0]) continue;
          for (std::size_t i = 0; i < n; ++i)
            x[j][i] = x[order[0]][i] + shrink * (x[j][i] - x[order[0]][i]);
          fx[j] = eval(x[j]);
        }
      }
    }
  }

  sort_order();
  result.x = x[order[0]];
  result.f = fx[order[0]];
  result.evals = evals;
  return result;
}

/// Golden-section minimum of a unimodal function on [lo, hi].
template <typename F>
double golden_section_min(F&& f, double lo, double hi, double x_tol = 1e-10) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > x_tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace voltsmile
