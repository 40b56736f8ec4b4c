#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "voltsmile/detail/quadrature.hpp"
#include "voltsmile/fourier.hpp"

using namespace voltsmile;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// characteristic exponent of a centered Gaussian increment with total std s
auto gaussian_log_cf(double sigma_total) {
  return [s2 = sigma_total * sigma_total](double v) {
    return std::complex<double>(-0.5 * v * v * s2, 0.0);
  };
}

PricingGrid adaptive_grid() { return {}; }

PricingGrid euler_grid(int nodes = 4096) {
  PricingGrid g;
  g.quad_mode = QuadMode::euler_sum;
  g.nodes = nodes;
  return g;
}

}  // namespace

TEST_CASE("upper sine-integral tail against independent checks") {
  CHECK_THAT(upper_tail_si(0.0), WithinRel(std::numbers::pi / 2.0, 1e-15));

  // telescoping: q(c1) - q(c2) equals the finite integral of sin(t)/t, which
  // in particular ties the series branch to the auxiliary-function branch
  for (auto [c1, c2] : {std::pair{0.3, 2.0}, {1.0, 3.9}, {3.9, 4.1}, {2.0, 9.0}, {4.5, 40.0}}) {
    const double finite =
        detail::adaptive_simpson([](double t) { return std::sin(t) / t; }, c1, c2, 1e-13);
    CHECK_THAT(upper_tail_si(c1) - upper_tail_si(c2), WithinAbs(finite, 1e-11));
  }

  // large-argument asymptote: q(c) = cos(c)/c + sin(c)/c^2 - 2cos(c)/c^3 + O(c^-4)
  for (double c : {25.0, 80.0, 300.0}) {
    const double asym = std::cos(c) / c + std::sin(c) / (c * c) - 2.0 * std::cos(c) / (c * c * c);
    CHECK_THAT(upper_tail_si(c), WithinAbs(asym, 7.0 / (c * c * c * c)));
  }
}

TEST_CASE("xi transform: degenerate exponent prices to zero time value") {
  const auto flat = [](double) { return std::complex<double>(0.0, 0.0); };
  for (double v : {0.5, 2.0, 9.0}) CHECK(xi_mt(v, 30.0, flat) == std::complex<double>(0.0, 0.0));
}

TEST_CASE("xi transform: v -> 0 limit is half the increment variance") {
  const auto log_cf = gaussian_log_cf(1.0);
  CHECK_THAT(xi_mt(0.0, 30.0, log_cf).real(), WithinRel(0.5, 1e-9));
  CHECK_THAT(std::abs(xi_mt(1e-5, 30.0, log_cf)), WithinRel(0.5, 1e-6));
  CHECK_THROWS_AS(xi_mt(-1.0, 30.0, log_cf), std::invalid_argument);
}

TEST_CASE("xi transform kernel has even real and odd imaginary part") {
  // with the strike phase stripped (F = 0), a Hermitian exponent K gives
  // xi(-v) = conj(xi(v)); evaluate xi(-v) through conj(K(v)) = K(-v)
  const auto log_cf = [](double v) {
    // skewed increment: Gaussian with a cubic phase perturbation
    return std::complex<double>(-0.08 * v * v, 0.01 * v * v * v / (1.0 + v * v));
  };
  for (double v : {0.3, 1.2, 5.0}) {
    const auto xi_plus = xi_mt(v, 0.0, log_cf);
    const auto xi_minus = -detail::expm1_complex(std::conj(log_cf(v))) / (v * v);
    CHECK_THAT(std::abs(xi_minus - std::conj(xi_plus)), WithinAbs(0.0, 1e-15));
  }
}

TEST_CASE("ATM Gaussian time value hits the closed form") {
  // total std 1 => time value phi(0) = 1/sqrt(2 pi)
  const double tv = time_value(30.0, 30.0, gaussian_log_cf(1.0), adaptive_grid());
  CHECK_THAT(tv, WithinAbs(0.3989422804014327, 1e-7));
}

TEST_CASE("far-from-the-money time values vanish") {
  const auto log_cf = gaussian_log_cf(1.0);
  CHECK_THAT(time_value(30.0 - 50.0, 30.0, log_cf, adaptive_grid()), WithinAbs(0.0, 1e-7));
  CHECK_THAT(time_value(30.0 + 50.0, 30.0, log_cf, adaptive_grid()), WithinAbs(0.0, 1e-7));
}

TEST_CASE("call price equals time value plus intrinsic") {
  const double c = call_price(28.0, 30.0, gaussian_log_cf(1.0), adaptive_grid());
  CHECK_THAT(c, WithinAbs(bachelier_call(30.0, 28.0, 1.0), 1e-7));
  CHECK_THAT(c, WithinAbs(2.008490702846, 1e-6));
}

TEST_CASE("deterministic underlying prices to intrinsic exactly") {
  const auto flat = [](double) { return std::complex<double>(0.0, 0.0); };
  CHECK(call_price(28.0, 30.0, flat, adaptive_grid()) == 2.0);
  CHECK(call_price(31.0, 30.0, flat, adaptive_grid()) == 0.0);
}

TEST_CASE("Gaussian oracle: adaptive pricer matches the additive closed form") {
  const double F = 30.0;
  for (double sigma_total : {0.2, 1.0, 5.0}) {
    const auto log_cf = gaussian_log_cf(sigma_total);
    double worst = 0.0;
    for (int i = 0; i <= 40; ++i) {
      const double k = 0.9 * F + 0.2 * F * i / 40.0;
      const double fourier = call_price(k, F, log_cf, adaptive_grid());
      const double exact = bachelier_call(F, k, sigma_total);
      worst = std::max(worst, std::abs(fourier - exact));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("Gaussian oracle: shared-grid mode stays within its coarser budget") {
  const double F = 30.0;
  for (double sigma_total : {0.2, 1.0, 5.0}) {
    const auto log_cf = gaussian_log_cf(sigma_total);
    std::vector<double> strikes;
    for (int i = 0; i <= 20; ++i) strikes.push_back(0.9 * F + 0.2 * F * i / 20.0);
    const std::vector<double> prices = price_strikes(strikes, F, log_cf, euler_grid());
    double worst = 0.0;
    for (std::size_t i = 0; i < strikes.size(); ++i)
      worst = std::max(worst, std::abs(prices[i] - bachelier_call(F, strikes[i], sigma_total)));
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("single-strike ladder reduces to the scalar pricer") {
  const auto log_cf = gaussian_log_cf(1.0);
  const auto ladder = call_price_grid(29.5, 1.0, 1, 30.0, log_cf, euler_grid());
  REQUIRE(ladder.size() == 1);
  CHECK(ladder[0] == call_price(29.5, 30.0, log_cf, euler_grid()));
}

TEST_CASE("price ladders are monotone and convex in strike") {
  const auto log_cf = gaussian_log_cf(1.0);
  for (const PricingGrid& grid : {adaptive_grid(), euler_grid()}) {
    const std::vector<double> prices = call_price_grid(27.0, 0.25, 25, 30.0, log_cf, grid);
    for (std::size_t i = 1; i < prices.size(); ++i) CHECK(prices[i] <= prices[i - 1] + 1e-10);
    for (std::size_t i = 2; i < prices.size(); ++i)
      CHECK(prices[i] - 2.0 * prices[i - 1] + prices[i - 2] >= -1e-8);
  }
}

TEST_CASE("quadrature modes agree within the documented band") {
  PricingGrid loose = euler_grid();
  loose.abs_tol = 1e-5;
  const auto log_cf = gaussian_log_cf(1.0);
  for (double k : {27.0, 30.0, 32.5}) {
    const double a = call_price(k, 30.0, log_cf, adaptive_grid());
    const double e = call_price(k, 30.0, log_cf, loose);
    CHECK_THAT(e, WithinAbs(a, 10.0 * loose.abs_tol));
  }
}

TEST_CASE("prices are insensitive to doubling the truncation bound") {
  const auto log_cf = gaussian_log_cf(0.7);
  PricingGrid doubled = adaptive_grid();
  doubled.truncation *= 2.0;
  for (double k : {28.0, 30.0, 31.5}) {
    const double base = call_price(k, 30.0, log_cf, adaptive_grid());
    const double wide = call_price(k, 30.0, log_cf, doubled);
    CHECK_THAT(wide, WithinAbs(base, 1e-8));
  }
}

TEST_CASE("Black-76 reference values") {
  CHECK_THAT(black_call(30.0, 1e-12, 0.01, 25.0), WithinRel(30.0, 1e-9));
  CHECK(black_call(30.0, 28.0, 0.0, 25.0) == 2.0);
  CHECK(black_call(30.0, 31.0, 0.0, 25.0) == 0.0);
  // F = K = 30, total vol 0.3: 30 (N(0.15) - N(-0.15))
  CHECK_THAT(black_call(30.0, 30.0, 0.3 / std::sqrt(25.0), 25.0),
             WithinAbs(30.0 * (norm_cdf(0.15) - norm_cdf(-0.15)), 1e-12));
  CHECK_THAT(black_call(30.0, 30.0, 0.06, 25.0), WithinAbs(3.5770, 5e-4));
  CHECK_THROWS_AS(black_call(-1.0, 30.0, 0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(black_call(30.0, 30.0, 0.1, 0.0), std::invalid_argument);
}

TEST_CASE("additive closed form reference values") {
  CHECK_THAT(bachelier_call(30.0, 30.0, 2.0), WithinRel(2.0 / std::sqrt(2.0 * std::numbers::pi), 1e-13));
  CHECK(bachelier_call(30.0, 28.0, 0.0) == 2.0);
  CHECK_THAT(bachelier_call(30.0, 28.0, 1.0), WithinAbs(2.00849, 1e-5));
}

TEST_CASE("implied volatility round trips through the Black formula") {
  // at-the-money for the tiny vols (out-of-the-money prices underflow there)
  for (double sigma : {1e-4, 1e-3, 0.0156, 0.1, 0.5, 1.0}) {
    const double price = black_call(30.0, 30.0, sigma, 25.0);
    CHECK_THAT(implied_vol(price, 30.0, 30.0, 25.0), WithinAbs(sigma, 1e-8));
  }
  // includes the flat fitted front-month vol as an off-the-money fixture
  for (double sigma : {0.0156, 0.1, 0.5, 1.0}) {
    const double price = black_call(30.0, 31.0, sigma, 25.0);
    CHECK_THAT(implied_vol(price, 30.0, 31.0, 25.0), WithinAbs(sigma, 1e-8));
  }
}

TEST_CASE("implied volatility rejects prices outside the arbitrage band") {
  CHECK_THROWS_WITH(implied_vol(2.0, 30.0, 28.0, 25.0),
                    Catch::Matchers::ContainsSubstring("intrinsic"));
  CHECK_THROWS_WITH(implied_vol(30.0 - 1e-12, 30.0, 31.0, 25.0),
                    Catch::Matchers::ContainsSubstring("upper bound"));
  CHECK_THROWS_AS(implied_vol(1.0, 30.0, 28.0, 25.0), std::invalid_argument);
}

TEST_CASE("pricing grid validation") {
  PricingGrid grid;
  grid.truncation = 0.0;
  CHECK_THROWS_AS(grid.validate(), std::invalid_argument);
  grid = {};
  grid.nodes = 4;
  CHECK_THROWS_AS(grid.validate(), std::invalid_argument);
  grid = {};
  grid.abs_tol = 0.0;
  CHECK_THROWS_AS(grid.validate(), std::invalid_argument);
}
