#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "voltsmile/detail/parallel.hpp"
#include "voltsmile/forward_model.hpp"
#include "voltsmile/fourier.hpp"
#include "voltsmile/market.hpp"
#include "voltsmile/optimize.hpp"
#include "voltsmile/rng.hpp"

namespace voltsmile {

enum class ModelKind { black, one_factor, two_factor };
enum class ObjectiveKind { price, iv };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::black: return "black";
    case ModelKind::one_factor: return "one-factor";
    case ModelKind::two_factor: return "two-factor";
  }
  return "?";
}

// Large finite sentinel for trial points whose pricing failed; lets the
// simplex retreat instead of aborting the run.
inline constexpr double kObjectiveSentinel = 1e12;

struct CalibrationConfig {
  ModelKind model_kind = ModelKind::two_factor;
  ObjectiveKind objective = ObjectiveKind::price;
  PricingGrid grid;
  std::int64_t optimizer_budget = 60000;  // objective evaluations, all starts together
  int multistart = 2;
  std::uint64_t seed = 1;
  double penalty_weight = 100.0;  // per quote whose model price has no implied vol
  std::optional<TwoFactorParams> start_params;  // warm start for the first run

  void validate_config() const {
    if (optimizer_budget < 1) throw std::invalid_argument("CalibrationConfig: budget >= 1");
    if (multistart < 1) throw std::invalid_argument("CalibrationConfig: multistart >= 1");
  }
};

/// Maps feasible parameter sets onto an unconstrained coordinate vector:
/// log alpha_j, skew s_j with beta_j = alpha_j tanh(s_j), log gamma1, log mu
/// and one log Gamma2 per atomic period. Decoding any real vector yields a
/// feasible parameter set; composite Gamma2 values are never coordinates
/// (they are eliminated through the no-arbitrage weights).
struct ParameterCodec {
  ModelKind kind = ModelKind::two_factor;
  std::vector<std::string> atom_labels;  // ordered by delivery start

  static ParameterCodec for_market(ModelKind kind, const AtomicDecomposition& decomp) {
    ParameterCodec codec;
    codec.kind = kind;
    for (const auto& atom : decomp.atoms) codec.atom_labels.push_back(atom.label);
    return codec;
  }

  std::size_t dim() const {
    return (kind == ModelKind::two_factor ? 6 : 2) + atom_labels.size();
  }

  std::vector<double> encode(const TwoFactorParams& p) const {
    validate(p);
    std::vector<double> x;
    x.reserve(dim());
    if (kind == ModelKind::two_factor) {
      if (!(p.gamma1 > 0.0) || !(p.mu > 0.0))
        throw std::invalid_argument("encode: two-factor parameters need gamma1 > 0 and mu > 0");
      x.push_back(std::log(p.factor1.alpha));
      x.push_back(std::atanh(p.factor1.beta / p.factor1.alpha));
    }
    x.push_back(std::log(p.factor2.alpha));
    x.push_back(std::atanh(p.factor2.beta / p.factor2.alpha));
    if (kind == ModelKind::two_factor) {
      x.push_back(std::log(p.gamma1));
      x.push_back(std::log(p.mu));
    }
    for (const auto& label : atom_labels) {
      const auto it = p.gamma2.find(label);
      if (it == p.gamma2.end())
        throw std::invalid_argument("encode: missing gamma2 for atom '" + label + "'");
      x.push_back(std::log(it->second));
    }
    return x;
  }

  TwoFactorParams decode(std::span<const double> x) const {
    if (x.size() != dim()) throw std::invalid_argument("decode: wrong coordinate count");
    // tanh saturates to exactly 1 in doubles around |s| = 19; keep the skew
    // ratio strictly inside the open interval
    const auto skew = [](double s) { return std::clamp(std::tanh(s), -(1.0 - 1e-12), 1.0 - 1e-12); };
    TwoFactorParams p;
    std::size_t i = 0;
    if (kind == ModelKind::two_factor) {
      p.factor1.alpha = std::exp(x[i++]);
      p.factor1.beta = p.factor1.alpha * skew(x[i++]);
      p.factor1.delta = 1.0;
    } else {
      p.factor1 = NigParams{0.1, 0.0, 1.0};  // inert; gamma1 = 0 removes it
    }
    p.factor2.alpha = std::exp(x[i++]);
    p.factor2.beta = p.factor2.alpha * skew(x[i++]);
    p.factor2.delta = 1.0;
    if (kind == ModelKind::two_factor) {
      p.gamma1 = std::exp(x[i++]);
      p.mu = std::exp(x[i++]);
    } else {
      p.gamma1 = 0.0;
      p.mu = 0.0;
    }
    for (const auto& label : atom_labels) p.gamma2[label] = std::exp(x[i++]);
    return p;
  }
};

/// One quoted contract, flattened for objective evaluation.
struct PreparedContract {
  std::string label;
  DeliveryPeriod period;
  double exercise_day = 0.0;
  double futures_price = 0.0;
  std::vector<double> strikes;
  std::vector<double> market_prices;
  std::vector<double> market_ivs;  // NaN where the quote has no implied vol
};

inline std::vector<PreparedContract> prepare_contracts(const MarketSnapshot& snap) {
  // group quotes by (underlying, exercise day)
  std::map<std::pair<std::string, long>, std::vector<const OptionQuote*>> groups;
  for (const auto& q : snap.options) groups[{q.underlying_label, q.exercise_day}].push_back(&q);
  std::vector<PreparedContract> out;
  for (const auto& [key, quotes] : groups) {
    PreparedContract c;
    c.label = key.first;
    const FuturesEntry& entry = snap.futures.at(c.label);
    c.period = entry.period;
    c.exercise_day = static_cast<double>(key.second);
    c.futures_price = entry.price;
    std::vector<const OptionQuote*> sorted = quotes;
    std::sort(sorted.begin(), sorted.end(),
              [](const OptionQuote* a, const OptionQuote* b) { return a->strike < b->strike; });
    for (const OptionQuote* q : sorted) {
      c.strikes.push_back(q->strike);
      c.market_prices.push_back(q->settlement_price);
      double iv = std::numeric_limits<double>::quiet_NaN();
      try {
        iv = implied_vol(q->settlement_price, c.futures_price, q->strike, c.exercise_day);
      } catch (const std::exception&) {
      }
      c.market_ivs.push_back(iv);
    }
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const PreparedContract& a, const PreparedContract& b) {
    return std::tie(a.period.start, a.period.end, a.label, a.exercise_day) <
           std::tie(b.period.start, b.period.end, b.label, b.exercise_day);
  });
  return out;
}

/// Sum of squared price errors over all contracts and strikes. Contracts are
/// priced in parallel; the reduction order is fixed by contract index.
inline double objective_price(const TwoFactorParams& params,
                              const std::vector<PreparedContract>& contracts,
                              const AtomicDecomposition& decomp, const PricingGrid& grid) {
  std::vector<double> per_contract(contracts.size(), 0.0);
  detail::parallel_for(contracts.size(), [&](std::size_t i) {
    const PreparedContract& c = contracts[i];
    const TwoFactorCf cf(params, 0.0, c.exercise_day, c.period, decomp);
    const std::vector<double> prices = price_strikes(c.strikes, c.futures_price, cf, grid);
    double sse = 0.0;
    for (std::size_t u = 0; u < prices.size(); ++u) {
      const double e = prices[u] - c.market_prices[u];
      sse += e * e;
    }
    per_contract[i] = sse;
  });
  double total = 0.0;
  for (const double s : per_contract) total += s;
  return total;
}

/// Sum of squared implied-volatility errors; a quote whose model price leaves
/// the invertible band contributes penalty_weight instead. Quotes without a
/// market implied vol are skipped.
inline double objective_iv(const TwoFactorParams& params,
                           const std::vector<PreparedContract>& contracts,
                           const AtomicDecomposition& decomp, const PricingGrid& grid,
                           double penalty_weight) {
  std::vector<double> per_contract(contracts.size(), 0.0);
  detail::parallel_for(contracts.size(), [&](std::size_t i) {
    const PreparedContract& c = contracts[i];
    const TwoFactorCf cf(params, 0.0, c.exercise_day, c.period, decomp);
    const std::vector<double> prices = price_strikes(c.strikes, c.futures_price, cf, grid);
    double sse = 0.0;
    for (std::size_t u = 0; u < prices.size(); ++u) {
      if (std::isnan(c.market_ivs[u])) continue;
      try {
        const double iv = implied_vol(prices[u], c.futures_price, c.strikes[u], c.exercise_day);
        const double e = iv - c.market_ivs[u];
        sse += e * e;
      } catch (const std::exception&) {
        sse += penalty_weight;
      }
    }
    per_contract[i] = sse;
  });
  double total = 0.0;
  for (const double s : per_contract) total += s;
  return total;
}

struct ContractFit {
  std::string label;
  int n_quotes = 0;
  double rmse_price = 0.0;
  double rmse_iv = 0.0;  // NaN when no quote pair had implied vols
};

struct CalibrationResult {
  ModelKind model_kind = ModelKind::two_factor;
  TwoFactorParams params;                     // factor models
  std::map<std::string, double> black_sigma;  // black model, one sigma per contract
  double objective_value = std::numeric_limits<double>::infinity();
  std::int64_t evaluations = 0;
  bool converged = false;
  long pricing_failures = 0;
  std::vector<ContractFit> per_contract;
  std::vector<std::string> warnings;
};

/// Trace hook for run logs: (start index, evaluations so far in this start,
/// objective) on every improvement.
using CalibrationTrace = std::function<void(int, std::int64_t, double)>;

namespace detail {

inline double model_price_black(const std::map<std::string, double>& sigma,
                                const PreparedContract& c, double strike) {
  return black_call(c.futures_price, strike, sigma.at(c.label), c.exercise_day);
}

// Black SSE for one contract and one flat sigma.
inline double black_contract_sse(const PreparedContract& c, double sigma, ObjectiveKind objective,
                                 double penalty_weight) {
  double sse = 0.0;
  for (std::size_t u = 0; u < c.strikes.size(); ++u) {
    if (objective == ObjectiveKind::price) {
      const double e = black_call(c.futures_price, c.strikes[u], sigma, c.exercise_day) -
                       c.market_prices[u];
      sse += e * e;
    } else {
      if (std::isnan(c.market_ivs[u])) continue;
      const double e = sigma - c.market_ivs[u];
      sse += e * e;
    }
  }
  (void)penalty_weight;
  return sse;
}

inline std::vector<ContractFit> fit_summary(const std::vector<PreparedContract>& contracts,
                                            const std::function<std::vector<double>(
                                                const PreparedContract&)>& model_prices) {
  std::vector<ContractFit> out;
  for (const auto& c : contracts) {
    const std::vector<double> prices = model_prices(c);
    ContractFit fit;
    fit.label = c.label;
    fit.n_quotes = static_cast<int>(c.strikes.size());
    double sse_p = 0.0, sse_iv = 0.0;
    int n_iv = 0;
    for (std::size_t u = 0; u < c.strikes.size(); ++u) {
      const double e = prices[u] - c.market_prices[u];
      sse_p += e * e;
      if (std::isnan(c.market_ivs[u])) continue;
      try {
        const double iv = implied_vol(prices[u], c.futures_price, c.strikes[u], c.exercise_day);
        sse_iv += (iv - c.market_ivs[u]) * (iv - c.market_ivs[u]);
        ++n_iv;
      } catch (const std::exception&) {
      }
    }
    fit.rmse_price = std::sqrt(sse_p / fit.n_quotes);
    fit.rmse_iv = n_iv ? std::sqrt(sse_iv / n_iv) : std::numeric_limits<double>::quiet_NaN();
    out.push_back(fit);
  }
  return out;
}

}  // namespace detail

/// Per-contract flat Black volatilities by one-dimensional minimization
/// (coarse log-grid scan plus golden-section refinement).
inline std::map<std::string, double> fit_black_sigmas(
    const std::vector<PreparedContract>& contracts, ObjectiveKind objective,
    double penalty_weight) {
  std::map<std::string, double> out;
  for (const auto& c : contracts) {
    const auto sse = [&](double log_sigma) {
      return detail::black_contract_sse(c, std::exp(log_sigma), objective, penalty_weight);
    };
    const double lo = std::log(1e-6), hi = std::log(10.0);
    double best_x = lo;
    double best_f = sse(lo);
    const int scan = 128;
    for (int i = 1; i <= scan; ++i) {
      const double x = lo + (hi - lo) * i / scan;
      const double f = sse(x);
      if (f < best_f) {
        best_f = f;
        best_x = x;
      }
    }
    const double step = (hi - lo) / scan;
    const double refined = golden_section_min(sse, best_x - step, best_x + step, 1e-12);
    out[c.label] = std::exp(refined);
  }
  return out;
}

namespace detail {

// Randomized but seed-deterministic starting point. The Gamma2 seeds come
// from per-contract Black volatilities through the at-the-money matching
//   sigma_total ~ F sigma_black sqrt(tau)  =>  Gamma2 ~ F sigma_black / sqrt(Var J2(1));
// the remaining coordinates are drawn log-uniform from boxes wide enough to
// cover market-plausible shapes.
inline std::vector<double> heuristic_start(const ParameterCodec& codec,
                                           const std::vector<PreparedContract>& contracts,
                                           const std::map<std::string, double>& black_sigma,
                                           std::uint64_t seed, int start_index) {
  Rng rng(Rng::mix(seed, 1000 + static_cast<std::uint64_t>(start_index)));
  const auto log_uniform = [&](double lo, double hi) {
    return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform01());
  };
  TwoFactorParams p;
  p.factor2.alpha = log_uniform(2e-4, 5e-2);
  p.factor2.beta = p.factor2.alpha * std::tanh(0.6 * rng.uniform01());
  p.factor2.delta = 1.0;
  const bool two = codec.kind == ModelKind::two_factor;
  double share2 = 1.0;
  if (two) {
    p.factor1.alpha = log_uniform(0.05, 1.0);
    p.factor1.beta = p.factor1.alpha * std::tanh(0.6 * rng.uniform01());
    p.factor1.delta = 1.0;
    p.mu = log_uniform(1e-3, 2e-2);
    share2 = 0.5 + 0.4 * rng.uniform01();
  }
  const double sd2 = std::sqrt(moments(p.factor2).variance);

  // scale seeds from the quoted contracts; atoms without quotes fall back to
  // the median of the seeded ones
  std::map<std::string, double> seeds;
  double front_scale = 0.0;
  for (const auto& c : contracts) {
    const auto it = black_sigma.find(c.label);
    if (it == black_sigma.end()) continue;
    const double g = c.futures_price * it->second / sd2 * share2;
    seeds[c.label] = g;
    if (front_scale == 0.0) front_scale = c.futures_price * it->second;
  }
  std::vector<double> seeded;
  for (const auto& label : codec.atom_labels)
    if (seeds.count(label)) seeded.push_back(seeds.at(label));
  std::sort(seeded.begin(), seeded.end());
  const double fallback = seeded.empty() ? 0.01 : seeded[seeded.size() / 2];
  for (const auto& label : codec.atom_labels)
    p.gamma2[label] = seeds.count(label) ? seeds.at(label) : fallback;

  if (two) {
    const double sd1 = std::sqrt(moments(p.factor1).variance);
    p.gamma1 = std::max(front_scale, 1e-4) / sd1 * (1.0 - share2 + 0.1);
  } else {
    p.gamma1 = 0.0;
    p.mu = 0.0;
  }
  return codec.encode(p);
}

}  // namespace detail

/// NOA-constrained least-squares fit. Black fits one flat sigma per contract;
/// the factor models run best-of-multistart Nelder-Mead (with two restarts
/// per start at shrinking simplex sizes) on the unconstrained coordinates.
/// Deterministic for a fixed (snapshot, config) pair.
inline CalibrationResult calibrate(const MarketSnapshot& snap, const CalibrationConfig& config,
                                   const CalibrationTrace& trace = nullptr) {
  config.validate_config();
  config.grid.validate();
  if (snap.options.empty()) throw std::invalid_argument("calibrate: snapshot has no quotes");

  CalibrationResult result;
  result.model_kind = config.model_kind;
  for (const auto& v : noa_check(snap, 1e-6 * (1.0 + snap.futures.begin()->second.price)))
    result.warnings.push_back("futures prices violate the no-arbitrage average for '" + v.label +
                              "' (expected " + std::to_string(v.expected) + ", observed " +
                              std::to_string(v.observed) + ")");

  const std::vector<PreparedContract> contracts = prepare_contracts(snap);

  if (config.model_kind == ModelKind::black) {
    result.black_sigma = fit_black_sigmas(contracts, config.objective, config.penalty_weight);
    double total = 0.0;
    for (const auto& c : contracts)
      total += detail::black_contract_sse(c, result.black_sigma.at(c.label), config.objective,
                                          config.penalty_weight);
    result.objective_value = total;
    result.converged = true;
    result.evaluations = 0;
    result.per_contract = detail::fit_summary(contracts, [&](const PreparedContract& c) {
      std::vector<double> prices;
      for (const double k : c.strikes)
        prices.push_back(detail::model_price_black(result.black_sigma, c, k));
      return prices;
    });
    return result;
  }

  const ParameterCodec codec = ParameterCodec::for_market(config.model_kind, snap.decomp);
  std::atomic<long> failures{0};
  const auto objective = [&](const std::vector<double>& coords) {
    try {
      const TwoFactorParams p = codec.decode(coords);
      validate(p);
      return config.objective == ObjectiveKind::price
                 ? objective_price(p, contracts, snap.decomp, config.grid)
                 : objective_iv(p, contracts, snap.decomp, config.grid, config.penalty_weight);
    } catch (const std::exception&) {
      failures.fetch_add(1);
      return kObjectiveSentinel;
    }
  };

  const std::map<std::string, double> black_seed =
      fit_black_sigmas(contracts, ObjectiveKind::price, config.penalty_weight);

  const std::int64_t budget_per_start =
      std::max<std::int64_t>(config.optimizer_budget / config.multistart, 10);
  std::vector<double> best_x;
  double best_f = std::numeric_limits<double>::infinity();
  bool best_converged = false;
  for (int start = 0; start < config.multistart; ++start) {
    std::vector<double> x = (start == 0 && config.start_params)
                                ? codec.encode(*config.start_params)
                                : detail::heuristic_start(codec, contracts, black_seed,
                                                          config.seed, start);
    double fx = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::int64_t used = 0;
    // three rounds from the incumbent with shrinking simplexes
    const double steps[3] = {0.25, 0.08, 0.02};
    const double split[3] = {0.5, 0.3, 0.2};
    for (int round = 0; round < 3; ++round) {
      NelderMeadOptions opt;
      opt.max_evals = std::max<std::int64_t>(
          static_cast<std::int64_t>(split[round] * budget_per_start), 10);
      opt.init_step = steps[round];
      const NelderMeadResult r = nelder_mead(objective, x, opt);
      used += r.evals;
      if (r.f < fx) {
        fx = r.f;
        x = r.x;
        if (trace) trace(start, used, fx);
      }
      converged = converged || r.converged;
    }
    result.evaluations += used;
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
      best_converged = converged;
    }
  }
  if (best_x.empty() || best_f >= kObjectiveSentinel)
    throw std::runtime_error("calibrate: every start diverged (pricing failed everywhere)");

  result.params = codec.decode(best_x);
  result.objective_value = objective(best_x);
  result.converged = best_converged;
  result.pricing_failures = failures.load();
  result.per_contract = detail::fit_summary(contracts, [&](const PreparedContract& c) {
    const TwoFactorCf cf(result.params, 0.0, c.exercise_day, c.period, snap.decomp);
    return price_strikes(c.strikes, c.futures_price, cf, config.grid);
  });
  return result;
}

}  // namespace voltsmile
