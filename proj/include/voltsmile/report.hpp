#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "voltsmile/calibration.hpp"
#include "voltsmile/market.hpp"
#include "voltsmile/nig.hpp"

namespace voltsmile {

/// One row of the per-quote fit report.
struct ReportRow {
  std::string model;
  std::string contract;
  std::string delivery_start;  // ISO date
  double strike = 0.0;
  double market_price = 0.0;
  double model_price = 0.0;
  double market_iv = std::numeric_limits<double>::quiet_NaN();
  double model_iv = std::numeric_limits<double>::quiet_NaN();
};

struct FitReport {
  std::vector<ReportRow> rows;
};

/// Per-quote market vs model table for a converged calibration result.
inline FitReport fit_report(const CalibrationResult& result, const MarketSnapshot& snap,
                            const CalibrationConfig& config) {
  FitReport report;
  const std::vector<PreparedContract> contracts = prepare_contracts(snap);
  for (const auto& c : contracts) {
    std::vector<double> prices;
    if (result.model_kind == ModelKind::black) {
      for (const double k : c.strikes)
        prices.push_back(black_call(c.futures_price, k, result.black_sigma.at(c.label),
                                    c.exercise_day));
    } else {
      const TwoFactorCf cf(result.params, 0.0, c.exercise_day, c.period, snap.decomp);
      prices = price_strikes(c.strikes, c.futures_price, cf, config.grid);
    }
    const auto start_date = snap.valuation_date + std::chrono::days{c.period.start};
    for (std::size_t u = 0; u < c.strikes.size(); ++u) {
      ReportRow row;
      row.model = to_string(result.model_kind);
      row.contract = c.label;
      row.delivery_start = format_iso_date(start_date);
      row.strike = c.strikes[u];
      row.market_price = c.market_prices[u];
      row.model_price = prices[u];
      row.market_iv = c.market_ivs[u];
      if (result.model_kind == ModelKind::black) {
        row.model_iv = result.black_sigma.at(c.label);
      } else {
        try {
          row.model_iv = implied_vol(prices[u], c.futures_price, c.strikes[u], c.exercise_day);
        } catch (const std::exception&) {
        }
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

namespace detail {

inline std::string format_opt(double x) { return std::isnan(x) ? "" : format_double(x); }

inline double parse_opt(const std::string& s) {
  return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::strtod(s.c_str(), nullptr);
}

}  // namespace detail

inline void write_report_csv(const FitReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << "model,contract,delivery_start,strike,market_price,model_price,market_iv,model_iv\n";
  for (const auto& r : report.rows) {
    out << r.model << ',' << r.contract << ',' << r.delivery_start << ','
        << detail::format_double(r.strike) << ',' << detail::format_double(r.market_price) << ','
        << detail::format_double(r.model_price) << ',' << detail::format_opt(r.market_iv) << ','
        << detail::format_opt(r.model_iv) << '\n';
  }
}

inline FitReport read_report_csv(const std::string& path) {
  const detail::CsvFile file = detail::read_csv(path);
  const std::vector<std::string> want = {"model",        "contract",    "delivery_start",
                                         "strike",       "market_price", "model_price",
                                         "market_iv",    "model_iv"};
  if (file.header != want)
    throw std::invalid_argument(path + ": not a fit report (unexpected header)");
  FitReport report;
  for (const auto& row : file.rows) {
    if (row.fields.size() != 8)
      throw std::invalid_argument(path + ": line " + std::to_string(row.line) +
                                  ": expected 8 fields");
    ReportRow r;
    r.model = row.fields[0];
    r.contract = row.fields[1];
    r.delivery_start = row.fields[2];
    r.strike = detail::parse_double(row.fields[3], "strike", row.line);
    r.market_price = detail::parse_double(row.fields[4], "market_price", row.line);
    r.model_price = detail::parse_double(row.fields[5], "model_price", row.line);
    r.market_iv = detail::parse_opt(row.fields[6]);
    r.model_iv = detail::parse_opt(row.fields[7]);
    report.rows.push_back(r);
  }
  return report;
}

/// Model description persisted as a parameter file; covers the calibrated
/// model kinds plus a flat Gaussian test factor for pricer sanity checks.
struct ModelFile {
  std::string kind;  // "black" | "one-factor" | "two-factor" | "gaussian"
  TwoFactorParams params;
  std::map<std::string, double> black_sigma;
  double gauss_sigma = 0.0;  // per sqrt(day)
};

inline void write_model_file(const ModelFile& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << "parameter,value\n";
  out << "model," << model.kind << '\n';
  if (model.kind == "black") {
    for (const auto& [label, sigma] : model.black_sigma)
      out << "sigma." << label << ',' << detail::format_double(sigma) << '\n';
  } else if (model.kind == "gaussian") {
    out << "sigma," << detail::format_double(model.gauss_sigma) << '\n';
  } else {
    if (model.kind == "two-factor") {
      out << "alpha1," << detail::format_double(model.params.factor1.alpha) << '\n';
      out << "beta1," << detail::format_double(model.params.factor1.beta) << '\n';
    }
    out << "alpha2," << detail::format_double(model.params.factor2.alpha) << '\n';
    out << "beta2," << detail::format_double(model.params.factor2.beta) << '\n';
    if (model.kind == "two-factor") {
      out << "gamma1," << detail::format_double(model.params.gamma1) << '\n';
      out << "mu," << detail::format_double(model.params.mu) << '\n';
    }
    for (const auto& [label, g] : model.params.gamma2)
      out << "gamma2." << label << ',' << detail::format_double(g) << '\n';
  }
}

inline ModelFile read_model_file(const std::string& path) {
  const detail::CsvFile file = detail::read_csv(path);
  if (file.header != std::vector<std::string>{"parameter", "value"})
    throw std::invalid_argument(path + ": not a parameter file (want header parameter,value)");
  std::map<std::string, std::string> kv;
  for (const auto& row : file.rows) {
    if (row.fields.size() != 2)
      throw std::invalid_argument(path + ": line " + std::to_string(row.line) +
                                  ": expected 2 fields");
    if (!kv.emplace(row.fields[0], row.fields[1]).second)
      throw std::invalid_argument(path + ": duplicate parameter '" + row.fields[0] + "'");
  }
  const auto take = [&](const std::string& name) {
    const auto it = kv.find(name);
    if (it == kv.end())
      throw std::invalid_argument(path + ": missing parameter '" + name + "'");
    const double v = std::strtod(it->second.c_str(), nullptr);
    kv.erase(it);
    return v;
  };
  ModelFile model;
  {
    const auto it = kv.find("model");
    if (it == kv.end()) throw std::invalid_argument(path + ": missing parameter 'model'");
    model.kind = it->second;
    kv.erase(it);
  }
  if (model.kind == "black") {
    for (const auto& [name, value] : kv) {
      if (name.rfind("sigma.", 0) != 0)
        throw std::invalid_argument(path + ": unexpected parameter '" + name + "'");
      model.black_sigma[name.substr(6)] = std::strtod(value.c_str(), nullptr);
    }
    return model;
  }
  if (model.kind == "gaussian") {
    model.gauss_sigma = take("sigma");
  } else if (model.kind == "one-factor" || model.kind == "two-factor") {
    if (model.kind == "two-factor") {
      model.params.factor1.alpha = take("alpha1");
      model.params.factor1.beta = take("beta1");
      model.params.gamma1 = take("gamma1");
      model.params.mu = take("mu");
    } else {
      model.params.factor1 = NigParams{0.1, 0.0, 1.0};
      model.params.gamma1 = 0.0;
      model.params.mu = 0.0;
    }
    model.params.factor2.alpha = take("alpha2");
    model.params.factor2.beta = take("beta2");
    for (const auto& [name, value] : kv) {
      if (name.rfind("gamma2.", 0) != 0)
        throw std::invalid_argument(path + ": unexpected parameter '" + name + "'");
      model.params.gamma2[name.substr(7)] = std::strtod(value.c_str(), nullptr);
    }
  } else {
    throw std::invalid_argument(path + ": unknown model kind '" + model.kind + "'");
  }
  return model;
}

// --- tidy CSV emitters for external plotting -------------------------------

/// (contract, strike, series, value): one market series plus one implied-vol
/// series per supplied report.
inline void emit_smile(const std::vector<FitReport>& reports, std::ostream& out) {
  if (reports.empty()) throw std::invalid_argument("emit_smile: need at least one report");
  out << "contract,strike,series,value\n";
  const FitReport& first = reports.front();
  for (const auto& row : first.rows) {
    out << row.contract << ',' << detail::format_double(row.strike) << ",market,"
        << detail::format_opt(row.market_iv) << '\n';
    for (const auto& report : reports) {
      const ReportRow* match = nullptr;
      for (const auto& r : report.rows)
        if (r.contract == row.contract && r.strike == row.strike) {
          match = &r;
          break;
        }
      if (match)
        out << row.contract << ',' << detail::format_double(row.strike) << ',' << match->model
            << ',' << detail::format_opt(match->model_iv) << '\n';
    }
  }
}

/// (delivery_start, strike, iv) for the requested series ("model"/"market").
inline void emit_surface(const FitReport& report, const std::string& series, std::ostream& out) {
  if (series != "model" && series != "market")
    throw std::invalid_argument("emit_surface: series must be 'model' or 'market'");
  out << "delivery_start,strike,iv\n";
  for (const auto& row : report.rows)
    out << row.delivery_start << ',' << detail::format_double(row.strike) << ','
        << detail::format_opt(series == "model" ? row.model_iv : row.market_iv) << '\n';
}

/// (x, model_density, gaussian_density) for one driving factor; the Gaussian
/// column is the normal law with the factor's mean and variance.
inline void emit_density(const NigParams& factor, std::ostream& out, int points = 321,
                         double half_width_sigmas = 8.0) {
  const NigMoments m = moments(factor);
  const double sd = std::sqrt(m.variance);
  out << "x,model_density,gaussian_density\n";
  for (int i = 0; i < points; ++i) {
    const double x = -half_width_sigmas * sd + 2.0 * half_width_sigmas * sd * i / (points - 1);
    const double gauss = std::exp(-0.5 * x * x / m.variance) / (sd * std::sqrt(2.0 * std::numbers::pi));
    out << detail::format_double(x) << ',' << detail::format_double(density_centered(factor, x))
        << ',' << detail::format_double(gauss) << '\n';
  }
}

/// (period, gamma2, is_composite) over all listed periods in delivery order.
inline void emit_gamma2(const TwoFactorParams& params, std::vector<DeliveryPeriod> periods,
                        const AtomicDecomposition& decomp, std::ostream& out) {
  std::sort(periods.begin(), periods.end(), [](const DeliveryPeriod& a, const DeliveryPeriod& b) {
    return std::tie(a.start, a.end, a.label) < std::tie(b.start, b.end, b.label);
  });
  out << "period,gamma2,is_composite\n";
  for (const auto& p : periods)
    out << p.label << ',' << detail::format_double(resolve_gamma2(params, decomp, p)) << ','
        << (decomp.is_composite(p.label) ? 1 : 0) << '\n';
}

}  // namespace voltsmile
