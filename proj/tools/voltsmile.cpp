// voltsmile - pricing, implied-vol and no-arbitrage tooling for power
// options on overlapping delivery periods.
//
// Exit codes: 0 ok, 1 no-arbitrage violation found, 2 input error,
// 3 numerical failure. stdout carries data, stderr diagnostics.

#include <complex>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "voltsmile/voltsmile.hpp"

namespace vs = voltsmile;
namespace fs = std::filesystem;

namespace {

std::vector<double> parse_strikes(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double lo = 0, hi = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0 || hi < lo)
      throw std::invalid_argument("bad strike range '" + text + "' (want lo:hi:step)");
    for (double k = lo; k <= hi + 1e-12 * step; k += step) out.push_back(k);
    return out;
  }
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::invalid_argument("no strikes given");
  return out;
}

std::string format_opt_iv(double iv) { return std::isnan(iv) ? "" : vs::detail::format_double(iv); }

vs::PricingGrid make_grid(const std::string& mode, double trunc, int nodes, double tol) {
  vs::PricingGrid grid;
  grid.truncation = trunc;
  grid.nodes = nodes;
  grid.abs_tol = tol;
  if (mode == "adaptive")
    grid.quad_mode = vs::QuadMode::adaptive_simpson;
  else if (mode == "euler")
    grid.quad_mode = vs::QuadMode::euler_sum;
  else
    throw std::invalid_argument("unknown pricing mode '" + mode + "'");
  return grid;
}

struct PriceArgs {
  std::string params_file, futures_file, contract, strikes_text, mode = "fourier";
  std::string date_text, exercise_text, out_csv;
  std::string quad = "adaptive";
  double trunc = 10.0, tol = 1e-8;
  int nodes = 4096;
  std::int64_t mc_paths = 1'000'000;
  int mc_steps = 32;
  std::uint64_t mc_seed = 1;
};

int cmd_price(const PriceArgs& a) {
  const auto valuation = vs::parse_iso_date(a.date_text);
  const vs::MarketSnapshot snap = vs::load_futures_only(a.futures_file, valuation);
  const auto entry = snap.futures.find(a.contract);
  if (entry == snap.futures.end())
    throw std::invalid_argument("unknown contract label '" + a.contract + "'");
  const double futures_price = entry->second.price;
  const vs::DeliveryPeriod& period = entry->second.period;
  const double T = static_cast<double>((vs::parse_iso_date(a.exercise_text) - valuation).count());
  if (!(T > 0.0)) throw std::invalid_argument("exercise date must be after the valuation date");
  if (T > static_cast<double>(period.start))
    throw std::invalid_argument("exercise date falls after delivery start of '" + a.contract +
                                "'");
  const std::vector<double> strikes = parse_strikes(a.strikes_text);
  const vs::ModelFile model = vs::read_model_file(a.params_file);
  const vs::PricingGrid grid = make_grid(a.quad, a.trunc, a.nodes, a.tol);

  std::vector<double> prices(strikes.size());
  std::vector<double> stderrs;
  if (a.mode == "fourier") {
    if (model.kind == "gaussian") {
      const double s2 = model.gauss_sigma * model.gauss_sigma * T;
      const auto log_cf = [s2](double v) { return std::complex<double>(-0.5 * v * v * s2, 0.0); };
      prices = vs::price_strikes(strikes, futures_price, log_cf, grid);
    } else if (model.kind == "one-factor" || model.kind == "two-factor") {
      const vs::TwoFactorCf cf(model.params, 0.0, T, period, snap.decomp);
      prices = vs::price_strikes(strikes, futures_price, cf, grid);
    } else {
      throw std::invalid_argument("mode fourier needs a factor-model or gaussian parameter file");
    }
  } else if (a.mode == "mc") {
    if (model.kind != "one-factor" && model.kind != "two-factor")
      throw std::invalid_argument("mode mc needs a factor-model parameter file");
    vs::McConfig mc;
    mc.n_paths = a.mc_paths;
    mc.n_steps = a.mc_steps;
    mc.seed = a.mc_seed;
    const auto mc_prices =
        vs::mc_price_strikes(strikes, model.params, 0.0, T, period, snap.decomp, futures_price, mc);
    stderrs.resize(strikes.size());
    for (std::size_t u = 0; u < strikes.size(); ++u) {
      prices[u] = mc_prices[u].price;
      stderrs[u] = mc_prices[u].stderr_;
    }
  } else if (a.mode == "black") {
    if (model.kind != "black")
      throw std::invalid_argument("mode black needs a black parameter file");
    const auto sigma = model.black_sigma.find(a.contract);
    if (sigma == model.black_sigma.end())
      throw std::invalid_argument("parameter file has no sigma for '" + a.contract + "'");
    for (std::size_t u = 0; u < strikes.size(); ++u)
      prices[u] = vs::black_call(futures_price, strikes[u], sigma->second, T);
  } else {
    throw std::invalid_argument("unknown mode '" + a.mode + "' (want fourier, mc or black)");
  }

  std::ostringstream table;
  table << (stderrs.empty() ? "strike,price,implied_vol" : "strike,price,stderr,implied_vol")
        << '\n';
  for (std::size_t u = 0; u < strikes.size(); ++u) {
    double iv = std::numeric_limits<double>::quiet_NaN();
    try {
      iv = vs::implied_vol(prices[u], futures_price, strikes[u], T);
    } catch (const std::exception&) {
    }
    table << vs::detail::format_double(strikes[u]) << ',' << vs::detail::format_double(prices[u]);
    if (!stderrs.empty()) table << ',' << vs::detail::format_double(stderrs[u]);
    table << ',' << format_opt_iv(iv) << '\n';
  }
  std::cout << table.str();
  if (!a.out_csv.empty()) {
    std::ofstream out(a.out_csv);
    if (!out) throw std::invalid_argument("cannot write " + a.out_csv);
    out << table.str();
  }
  return 0;
}

struct CalibrateArgs {
  std::string futures_file, options_file, date_text, out_dir;
  std::string model = "two-factor", objective = "price", start_file;
  std::string quad = "adaptive";
  double trunc = 10.0, tol = 1e-8;
  int nodes = 4096;
  std::uint64_t seed = 1;
  int multistart = 2;
  std::int64_t budget = 60000;
  double band_lo = 0.90, band_hi = 1.10;
  double penalty = 100.0;
};

int cmd_calibrate(const CalibrateArgs& a) {
  const auto valuation = vs::parse_iso_date(a.date_text);
  vs::MarketSnapshot snap = vs::load_snapshot(a.futures_file, a.options_file, valuation);
  std::vector<std::string> warnings;
  snap = vs::filter_strikes(snap, a.band_lo, a.band_hi, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  if (snap.options.empty())
    throw std::invalid_argument("no quotes left after the strike filter");

  vs::CalibrationConfig config;
  if (a.model == "black")
    config.model_kind = vs::ModelKind::black;
  else if (a.model == "one-factor")
    config.model_kind = vs::ModelKind::one_factor;
  else if (a.model == "two-factor")
    config.model_kind = vs::ModelKind::two_factor;
  else
    throw std::invalid_argument("unknown model '" + a.model + "'");
  if (a.objective == "price")
    config.objective = vs::ObjectiveKind::price;
  else if (a.objective == "iv")
    config.objective = vs::ObjectiveKind::iv;
  else
    throw std::invalid_argument("unknown objective '" + a.objective + "'");
  config.grid = make_grid(a.quad, a.trunc, a.nodes, a.tol);
  config.seed = a.seed;
  config.multistart = a.multistart;
  config.optimizer_budget = a.budget;
  config.penalty_weight = a.penalty;
  if (!a.start_file.empty()) {
    const vs::ModelFile start = vs::read_model_file(a.start_file);
    if (start.kind != vs::to_string(config.model_kind))
      throw std::invalid_argument("--start model kind does not match --model");
    config.start_params = start.params;
  }

  fs::create_directories(a.out_dir);
  std::ofstream log(fs::path(a.out_dir) / "run.log");
  if (!log) throw std::invalid_argument("cannot write run.log in " + a.out_dir);
  log << "model=" << a.model << " objective=" << a.objective << " seed=" << a.seed
      << " multistart=" << a.multistart << " budget=" << a.budget << " band=[" << a.band_lo << ','
      << a.band_hi << "]"
      << " grid=" << a.quad << " A=" << a.trunc << " nodes=" << a.nodes << " tol=" << a.tol
      << '\n';
  for (const auto& w : warnings) log << "warning: " << w << '\n';

  const vs::CalibrationResult result =
      vs::calibrate(snap, config, [&](int start, std::int64_t evals, double f) {
        log << "start " << start << " evals " << evals << " objective "
            << vs::detail::format_double(f) << '\n';
      });
  for (const auto& w : result.warnings) {
    log << "warning: " << w << '\n';
    std::cerr << "warning: " << w << '\n';
  }
  log << "objective " << vs::detail::format_double(result.objective_value) << '\n';
  log << "evaluations " << result.evaluations << '\n';
  log << "converged " << (result.converged ? 1 : 0) << '\n';
  log << "pricing_failures " << result.pricing_failures << '\n';
  for (const auto& fit : result.per_contract)
    log << "contract " << fit.label << " quotes " << fit.n_quotes << " rmse_price "
        << vs::detail::format_double(fit.rmse_price) << " rmse_iv "
        << (std::isnan(fit.rmse_iv) ? std::string("-") : vs::detail::format_double(fit.rmse_iv))
        << '\n';

  vs::ModelFile model;
  model.kind = vs::to_string(result.model_kind);
  model.params = result.params;
  model.black_sigma = result.black_sigma;
  vs::write_model_file(model, (fs::path(a.out_dir) / "params.csv").string());
  vs::write_report_csv(vs::fit_report(result, snap, config),
                       (fs::path(a.out_dir) / "report.csv").string());
  std::cerr << "calibrated " << a.model << ": objective "
            << vs::detail::format_double(result.objective_value) << ", outputs in " << a.out_dir
            << '\n';
  return 0;
}

struct CheckNoaArgs {
  std::string futures_file, gamma2_file, date_text;
  double tol = 1e-9;
};

int cmd_check_noa(const CheckNoaArgs& a) {
  std::optional<std::chrono::sys_days> valuation;
  if (!a.date_text.empty()) valuation = vs::parse_iso_date(a.date_text);
  const vs::MarketSnapshot snap = vs::load_futures_only(a.futures_file, valuation);
  std::vector<vs::NoaViolation> violations = vs::noa_check(snap, a.tol);
  if (!a.gamma2_file.empty()) {
    const vs::detail::CsvFile file = vs::detail::read_csv(a.gamma2_file);
    if (file.header != std::vector<std::string>{"label", "gamma2"})
      throw std::invalid_argument(a.gamma2_file + ": expected header label,gamma2");
    std::map<std::string, double> gamma2;
    for (const auto& row : file.rows) {
      if (row.fields.size() != 2)
        throw std::invalid_argument(a.gamma2_file + ": line " + std::to_string(row.line) +
                                    ": expected 2 fields");
      gamma2[row.fields[0]] = vs::detail::parse_double(row.fields[1], "gamma2", row.line);
    }
    for (const auto& v : vs::noa_check_gamma2(gamma2, snap.decomp, a.tol)) violations.push_back(v);
  }
  std::cout << "composite,expected,observed\n";
  for (const auto& v : violations)
    std::cout << v.label << ',' << vs::detail::format_double(v.expected) << ','
              << vs::detail::format_double(v.observed) << '\n';
  return violations.empty() ? 0 : 1;
}

struct PlotdataArgs {
  std::vector<std::string> report_files;
  std::string kind, params_file, futures_file, date_text;
  std::string series = "model";
  int factor = 2;
};

int cmd_plotdata(const PlotdataArgs& a) {
  if (a.kind == "smile") {
    if (a.report_files.empty()) throw std::invalid_argument("kind smile needs --report");
    std::vector<vs::FitReport> reports;
    for (const auto& f : a.report_files) reports.push_back(vs::read_report_csv(f));
    vs::emit_smile(reports, std::cout);
  } else if (a.kind == "surface") {
    if (a.report_files.size() != 1)
      throw std::invalid_argument("kind surface needs exactly one --report");
    vs::emit_surface(vs::read_report_csv(a.report_files[0]), a.series, std::cout);
  } else if (a.kind == "density") {
    if (a.params_file.empty()) throw std::invalid_argument("kind density needs --params");
    const vs::ModelFile model = vs::read_model_file(a.params_file);
    if (model.kind != "one-factor" && model.kind != "two-factor")
      throw std::invalid_argument("kind density needs a factor-model parameter file");
    if (a.factor == 1 && model.kind != "two-factor")
      throw std::invalid_argument("factor 1 exists only in the two-factor model");
    vs::emit_density(a.factor == 1 ? model.params.factor1 : model.params.factor2, std::cout);
  } else if (a.kind == "gamma2") {
    if (a.params_file.empty() || a.futures_file.empty())
      throw std::invalid_argument("kind gamma2 needs --params and --futures");
    const vs::ModelFile model = vs::read_model_file(a.params_file);
    if (model.kind != "one-factor" && model.kind != "two-factor")
      throw std::invalid_argument("kind gamma2 needs a factor-model parameter file");
    std::optional<std::chrono::sys_days> valuation;
    if (!a.date_text.empty()) valuation = vs::parse_iso_date(a.date_text);
    const vs::MarketSnapshot snap = vs::load_futures_only(a.futures_file, valuation);
    std::vector<vs::DeliveryPeriod> periods;
    for (const auto& [label, entry] : snap.futures) periods.push_back(entry.period);
    vs::emit_gamma2(model.params, periods, snap.decomp, std::cout);
  } else {
    throw std::invalid_argument("unknown kind '" + a.kind +
                                "' (want smile, surface, density or gamma2)");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pricing and no-arbitrage calibration for power options on overlapping deliveries"};
  app.require_subcommand(1);

  PriceArgs price;
  CLI::App* p = app.add_subcommand("price", "price a strike list for one contract");
  p->add_option("--params", price.params_file, "parameter file")->required();
  p->add_option("--futures", price.futures_file, "futures CSV")->required();
  p->add_option("--contract", price.contract, "contract label")->required();
  p->add_option("--strikes", price.strikes_text, "comma list or lo:hi:step")->required();
  p->add_option("--mode", price.mode, "fourier | mc | black");
  p->add_option("--date", price.date_text, "valuation date (ISO)")->required();
  p->add_option("--exercise", price.exercise_text, "exercise date (ISO)")->required();
  p->add_option("--out", price.out_csv, "also write the table to this CSV");
  p->add_option("--pricing-mode", price.quad, "adaptive | euler");
  p->add_option("--trunc", price.trunc, "frequency truncation bound");
  p->add_option("--nodes", price.nodes, "euler node count");
  p->add_option("--tol", price.tol, "quadrature tolerance");
  p->add_option("--paths", price.mc_paths, "MC paths");
  p->add_option("--steps", price.mc_steps, "MC time steps");
  p->add_option("--seed", price.mc_seed, "MC seed");

  CalibrateArgs cal;
  CLI::App* c = app.add_subcommand("calibrate", "fit a model to an option snapshot");
  c->add_option("--futures", cal.futures_file, "futures CSV")->required();
  c->add_option("--options", cal.options_file, "options CSV")->required();
  c->add_option("--date", cal.date_text, "valuation date (ISO)")->required();
  c->add_option("--model", cal.model, "black | one-factor | two-factor");
  c->add_option("--objective", cal.objective, "price | iv");
  c->add_option("--seed", cal.seed, "RNG seed");
  c->add_option("--multistart", cal.multistart, "number of optimizer starts");
  c->add_option("--budget", cal.budget, "total objective evaluations");
  c->add_option("--out", cal.out_dir, "output directory")->required();
  c->add_option("--start", cal.start_file, "warm-start parameter file");
  c->add_option("--band-lo", cal.band_lo, "lower strike fraction");
  c->add_option("--band-hi", cal.band_hi, "upper strike fraction");
  c->add_option("--penalty", cal.penalty, "penalty per uninvertible quote (iv objective)");
  c->add_option("--pricing-mode", cal.quad, "adaptive | euler");
  c->add_option("--trunc", cal.trunc, "frequency truncation bound");
  c->add_option("--nodes", cal.nodes, "euler node count");
  c->add_option("--tol", cal.tol, "quadrature tolerance");

  CheckNoaArgs noa;
  CLI::App* n = app.add_subcommand("check-noa", "verify no-arbitrage identities");
  n->add_option("--futures", noa.futures_file, "futures CSV")->required();
  n->add_option("--gamma2", noa.gamma2_file, "optional gamma2 CSV (label,gamma2)");
  n->add_option("--tol", noa.tol, "tolerance");
  n->add_option("--date", noa.date_text, "valuation date (ISO, optional)");

  PlotdataArgs plot;
  CLI::App* d = app.add_subcommand("plotdata", "emit tidy CSV for external plotting");
  d->add_option("--report", plot.report_files, "fit report CSV (repeatable)");
  d->add_option("--kind", plot.kind, "smile | surface | density | gamma2")->required();
  d->add_option("--params", plot.params_file, "parameter file (density, gamma2)");
  d->add_option("--futures", plot.futures_file, "futures CSV (gamma2)");
  d->add_option("--series", plot.series, "model | market (surface)");
  d->add_option("--factor", plot.factor, "driving factor 1 or 2 (density)");
  d->add_option("--date", plot.date_text, "valuation date (ISO, optional)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(p)) return cmd_price(price);
    if (app.got_subcommand(c)) return cmd_calibrate(cal);
    if (app.got_subcommand(n)) return cmd_check_noa(noa);
    if (app.got_subcommand(d)) return cmd_plotdata(plot);
  } catch (const vs::QuadratureError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
