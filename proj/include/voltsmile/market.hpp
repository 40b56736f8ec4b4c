#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "voltsmile/delivery.hpp"
#include "voltsmile/detail/csv.hpp"
#include "voltsmile/forward_model.hpp"
#include "voltsmile/fourier.hpp"
#include "voltsmile/rng.hpp"

namespace voltsmile {

/// One call-option settlement observation.
struct OptionQuote {
  std::string underlying_label;
  long exercise_day = 0;  // day offset from the valuation date
  double strike = 0.0;
  double settlement_price = 0.0;
};

struct FuturesEntry {
  DeliveryPeriod period;
  double price = 0.0;
};

/// All quotes at one trading date plus the atomic decomposition of the
/// quoted delivery periods.
struct MarketSnapshot {
  std::chrono::sys_days valuation_date{};
  std::map<std::string, FuturesEntry> futures;
  std::vector<OptionQuote> options;
  AtomicDecomposition decomp;
};

namespace detail {

inline void rebuild_decomp(MarketSnapshot& snap) {
  std::vector<DeliveryPeriod> periods;
  periods.reserve(snap.futures.size());
  for (const auto& [label, entry] : snap.futures) periods.push_back(entry.period);
  snap.decomp = atomic_decomposition(periods);
}

}  // namespace detail

namespace detail {

struct RawFuture {
  std::string label;
  std::chrono::sys_days start{}, end{};
  PeriodKind kind = PeriodKind::month;
  double price = 0.0;
};

inline std::vector<RawFuture> parse_futures_csv(const std::string& futures_csv) {
  const CsvFile futs = read_csv(futures_csv);
  const std::vector<std::string> want = {"label", "delivery_start", "delivery_end", "price"};
  if (futs.header != want)
    throw std::invalid_argument(futures_csv +
                                ": expected header label,delivery_start,delivery_end,price");
  std::vector<RawFuture> out;
  std::set<std::string> seen;
  for (const auto& row : futs.rows) {
    if (row.fields.size() != 4)
      throw std::invalid_argument(futures_csv + ": line " + std::to_string(row.line) +
                                  ": expected 4 fields");
    RawFuture f;
    f.label = row.fields[0];
    const LabelSpan span = parse_period_label(f.label);  // rejects unknown label formats
    f.start = parse_iso_date(row.fields[1]);
    f.end = parse_iso_date(row.fields[2]);
    f.kind = span.kind;
    if (f.start != span.start || f.end != span.end)
      throw std::invalid_argument(futures_csv + ": line " + std::to_string(row.line) +
                                  ": delivery dates do not match label '" + f.label + "'");
    f.price = parse_double(row.fields[3], "price", row.line);
    if (!(f.price > 0.0))
      throw std::invalid_argument(futures_csv + ": line " + std::to_string(row.line) +
                                  ": price must be > 0");
    if (!seen.insert(f.label).second)
      throw std::invalid_argument(futures_csv + ": line " + std::to_string(row.line) +
                                  ": duplicate contract '" + f.label + "'");
    out.push_back(f);
  }
  return out;
}

}  // namespace detail

/// Loads futures.csv alone. Without a valuation date the earliest delivery
/// start serves as the day-offset reference (the no-arbitrage checks only
/// need day counts, not an anchor).
inline MarketSnapshot load_futures_only(const std::string& futures_csv,
                                        std::optional<std::chrono::sys_days> valuation_date = {}) {
  const std::vector<detail::RawFuture> raw = detail::parse_futures_csv(futures_csv);
  if (raw.empty()) throw std::invalid_argument(futures_csv + ": no contracts");
  MarketSnapshot snap;
  if (valuation_date) {
    snap.valuation_date = *valuation_date;
  } else {
    snap.valuation_date = raw.front().start;
    for (const auto& f : raw) snap.valuation_date = std::min(snap.valuation_date, f.start);
  }
  for (const auto& f : raw) {
    DeliveryPeriod period;
    period.start = (f.start - snap.valuation_date).count();
    period.end = (f.end - snap.valuation_date).count();
    period.label = f.label;
    period.kind = f.kind;
    snap.futures[f.label] = {period, f.price};
  }
  detail::rebuild_decomp(snap);
  return snap;
}

/// Loads futures.csv (label,delivery_start,delivery_end,price) and
/// options.csv (underlying_label,exercise_date,strike,settlement_price).
/// Dates are ISO-8601; malformed rows are reported with their line number.
inline MarketSnapshot load_snapshot(const std::string& futures_csv, const std::string& options_csv,
                                    std::chrono::sys_days valuation_date) {
  MarketSnapshot snap = load_futures_only(futures_csv, valuation_date);

  const detail::CsvFile opts = detail::read_csv(options_csv);
  const std::vector<std::string> want_o = {"underlying_label", "exercise_date", "strike",
                                           "settlement_price"};
  if (opts.header != want_o)
    throw std::invalid_argument(options_csv +
                                ": expected header underlying_label,exercise_date,strike,settlement_price");
  std::set<std::pair<std::string, double>> seen;
  for (const auto& row : opts.rows) {
    if (row.fields.size() != 4)
      throw std::invalid_argument(options_csv + ": line " + std::to_string(row.line) +
                                  ": expected 4 fields");
    OptionQuote q;
    q.underlying_label = row.fields[0];
    const auto underlying = snap.futures.find(q.underlying_label);
    if (underlying == snap.futures.end())
      throw std::invalid_argument(options_csv + ": line " + std::to_string(row.line) +
                                  ": unknown underlying '" + q.underlying_label + "'");
    q.exercise_day = (parse_iso_date(row.fields[1]) - valuation_date).count();
    q.strike = detail::parse_double(row.fields[2], "strike", row.line);
    q.settlement_price = detail::parse_double(row.fields[3], "settlement_price", row.line);
    if (!(q.strike > 0.0))
      throw std::invalid_argument(options_csv + ": line " + std::to_string(row.line) +
                                  ": strike must be > 0");
    if (!(q.settlement_price >= 0.0))
      throw std::invalid_argument(options_csv + ": line " + std::to_string(row.line) +
                                  ": settlement_price must be >= 0");
    if (q.exercise_day > underlying->second.period.start)
      throw std::invalid_argument(options_csv + ": line " + std::to_string(row.line) +
                                  ": exercise after delivery start of '" + q.underlying_label + "'");
    if (!seen.insert({q.underlying_label, q.strike}).second)
      throw std::invalid_argument(options_csv + ": line " + std::to_string(row.line) +
                                  ": duplicate quote (" + q.underlying_label + ", " +
                                  row.fields[2] + ")");
    snap.options.push_back(q);
  }
  return snap;
}

/// Writes the two CSVs back; load(save(snap)) reproduces snap field-exactly.
inline void save_snapshot(const MarketSnapshot& snap, const std::string& futures_csv,
                          const std::string& options_csv) {
  {
    std::ofstream out(futures_csv);
    if (!out) throw std::invalid_argument("cannot write " + futures_csv);
    out << "label,delivery_start,delivery_end,price\n";
    for (const auto& [label, entry] : snap.futures) {
      out << label << ','
          << format_iso_date(snap.valuation_date + std::chrono::days{entry.period.start}) << ','
          << format_iso_date(snap.valuation_date + std::chrono::days{entry.period.end}) << ','
          << detail::format_double(entry.price) << '\n';
    }
  }
  std::ofstream out(options_csv);
  if (!out) throw std::invalid_argument("cannot write " + options_csv);
  out << "underlying_label,exercise_date,strike,settlement_price\n";
  for (const auto& q : snap.options) {
    out << q.underlying_label << ','
        << format_iso_date(snap.valuation_date + std::chrono::days{q.exercise_day}) << ','
        << detail::format_double(q.strike) << ',' << detail::format_double(q.settlement_price)
        << '\n';
  }
}

/// Keeps quotes with lo_frac*F <= K <= hi_frac*F. Contracts whose quotes all
/// fall outside the band lose them all; a note per such contract is appended
/// to `warnings` when given.
inline MarketSnapshot filter_strikes(const MarketSnapshot& snap, double lo_frac = 0.90,
                                     double hi_frac = 1.10,
                                     std::vector<std::string>* warnings = nullptr) {
  if (!(lo_frac > 0.0) || !(lo_frac < hi_frac))
    throw std::invalid_argument("filter_strikes: need 0 < lo_frac < hi_frac");
  MarketSnapshot out = snap;
  out.options.clear();
  std::set<std::string> had, kept;
  for (const auto& q : snap.options) {
    had.insert(q.underlying_label);
    const double f = snap.futures.at(q.underlying_label).price;
    if (q.strike >= lo_frac * f && q.strike <= hi_frac * f) {
      out.options.push_back(q);
      kept.insert(q.underlying_label);
    }
  }
  if (warnings) {
    for (const auto& label : had)
      if (!kept.count(label))
        warnings->push_back("all strikes of '" + label + "' fall outside the band; contract dropped");
  }
  return out;
}

/// Checks the composite futures prices against the day-count weighted average
/// of their parts.
inline std::vector<NoaViolation> noa_check(const MarketSnapshot& snap, double tol) {
  std::vector<NoaViolation> out;
  for (const auto& [label, weights] : snap.decomp.compositions) {
    double expected = 0.0;
    for (const auto& [atom, w] : weights) expected += w.value() * snap.futures.at(atom).price;
    const double observed = snap.futures.at(label).price;
    if (std::abs(expected - observed) > tol) out.push_back({label, expected, observed});
  }
  return out;
}

/// One contract of a synthetic market: label, futures price (composites are
/// overridden by the no-arbitrage average), exercise day and strike list.
struct SyntheticContract {
  std::string label;
  double futures_price = 0.0;
  long exercise_day = 0;
  std::vector<double> strikes;
};

struct SyntheticSpec {
  std::chrono::sys_days valuation_date{};
  std::vector<SyntheticContract> contracts;
  double noise_stddev = 0.0;  // optional Gaussian noise on settlement prices
  std::uint64_t noise_seed = 0;
};

/// Builds a snapshot whose settlement prices are model prices (plus optional
/// seeded noise). Composite futures prices are replaced by the weighted
/// average of their parts so the no-arbitrage identities hold exactly.
inline MarketSnapshot synthetic_market(const TwoFactorParams& params, const SyntheticSpec& spec,
                                       const PricingGrid& grid) {
  validate(params);
  MarketSnapshot snap;
  snap.valuation_date = spec.valuation_date;
  for (const auto& c : spec.contracts) {
    if (snap.futures.count(c.label))
      throw std::invalid_argument("synthetic_market: duplicate contract '" + c.label + "'");
    DeliveryPeriod period = make_period(c.label, spec.valuation_date);
    if (!(c.futures_price > 0.0))
      throw std::invalid_argument("synthetic_market: futures price must be > 0 for '" + c.label +
                                  "'");
    snap.futures[c.label] = {period, c.futures_price};
  }
  detail::rebuild_decomp(snap);
  for (const auto& [label, weights] : snap.decomp.compositions) {
    double avg = 0.0;
    for (const auto& [atom, w] : weights) avg += w.value() * snap.futures.at(atom).price;
    snap.futures[label].price = avg;
  }

  Rng noise(Rng::mix(spec.noise_seed, 0));
  for (const auto& c : spec.contracts) {
    if (c.strikes.empty()) continue;
    const FuturesEntry& entry = snap.futures.at(c.label);
    if (c.exercise_day > entry.period.start)
      throw std::invalid_argument("synthetic_market: exercise after delivery start of '" +
                                  c.label + "'");
    const TwoFactorCf cf(params, 0.0, static_cast<double>(c.exercise_day), entry.period,
                         snap.decomp);
    const std::vector<double> prices = price_strikes(c.strikes, entry.price, cf, grid);
    for (std::size_t u = 0; u < c.strikes.size(); ++u) {
      OptionQuote q;
      q.underlying_label = c.label;
      q.exercise_day = c.exercise_day;
      q.strike = c.strikes[u];
      q.settlement_price = prices[u];
      if (spec.noise_stddev > 0.0)
        q.settlement_price = std::max(0.0, q.settlement_price + spec.noise_stddev * noise.normal());
      snap.options.push_back(q);
    }
  }
  return snap;
}

}  // namespace voltsmile
