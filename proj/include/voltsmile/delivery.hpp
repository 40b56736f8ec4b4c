#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace voltsmile {

enum class PeriodKind { month, quarter, year };

/// A delivery window [start, end) in integer day offsets from the valuation
/// date, together with its market label ("Apr/18", "Q2/18", "Cal-19").
struct DeliveryPeriod {
  long start = 0;
  long end = 0;
  std::string label;
  PeriodKind kind = PeriodKind::month;

  long days() const { return end - start; }
  friend bool operator==(const DeliveryPeriod& a, const DeliveryPeriod& b) {
    return a.start == b.start && a.end == b.end && a.label == b.label && a.kind == b.kind;
  }
};

inline std::chrono::sys_days parse_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw std::invalid_argument("bad ISO date '" + s + "' (want YYYY-MM-DD)");
  const auto num = [&](int pos, int len) {
    int v = 0;
    for (int i = pos; i < pos + len; ++i) {
      if (s[i] < '0' || s[i] > '9') throw std::invalid_argument("bad ISO date '" + s + "'");
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  const std::chrono::year_month_day ymd{std::chrono::year{num(0, 4)},
                                        std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                        std::chrono::day{static_cast<unsigned>(num(8, 2))}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date '" + s + "'");
  return std::chrono::sys_days{ymd};
}

inline std::string format_iso_date(std::chrono::sys_days d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

namespace detail {

inline const std::map<std::string, unsigned>& month_names() {
  static const std::map<std::string, unsigned> names = {
      {"Jan", 1}, {"Feb", 2}, {"Mar", 3}, {"Apr", 4},  {"May", 5},  {"Jun", 6},
      {"Jul", 7}, {"Aug", 8}, {"Sep", 9}, {"Oct", 10}, {"Nov", 11}, {"Dec", 12}};
  return names;
}

inline int expand_two_digit_year(int yy) { return yy < 100 ? 2000 + yy : yy; }

}  // namespace detail

struct LabelSpan {
  std::chrono::sys_days start;
  std::chrono::sys_days end;  // exclusive
  PeriodKind kind;
};

/// Resolves a contract label to its calendar span. Recognized formats:
/// "Mon/YY" (month), "Qn/YY" (quarter), "Cal-YY" or "Cal-YYYY" (year).
inline LabelSpan parse_period_label(const std::string& label) {
  using namespace std::chrono;
  const auto fail = [&] { throw std::invalid_argument("unknown label format '" + label + "'"); };
  const auto to_int = [&](const std::string& s) {
    if (s.empty()) fail();
    for (char c : s)
      if (c < '0' || c > '9') fail();
    return std::stoi(s);
  };
  if (label.rfind("Cal-", 0) == 0) {
    const int y = detail::expand_two_digit_year(to_int(label.substr(4)));
    const year_month_day a{year{y}, month{1}, day{1}};
    const year_month_day b{year{y + 1}, month{1}, day{1}};
    return {sys_days{a}, sys_days{b}, PeriodKind::year};
  }
  const auto slash = label.find('/');
  if (slash == std::string::npos) fail();
  const std::string head = label.substr(0, slash);
  const int y = detail::expand_two_digit_year(to_int(label.substr(slash + 1)));
  if (head.size() == 2 && head[0] == 'Q' && head[1] >= '1' && head[1] <= '4') {
    const unsigned q = static_cast<unsigned>(head[1] - '0');
    const unsigned m0 = 3 * (q - 1) + 1;
    const year_month_day a{year{y}, month{m0}, day{1}};
    const year_month_day b = m0 + 3 > 12 ? year_month_day{year{y + 1}, month{1}, day{1}}
                                         : year_month_day{year{y}, month{m0 + 3}, day{1}};
    return {sys_days{a}, sys_days{b}, PeriodKind::quarter};
  }
  const auto it = detail::month_names().find(head);
  if (it == detail::month_names().end()) fail();
  const unsigned m = it->second;
  const year_month_day a{year{y}, month{m}, day{1}};
  const year_month_day b = m == 12 ? year_month_day{year{y + 1}, month{1}, day{1}}
                                   : year_month_day{year{y}, month{m + 1}, day{1}};
  return {sys_days{a}, sys_days{b}, PeriodKind::month};
}

/// Builds the period for a label, with day offsets relative to `valuation`.
inline DeliveryPeriod make_period(const std::string& label, std::chrono::sys_days valuation) {
  const LabelSpan span = parse_period_label(label);
  DeliveryPeriod p;
  p.start = (span.start - valuation).count();
  p.end = (span.end - valuation).count();
  p.label = label;
  p.kind = span.kind;
  return p;
}

/// Exact day-count fraction; weights of a composite sum to one by integer
/// arithmetic.
struct Fraction {
  long num = 0;
  long den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

struct AtomicDecomposition {
  /// Atomic periods, sorted by (start, end).
  std::vector<DeliveryPeriod> atoms;
  /// composite label -> [(atom label, day-count weight)], atoms in start order.
  std::map<std::string, std::vector<std::pair<std::string, Fraction>>> compositions;

  bool is_composite(const std::string& label) const { return compositions.count(label) != 0; }
  const DeliveryPeriod* find_atom(const std::string& label) const {
    for (const auto& a : atoms)
      if (a.label == label) return &a;
    return nullptr;
  }
};

/// Splits the listed periods into atomic ones and composites. A period is
/// composite exactly when its interval is tiled gap-free by other listed
/// periods; partial overlap does not count. Composite weights are expressed
/// against atoms (nested composites are expanded).
inline AtomicDecomposition atomic_decomposition(std::vector<DeliveryPeriod> periods) {
  std::sort(periods.begin(), periods.end(), [](const DeliveryPeriod& a, const DeliveryPeriod& b) {
    return std::tie(a.start, a.end, a.label) < std::tie(b.start, b.end, b.label);
  });
  for (std::size_t i = 1; i < periods.size(); ++i) {
    if (periods[i - 1].start == periods[i].start && periods[i - 1].end == periods[i].end)
      throw std::invalid_argument("duplicate delivery period [" + periods[i - 1].label + ", " +
                                  periods[i].label + "]");
  }

  // tile(P): pieces among the *other* periods exactly covering [start, end).
  // Depth-first with memoized dead ends; shortest candidate first, so the
  // result is canonical when several tilings exist.
  const auto tile = [&](const DeliveryPeriod& target) -> std::optional<std::vector<std::size_t>> {
    std::map<long, bool> feasible;
    std::map<long, std::size_t> choice;
    const auto solve = [&](auto&& self, long pos) -> bool {
      if (pos == target.end) return true;
      if (const auto it = feasible.find(pos); it != feasible.end()) return it->second;
      bool ok = false;
      for (std::size_t j = 0; j < periods.size() && !ok; ++j) {
        const DeliveryPeriod& c = periods[j];
        if (c.start == target.start && c.end == target.end) continue;
        if (c.start == pos && c.end <= target.end && self(self, c.end)) {
          choice[pos] = j;
          ok = true;
        }
      }
      feasible[pos] = ok;
      return ok;
    };
    if (!solve(solve, target.start)) return std::nullopt;
    std::vector<std::size_t> chosen;
    for (long pos = target.start; pos != target.end; pos = periods[choice[pos]].end)
      chosen.push_back(choice[pos]);
    return chosen;
  };

  AtomicDecomposition out;
  std::map<std::string, std::vector<std::size_t>> tilings;
  for (const auto& p : periods) {
    if (auto t = tile(p))
      tilings[p.label] = std::move(*t);
    else
      out.atoms.push_back(p);
  }
  for (const auto& [label, pieces] : tilings) {
    const DeliveryPeriod* comp = nullptr;
    for (const auto& p : periods)
      if (p.label == label) comp = &p;
    std::vector<std::pair<std::string, Fraction>> weights;
    // Expand pieces that are themselves composite down to atoms.
    std::vector<std::size_t> stack(pieces.rbegin(), pieces.rend());
    while (!stack.empty()) {
      const std::size_t j = stack.back();
      stack.pop_back();
      const auto nested = tilings.find(periods[j].label);
      if (nested == tilings.end()) {
        weights.emplace_back(periods[j].label, Fraction{periods[j].days(), comp->days()});
      } else {
        stack.insert(stack.end(), nested->second.rbegin(), nested->second.rend());
      }
    }
    // Order atoms by delivery start, not label text.
    std::sort(weights.begin(), weights.end(), [&](const auto& a, const auto& b) {
      const DeliveryPeriod* pa = nullptr;
      const DeliveryPeriod* pb = nullptr;
      for (const auto& p : periods) {
        if (p.label == a.first) pa = &p;
        if (p.label == b.first) pb = &p;
      }
      return pa->start < pb->start;
    });
    out.compositions[label] = std::move(weights);
  }
  return out;
}

}  // namespace voltsmile
