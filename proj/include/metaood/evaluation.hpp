#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaood/csv.hpp"
#include "metaood/error.hpp"
#include "metaood/perf_store.hpp"
#include "metaood/selectors.hpp"
#include "metaood/stat_features.hpp"
#include "metaood/wilcoxon.hpp"

namespace metaood {

enum class RecordFlag { ok, missing, abstain };

inline std::string to_string(RecordFlag f) {
  switch (f) {
    case RecordFlag::ok: return "ok";
    case RecordFlag::missing: return "missing";
    case RecordFlag::abstain: return "abstain";
  }
  return "ok";
}

inline RecordFlag parse_record_flag(const std::string& s) {
  if (s == "ok") return RecordFlag::ok;
  if (s == "missing") return RecordFlag::missing;
  if (s == "abstain") return RecordFlag::abstain;
  throw ValidationError("unknown record flag '" + s + "'");
}

/// Outcome of one selector on one test pair.
/// A chosen model that is MISSING on the row ranks behind every present
/// model (k + 1 for k present models); an abstention ranks last (k).
struct SelectionRecord {
  DatasetPairId pair;
  std::string selector;
  std::optional<std::string> model;
  double auroc = std::numeric_limits<double>::quiet_NaN();
  double rank = 0.0;
  RecordFlag flag = RecordFlag::ok;

  bool operator==(const SelectionRecord& o) const {
    const bool same_auroc = (std::isnan(auroc) && std::isnan(o.auroc)) || auroc == o.auroc;
    return pair == o.pair && selector == o.selector && model == o.model && same_auroc && rank == o.rank &&
           flag == o.flag;
  }
};

struct SelectorReport {
  std::string selector;
  std::vector<SelectionRecord> records;

  std::vector<double> ranks() const {
    std::vector<double> r;
    for (const auto& rec : records) r.push_back(rec.rank);
    return r;
  }
  double mean_rank() const {
    if (records.empty()) throw ValidationError("selector " + selector + " has no records");
    double s = 0.0;
    for (const auto& rec : records) s += rec.rank;
    return s / static_cast<double>(records.size());
  }
  std::vector<DatasetPairId> pairs() const {
    std::vector<DatasetPairId> p;
    for (const auto& rec : records) p.push_back(rec.pair);
    return p;
  }
};

inline SelectionRecord score_choice(const PerformanceMatrix& matrix, const DatasetPairId& pair,
                                    const std::string& selector, std::optional<std::size_t> choice) {
  const auto row = matrix.row_of(pair);
  const auto ranks = rank_row(matrix, row);
  const auto present = static_cast<double>(std::count_if(ranks.begin(), ranks.end(), [](auto& r) { return r.has_value(); }));
  SelectionRecord rec;
  rec.pair = pair;
  rec.selector = selector;
  if (!choice) {
    rec.flag = RecordFlag::abstain;
    rec.rank = present;
    return rec;
  }
  if (*choice >= matrix.cols())
    throw ValidationError("selector " + selector + " chose index " + std::to_string(*choice) + " outside the catalog");
  rec.model = matrix.catalog().name(*choice);
  if (!ranks[*choice]) {
    rec.flag = RecordFlag::missing;
    rec.rank = present + 1.0;
    return rec;
  }
  rec.auroc = matrix.row(row)[*choice];
  rec.rank = *ranks[*choice];
  return rec;
}

inline SelectorReport evaluate_selector(const Selector& selector, const PerformanceMatrix& matrix,
                                        std::span<const DatasetPairId> test_pairs) {
  SelectorReport rep{selector.name(), {}};
  for (const auto& p : test_pairs) {
    if (!matrix.find_row(p)) throw ValidationError("test pair " + p.str() + " is not in the performance matrix");
    rep.records.push_back(score_choice(matrix, p, selector.name(), selector.select(p)));
  }
  return rep;
}

struct RankEntry {
  std::string selector;
  double mean_rank = 0.0;
};

/// Ascending mean rank, ties broken by selector name.
inline std::vector<RankEntry> average_rank_table(const std::vector<SelectorReport>& reports) {
  std::vector<RankEntry> out;
  for (const auto& r : reports) {
    if (r.pairs() != reports.front().pairs())
      throw ValidationError("selector " + r.selector + " was evaluated on a different test split than " +
                            reports.front().selector);
    out.push_back({r.selector, r.mean_rank()});
  }
  std::stable_sort(out.begin(), out.end(), [](const RankEntry& a, const RankEntry& b) {
    if (a.mean_rank != b.mean_rank) return a.mean_rank < b.mean_rank;
    return a.selector < b.selector;
  });
  return out;
}

struct PairwiseTest {
  std::string a;
  std::string b;
  WilcoxonResult result;
};

/// Wilcoxon test of A's chosen AUROC against B's over the shared test pairs.
/// Pairs where either side has no AUROC are left out.
inline PairwiseTest compare_selectors(const SelectorReport& a, const SelectorReport& b, Alternative alt) {
  if (a.pairs() != b.pairs())
    throw ValidationError("cannot compare " + a.selector + " and " + b.selector + ": different test splits");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    if (std::isnan(a.records[i].auroc) || std::isnan(b.records[i].auroc)) continue;
    x.push_back(a.records[i].auroc);
    y.push_back(b.records[i].auroc);
  }
  PairwiseTest t{a.selector, b.selector, {}};
  if (x.empty()) {
    t.result.all_zero = true;
    t.result.alternative = alt;
    return t;
  }
  t.result = wilcoxon_signed_rank(x, y, alt);
  return t;
}

struct SelectionReport {
  std::vector<SelectorReport> selectors;
  std::vector<PairwiseTest> tests;
  std::map<std::string, double> timing_seconds;  // empty unless timing was requested

  const SelectorReport& find(const std::string& name) const {
    for (const auto& s : selectors)
      if (s.selector == name) return s;
    throw ValidationError("no report for selector '" + name + "'");
  }
};

/// Every ordered pair of distinct selectors, in report order.
inline std::vector<PairwiseTest> all_pairwise_tests(const std::vector<SelectorReport>& reports, Alternative alt) {
  std::vector<PairwiseTest> out;
  for (std::size_t i = 0; i < reports.size(); ++i)
    for (std::size_t j = 0; j < reports.size(); ++j)
      if (i != j) out.push_back(compare_selectors(reports[i], reports[j], alt));
  return out;
}

inline const std::vector<std::string>& records_header() {
  static const std::vector<std::string> h{"selector", "id_dataset", "ood_dataset", "model", "auroc", "rank", "flag"};
  return h;
}

inline std::string records_csv(const std::vector<SelectorReport>& reports) {
  std::string out = csv::join(records_header()) + "\n";
  for (const auto& r : reports)
    for (const auto& rec : r.records)
      out += csv::join({rec.selector, rec.pair.id_dataset, rec.pair.ood_dataset, rec.model.value_or(""),
                        std::isnan(rec.auroc) ? "" : csv::format_double(rec.auroc), csv::format_double(rec.rank),
                        to_string(rec.flag)}) +
             "\n";
  return out;
}

/// Parses records.csv back into per-selector reports, keeping file order.
inline std::vector<SelectorReport> parse_records_csv(const csv::Table& t, const std::string& source) {
  if (t.header != records_header()) throw ValidationError(source + ": unexpected records header");
  std::vector<SelectorReport> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    const auto where = source + ":" + std::to_string(t.line_numbers[i]);
    SelectionRecord rec;
    rec.selector = f[0];
    rec.pair = {f[1], f[2]};
    if (!f[3].empty()) rec.model = f[3];
    if (!f[4].empty()) {
      const auto v = csv::parse_double(f[4]);
      if (!v) throw ValidationError(where + ": bad auroc '" + f[4] + "'");
      rec.auroc = *v;
    }
    const auto rank = csv::parse_double(f[5]);
    if (!rank) throw ValidationError(where + ": bad rank '" + f[5] + "'");
    rec.rank = *rank;
    rec.flag = parse_record_flag(f[6]);
    if (out.empty() || out.back().selector != rec.selector) out.push_back({rec.selector, {}});
    out.back().records.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<SelectorReport> load_records_csv(const std::filesystem::path& path) {
  return parse_records_csv(csv::read_file(path), path.string());
}

struct BoxplotRow {
  std::string selector;
  double min, q25, median, q75, max, mean;
};

inline BoxplotRow boxplot_row(const SelectorReport& r) {
  auto ranks = r.ranks();
  std::sort(ranks.begin(), ranks.end());
  return {r.selector, ranks.front(), percentile_sorted(ranks, 0.25), percentile_sorted(ranks, 0.5),
          percentile_sorted(ranks, 0.75), ranks.back(), r.mean_rank()};
}

inline std::string boxplot_csv(const std::vector<SelectorReport>& reports) {
  std::string out = "selector,min,q25,median,q75,max,mean\n";
  for (const auto& r : reports) {
    const auto b = boxplot_row(r);
    out += csv::join({b.selector, csv::format_double(b.min), csv::format_double(b.q25), csv::format_double(b.median),
                      csv::format_double(b.q75), csv::format_double(b.max), csv::format_double(b.mean)}) +
           "\n";
  }
  return out;
}

inline std::string average_rank_csv(const std::vector<RankEntry>& table) {
  std::string out = "position,selector,mean_rank\n";
  for (std::size_t i = 0; i < table.size(); ++i)
    out += csv::join({std::to_string(i + 1), table[i].selector, csv::format_double(table[i].mean_rank)}) + "\n";
  return out;
}

inline nlohmann::json to_json(const PairwiseTest& t) {
  return {{"a", t.a},
          {"b", t.b},
          {"statistic", t.result.statistic},
          {"p_value", t.result.p_value},
          {"n_effective", t.result.n_effective},
          {"exact", t.result.exact},
          {"all_zero", t.result.all_zero},
          {"alternative", to_string(t.result.alternative)}};
}

/// Writes records.csv, boxplot.csv, average_rank.csv, wilcoxon.json and,
/// when timings are present, timing.json into `dir`.
inline void emit_report(const SelectionReport& report, const std::filesystem::path& dir) {
  csv::write_text(dir / "records.csv", records_csv(report.selectors));
  csv::write_text(dir / "boxplot.csv", boxplot_csv(report.selectors));
  csv::write_text(dir / "average_rank.csv", average_rank_csv(average_rank_table(report.selectors)));
  auto tests = nlohmann::json::array();
  for (const auto& t : report.tests) tests.push_back(to_json(t));
  csv::write_text(dir / "wilcoxon.json", tests.dump(2) + "\n");
  if (!report.timing_seconds.empty()) {
    nlohmann::json timing = report.timing_seconds;
    csv::write_text(dir / "timing.json", timing.dump(2) + "\n");
  }
}

}  // namespace metaood
