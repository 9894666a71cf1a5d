#pragma once

// Historical performance matrix (AUROC of each detector on each ID/OOD
// dataset pair), the model catalog, and train/test splits.

#include <cmath>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaood/csv.hpp"
#include "metaood/error.hpp"
#include "metaood/rank.hpp"

namespace metaood {

struct ModelInfo {
  std::string name;
  std::string description;
};

/// Ordered candidate detectors. The order is the column order of the
/// performance matrix, the one-hot index, and the tie-break order.
class ModelCatalog {
 public:
  ModelCatalog() = default;

  explicit ModelCatalog(std::vector<ModelInfo> models) : models_(std::move(models)) {
    for (std::size_t j = 0; j < models_.size(); ++j) {
      if (models_[j].name.empty()) throw ValidationError("model catalog: empty model name");
      if (!index_.emplace(models_[j].name, j).second)
        throw ValidationError("model catalog: duplicate model name '" + models_[j].name + "'");
    }
  }

  static ModelCatalog from_names(const std::vector<std::string>& names) {
    std::vector<ModelInfo> models;
    for (const auto& n : names) models.push_back({n, ""});
    return ModelCatalog(std::move(models));
  }

  std::size_t size() const { return models_.size(); }
  bool empty() const { return models_.empty(); }
  const ModelInfo& operator[](std::size_t j) const { return models_.at(j); }
  const std::string& name(std::size_t j) const { return models_.at(j).name; }

  std::optional<std::size_t> find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(std::string_view name) const {
    if (auto j = find(name)) return *j;
    throw ValidationError("unknown model '" + std::string(name) + "'");
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& m : models_) out.push_back(m.name);
    return out;
  }

  bool same_names(const ModelCatalog& other) const { return names() == other.names(); }

 private:
  std::vector<ModelInfo> models_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Reads `{"models": [{"name": ..., "description": ...}, ...]}`.
inline ModelCatalog load_catalog(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(csv::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (!doc.contains("models") || !doc["models"].is_array())
    throw ValidationError(path.string() + ": missing 'models' array");
  std::vector<ModelInfo> models;
  for (const auto& m : doc["models"]) {
    if (!m.contains("name") || !m["name"].is_string())
      throw ValidationError(path.string() + ": model entry without a name");
    models.push_back({m["name"].get<std::string>(), m.value("description", std::string{})});
  }
  return ModelCatalog(std::move(models));
}

struct DatasetPairId {
  std::string id_dataset;
  std::string ood_dataset;

  auto operator<=>(const DatasetPairId&) const = default;

  std::string str() const { return id_dataset + "->" + ood_dataset; }
};

inline void to_json(nlohmann::json& j, const DatasetPairId& p) {
  j = nlohmann::json{{"id", p.id_dataset}, {"ood", p.ood_dataset}};
}

inline void from_json(const nlohmann::json& j, DatasetPairId& p) {
  if (!j.is_object() || !j.contains("id") || !j.contains("ood"))
    throw ValidationError("pair must be an object with 'id' and 'ood': " + j.dump());
  p.id_dataset = j.at("id").get<std::string>();
  p.ood_dataset = j.at("ood").get<std::string>();
}

/// AUROC percentages, rows = dataset pairs, columns = catalog models.
/// MISSING cells are stored as NaN and surfaced as std::nullopt.
class PerformanceMatrix {
 public:
  PerformanceMatrix() = default;

  PerformanceMatrix(std::vector<DatasetPairId> pairs, ModelCatalog catalog, std::vector<double> values)
      : pairs_(std::move(pairs)), catalog_(std::move(catalog)), values_(std::move(values)) {
    if (values_.size() != pairs_.size() * catalog_.size())
      throw ValidationError("performance matrix: value count does not match rows x columns");
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const auto& p = pairs_[i];
      if (p.id_dataset.empty() || p.ood_dataset.empty())
        throw ValidationError("performance matrix: row " + std::to_string(i) + " has an empty dataset name");
      if (p.id_dataset == p.ood_dataset)
        throw ValidationError("performance matrix: row " + p.str() + " pairs a dataset with itself");
      if (!row_index_.emplace(p, i).second)
        throw ValidationError("performance matrix: duplicate pair row " + p.str());
      id_datasets_.insert(p.id_dataset);
      ood_datasets_.insert(p.ood_dataset);
      for (std::size_t j = 0; j < catalog_.size(); ++j) {
        const double v = values_[i * catalog_.size() + j];
        if (std::isnan(v)) continue;
        if (!(v >= 0.0 && v <= 100.0))
          throw ValidationError("performance matrix: value " + csv::format_double(v) + " at " + p.str() + "/" +
                                catalog_.name(j) + " outside [0,100]");
      }
    }
  }

  std::size_t rows() const { return pairs_.size(); }
  std::size_t cols() const { return catalog_.size(); }
  const ModelCatalog& catalog() const { return catalog_; }
  const std::vector<DatasetPairId>& pairs() const { return pairs_; }
  const DatasetPairId& pair(std::size_t i) const { return pairs_.at(i); }

  std::optional<std::size_t> find_row(const DatasetPairId& p) const {
    const auto it = row_index_.find(p);
    if (it == row_index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t row_of(const DatasetPairId& p) const {
    if (auto i = find_row(p)) return *i;
    throw ValidationError("unknown dataset pair " + p.str());
  }

  /// Raw row with NaN for MISSING.
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * cols(), cols());
  }

  std::optional<double> value(std::size_t i, std::size_t j) const {
    const double v = values_.at(i * cols() + j);
    if (std::isnan(v)) return std::nullopt;
    return v;
  }

  /// Cell lookup by names. A pair whose ID dataset equals its OOD dataset is
  /// the N/A diagonal of the benchmark and reads as MISSING.
  std::optional<double> lookup(const std::string& id, const std::string& ood, const std::string& model) const {
    const std::size_t j = catalog_.index_of(model);
    if (id == ood) {
      if (id_datasets_.count(id) && ood_datasets_.count(ood)) return std::nullopt;
      throw ValidationError("unknown dataset pair " + id + "->" + ood);
    }
    return value(row_of({id, ood}), j);
  }

  std::size_t non_missing_count() const {
    std::size_t n = 0;
    for (double v : values_) n += std::isnan(v) ? 0 : 1;
    return n;
  }

  const std::set<std::string>& id_datasets() const { return id_datasets_; }
  const std::set<std::string>& ood_datasets() const { return ood_datasets_; }

  /// Sub-matrix with the given rows, in the given order.
  PerformanceMatrix select_rows(const std::vector<DatasetPairId>& subset) const {
    std::vector<double> vals;
    vals.reserve(subset.size() * cols());
    for (const auto& p : subset) {
      const auto r = row(row_of(p));
      vals.insert(vals.end(), r.begin(), r.end());
    }
    return PerformanceMatrix(subset, catalog_, std::move(vals));
  }

  bool operator==(const PerformanceMatrix& o) const {
    if (pairs_ != o.pairs_ || !catalog_.same_names(o.catalog_) || values_.size() != o.values_.size()) return false;
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const bool a = std::isnan(values_[k]), b = std::isnan(o.values_[k]);
      if (a != b || (!a && values_[k] != o.values_[k])) return false;
    }
    return true;
  }

 private:
  std::vector<DatasetPairId> pairs_;
  ModelCatalog catalog_;
  std::vector<double> values_;
  std::map<DatasetPairId, std::size_t> row_index_;
  std::set<std::string> id_datasets_;
  std::set<std::string> ood_datasets_;
};

/// Parses the performance CSV: header `id_dataset,ood_dataset,<model>...`,
/// one row per pair, empty cell = MISSING.
inline PerformanceMatrix parse_performance_matrix(const csv::Table& t, const std::string& source) {
  if (t.header.size() < 3 || t.header[0] != "id_dataset" || t.header[1] != "ood_dataset")
    throw ValidationError(source + ": header must start with id_dataset,ood_dataset and name at least one model");
  const auto catalog = ModelCatalog::from_names({t.header.begin() + 2, t.header.end()});
  std::vector<DatasetPairId> pairs;
  std::vector<double> values;
  std::set<DatasetPairId> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = source + ":" + std::to_string(t.line_numbers[r]);
    DatasetPairId p{row[0], row[1]};
    if (!seen.insert(p).second) throw ValidationError(where + ": duplicate pair row " + p.str());
    for (std::size_t c = 2; c < row.size(); ++c) {
      if (row[c].empty()) {
        values.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      const auto v = csv::parse_double(row[c]);
      if (!v || !std::isfinite(*v))
        throw ValidationError(where + ", column " + t.header[c] + ": not a number '" + row[c] + "'");
      if (*v < 0.0 || *v > 100.0)
        throw ValidationError(where + ", column " + t.header[c] + ": value " + row[c] + " outside [0,100]");
      values.push_back(*v);
    }
    pairs.push_back(std::move(p));
  }
  try {
    return PerformanceMatrix(std::move(pairs), catalog, std::move(values));
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

inline PerformanceMatrix load_performance_matrix(const std::filesystem::path& path) {
  return parse_performance_matrix(csv::read_file(path), path.string());
}

inline std::string performance_matrix_csv(const PerformanceMatrix& m) {
  std::vector<std::string> header{"id_dataset", "ood_dataset"};
  for (const auto& n : m.catalog().names()) header.push_back(n);
  std::string out = csv::join(header) + "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::vector<std::string> f{m.pair(i).id_dataset, m.pair(i).ood_dataset};
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const auto v = m.value(i, j);
      f.push_back(v ? csv::format_double(*v) : std::string{});
    }
    out += csv::join(f) + "\n";
  }
  return out;
}

inline void save_performance_matrix(const PerformanceMatrix& m, const std::filesystem::path& path) {
  csv::write_text(path, performance_matrix_csv(m));
}

struct SplitSpec {
  std::vector<DatasetPairId> train;
  std::vector<DatasetPairId> test;
};

inline SplitSpec validate_split(SplitSpec split, const PerformanceMatrix& matrix, const std::string& source) {
  if (split.train.empty()) throw ValidationError(source + ": train list is empty");
  if (split.test.empty()) throw ValidationError(source + ": test list is empty");
  std::set<DatasetPairId> train_set;
  for (const auto& p : split.train) {
    if (!matrix.find_row(p)) throw ValidationError(source + ": unknown train pair " + p.str());
    if (!train_set.insert(p).second) throw ValidationError(source + ": duplicate train pair " + p.str());
  }
  std::set<DatasetPairId> test_set;
  for (const auto& p : split.test) {
    if (!matrix.find_row(p)) throw ValidationError(source + ": unknown test pair " + p.str());
    if (train_set.count(p)) throw ValidationError(source + ": pair " + p.str() + " is in both train and test");
    if (!test_set.insert(p).second) throw ValidationError(source + ": duplicate test pair " + p.str());
  }
  return split;
}

/// Reads `{"train": [{"id":..,"ood":..}, ...], "test": [...]}`.
inline SplitSpec parse_split(const nlohmann::json& doc, const PerformanceMatrix& matrix, const std::string& source) {
  if (!doc.is_object() || !doc.contains("train") || !doc.contains("test"))
    throw ValidationError(source + ": split needs 'train' and 'test' lists");
  SplitSpec s;
  try {
    s.train = doc.at("train").get<std::vector<DatasetPairId>>();
    s.test = doc.at("test").get<std::vector<DatasetPairId>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return validate_split(std::move(s), matrix, source);
}

inline SplitSpec load_split(const std::filesystem::path& path, const PerformanceMatrix& matrix) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(csv::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_split(doc, matrix, path.string());
}

/// Descending-AUROC midranks of one row; MISSING cells yield nullopt and
/// take no part in the ranking.
inline std::vector<std::optional<double>> rank_row(const PerformanceMatrix& matrix, std::size_t row) {
  const auto values = matrix.row(row);
  std::vector<double> present;
  std::vector<std::size_t> where;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (std::isnan(values[j])) continue;
    present.push_back(values[j]);
    where.push_back(j);
  }
  if (present.size() < 2)
    throw ValidationError("rank_row: pair " + matrix.pair(row).str() + " has fewer than 2 non-missing values");
  const auto r = midranks(present, RankOrder::descending);
  std::vector<std::optional<double>> out(values.size());
  for (std::size_t k = 0; k < where.size(); ++k) out[where[k]] = r[k];
  return out;
}

inline std::vector<std::optional<double>> rank_row(const PerformanceMatrix& matrix, const DatasetPairId& pair) {
  return rank_row(matrix, matrix.row_of(pair));
}

/// Index of the highest non-missing value in a row; ties go to the lowest index.
inline std::optional<std::size_t> best_in_row(std::span<const double> row) {
  std::optional<std::size_t> best;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (std::isnan(row[j])) continue;
    if (!best || row[j] > row[*best]) best = j;
  }
  return best;
}

}  // namespace metaood
