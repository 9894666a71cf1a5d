#pragma once

// Precomputed language-model embeddings of datasets and detectors, and the
// one-hot detector encoding.

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaood/csv.hpp"
#include "metaood/error.hpp"
#include "metaood/perf_store.hpp"

namespace metaood {

class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  EmbeddingTable(std::size_t dim, std::string provenance, std::map<std::string, std::vector<double>> entries)
      : dim_(dim), provenance_(std::move(provenance)), entries_(std::move(entries)) {
    if (dim_ == 0) throw ValidationError("embedding table: dim must be positive");
    for (const auto& [name, v] : entries_) {
      if (name.empty()) throw ValidationError("embedding table: empty entry name");
      if (v.size() != dim_)
        throw ValidationError("embedding table: entry '" + name + "' has dimension " + std::to_string(v.size()) +
                              ", expected " + std::to_string(dim_));
      for (double x : v)
        if (!std::isfinite(x)) throw ValidationError("embedding table: entry '" + name + "' has a non-finite value");
    }
  }

  std::size_t dim() const { return dim_; }
  const std::string& provenance() const { return provenance_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const std::map<std::string, std::vector<double>>& entries() const { return entries_; }

  const std::vector<double>& at(const std::string& name) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("missing embedding for '" + name + "'");
    return it->second;
  }

  void l2_normalize() {
    for (auto& [name, v] : entries_) {
      double s = 0.0;
      for (double x : v) s += x * x;
      if (s == 0.0) continue;
      const double inv = 1.0 / std::sqrt(s);
      for (double& x : v) x *= inv;
    }
  }

  bool operator==(const EmbeddingTable&) const = default;

 private:
  std::size_t dim_ = 0;
  std::string provenance_;
  std::map<std::string, std::vector<double>> entries_;
};

/// Parses `{"dim": D, "provenance": "...", "entries": {"<name>": [...]}}`.
/// Duplicate entry names are rejected rather than silently overwritten.
inline EmbeddingTable parse_embeddings(const std::string& text, const std::string& source) {
  std::set<std::string> seen;
  std::string duplicate;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text, [&](int depth, nlohmann::json::parse_event_t event, nlohmann::json& parsed) {
      if (event == nlohmann::json::parse_event_t::key && depth == 2 && !seen.insert(parsed.get<std::string>()).second)
        duplicate = parsed.get<std::string>();
      return true;
    });
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(source + ": " + e.what());
  }
  if (!duplicate.empty()) throw ValidationError(source + ": duplicate embedding name '" + duplicate + "'");
  if (!doc.is_object() || !doc.contains("dim") || !doc.contains("entries") || !doc["entries"].is_object())
    throw ValidationError(source + ": expected an object with 'dim' and 'entries'");
  if (!doc["dim"].is_number_unsigned()) throw ValidationError(source + ": 'dim' must be a positive integer");
  std::map<std::string, std::vector<double>> entries;
  for (const auto& [name, value] : doc["entries"].items()) {
    if (!value.is_array()) throw ValidationError(source + ": entry '" + name + "' is not an array");
    std::vector<double> v;
    for (const auto& x : value) {
      if (!x.is_number()) throw ValidationError(source + ": entry '" + name + "' has a non-numeric value (NaN?)");
      v.push_back(x.get<double>());
    }
    entries.emplace(name, std::move(v));
  }
  try {
    return EmbeddingTable(doc["dim"].get<std::size_t>(), doc.value("provenance", std::string{}), std::move(entries));
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path, bool l2_normalize = false) {
  auto table = parse_embeddings(csv::read_text(path), path.string());
  if (l2_normalize) table.l2_normalize();
  return table;
}

inline std::string embeddings_json(const EmbeddingTable& t) {
  nlohmann::json doc;
  doc["dim"] = t.dim();
  doc["provenance"] = t.provenance();
  doc["entries"] = nlohmann::json::object();
  for (const auto& [name, v] : t.entries()) doc["entries"][name] = v;
  return doc.dump(1) + "\n";
}

inline void save_embeddings(const EmbeddingTable& t, const std::filesystem::path& path) {
  csv::write_text(path, embeddings_json(t));
}

/// Length-m indicator of the model's catalog position.
inline std::vector<double> one_hot(const ModelCatalog& catalog, const std::string& model) {
  std::vector<double> v(catalog.size(), 0.0);
  v[catalog.index_of(model)] = 1.0;
  return v;
}

/// Meta-predictor input: data embedding followed by model embedding.
inline std::vector<double> pair_input(std::span<const double> data_emb, std::span<const double> model_emb) {
  std::vector<double> v;
  v.reserve(data_emb.size() + model_emb.size());
  v.insert(v.end(), data_emb.begin(), data_emb.end());
  v.insert(v.end(), model_emb.begin(), model_emb.end());
  return v;
}

/// Language-route embedding of a dataset pair: ID dataset vector followed by
/// OOD dataset vector.
inline std::vector<double> pair_embedding(const EmbeddingTable& table, const DatasetPairId& pair) {
  return pair_input(table.at(pair.id_dataset), table.at(pair.ood_dataset));
}

}  // namespace metaood
