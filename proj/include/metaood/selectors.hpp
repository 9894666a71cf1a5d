#pragma once

// Uniform interface over every selection strategy so the evaluation
// harness can score them side by side.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaood/baselines.hpp"
#include "metaood/gbrt.hpp"
#include "metaood/meta_predictor.hpp"
#include "metaood/mlp.hpp"
#include "metaood/perf_store.hpp"
#include "metaood/rng.hpp"

namespace metaood {

/// Chooses a catalog model for a dataset pair, or abstains (nullopt).
/// Fitted state is immutable, so select() is safe to call concurrently.
class Selector {
 public:
  explicit Selector(std::string name) : name_(std::move(name)) {}
  virtual ~Selector() = default;

  const std::string& name() const { return name_; }
  virtual std::optional<std::size_t> select(const DatasetPairId& pair) const = 0;
  virtual nlohmann::json state() const { return nullptr; }

 private:
  std::string name_;
};

using SelectorPtr = std::unique_ptr<const Selector>;

/// Same model for every pair (Global Best, fixed MSP/ODIN).
class ConstantSelector final : public Selector {
 public:
  ConstantSelector(std::string name, std::size_t model) : Selector(std::move(name)), model_(model) {}
  std::optional<std::size_t> select(const DatasetPairId&) const override { return model_; }
  nlohmann::json state() const override { return {{"model_index", model_}}; }

 private:
  std::size_t model_;
};

/// Uniform random model. The draw for a pair comes from a stream derived
/// from the seed and the pair name, so results do not depend on call order.
class RandomSelector final : public Selector {
 public:
  RandomSelector(std::string name, ModelCatalog catalog, std::uint64_t seed)
      : Selector(std::move(name)), catalog_(std::move(catalog)), seed_(seed) {}

  std::optional<std::size_t> select(const DatasetPairId& pair) const override {
    Rng rng = Rng(seed_).split(fnv1a(pair.str()));
    return random_select(catalog_, rng);
  }
  nlohmann::json state() const override { return {{"seed", seed_}}; }

 private:
  ModelCatalog catalog_;
  std::uint64_t seed_;
};

/// Sanity bounds: true best (oracle) or true worst (anti-oracle) model.
class OracleSelector final : public Selector {
 public:
  OracleSelector(std::string name, const PerformanceMatrix& matrix, bool worst = false)
      : Selector(std::move(name)), matrix_(&matrix), worst_(worst) {}

  std::optional<std::size_t> select(const DatasetPairId& pair) const override {
    const auto row = matrix_->row(matrix_->row_of(pair));
    std::optional<std::size_t> pick;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (std::isnan(row[j])) continue;
      if (!pick || (worst_ ? row[j] < row[*pick] : row[j] > row[*pick])) pick = j;
    }
    return pick;
  }

 private:
  const PerformanceMatrix* matrix_;
  bool worst_;
};

class IsacSelector final : public Selector {
 public:
  IsacSelector(std::string name, IsacModel model, DataEmbedder features)
      : Selector(std::move(name)), model_(std::move(model)), features_(std::move(features)) {}
  std::optional<std::size_t> select(const DatasetPairId& pair) const override {
    return isac_select(model_, features_(pair));
  }
  nlohmann::json state() const override { return to_json(model_); }

 private:
  IsacModel model_;
  DataEmbedder features_;
};

class ArgosmartSelector final : public Selector {
 public:
  ArgosmartSelector(std::string name, ArgosmartModel model, DataEmbedder features)
      : Selector(std::move(name)), model_(std::move(model)), features_(std::move(features)) {}
  std::optional<std::size_t> select(const DatasetPairId& pair) const override {
    return argosmart_select(model_, features_(pair));
  }

 private:
  ArgosmartModel model_;
  DataEmbedder features_;
};

class AlorsSelector final : public Selector {
 public:
  AlorsSelector(std::string name, AlorsModel model, DataEmbedder features)
      : Selector(std::move(name)), model_(std::move(model)), features_(std::move(features)) {}
  std::optional<std::size_t> select(const DatasetPairId& pair) const override {
    return alors_select(model_, features_(pair));
  }
  nlohmann::json state() const override { return to_json(model_); }

 private:
  AlorsModel model_;
  DataEmbedder features_;
};

class NcfSelector final : public Selector {
 public:
  NcfSelector(std::string name, NcfModel model, DataEmbedder features, ModelCatalog catalog)
      : Selector(std::move(name)), model_(std::move(model)), features_(std::move(features)), catalog_(std::move(catalog)) {}
  std::optional<std::size_t> select(const DatasetPairId& pair) const override {
    return ncf_select(model_, features_(pair), catalog_).index;
  }

 private:
  NcfModel model_;
  DataEmbedder features_;
  ModelCatalog catalog_;
};

/// Meta-predictor selection: argmax over models of f(data embedding, model embedding).
class MetaPredictorSelector final : public Selector {
 public:
  using Predictor = std::variant<MetaPredictor, MLPRegressor>;

  MetaPredictorSelector(std::string name, Predictor predictor, DataEmbedder data, ModelEmbeddings models,
                        ModelCatalog catalog)
      : Selector(std::move(name)),
        predictor_(std::move(predictor)),
        data_(std::move(data)),
        models_(std::move(models)),
        catalog_(std::move(catalog)) {}

  Selection choose(const DatasetPairId& pair) const {
    const auto emb = data_(pair);
    return std::visit([&](const auto& p) { return metaood::select(p, emb, models_, catalog_); }, predictor_);
  }

  std::optional<std::size_t> select(const DatasetPairId& pair) const override { return choose(pair).index; }

 private:
  Predictor predictor_;
  DataEmbedder data_;
  ModelEmbeddings models_;
  ModelCatalog catalog_;
};

/// Recorded per-pair choices, e.g. from an external LLM selector. Pairs
/// without a usable choice abstain.
class RecordedSelector final : public Selector {
 public:
  RecordedSelector(std::string name, std::map<DatasetPairId, std::optional<std::size_t>> choices)
      : Selector(std::move(name)), choices_(std::move(choices)) {}

  std::optional<std::size_t> select(const DatasetPairId& pair) const override {
    const auto it = choices_.find(pair);
    if (it == choices_.end()) return std::nullopt;
    return it->second;
  }

  const std::map<DatasetPairId, std::optional<std::size_t>>& choices() const { return choices_; }

 private:
  std::map<DatasetPairId, std::optional<std::size_t>> choices_;
};

/// Marker used in selection files for an unusable recommendation.
inline constexpr const char* kAbstain = "ABSTAIN";

/// Reads `[{"pair": {"id": ..., "ood": ...}, "model": "<name>"}, ...]`.
/// ABSTAIN and names outside the catalog map to an abstention.
inline std::map<DatasetPairId, std::optional<std::size_t>> parse_selections(const nlohmann::json& doc,
                                                                            const ModelCatalog& catalog,
                                                                            const std::string& source) {
  if (!doc.is_array()) throw ValidationError(source + ": selections must be a JSON array");
  std::map<DatasetPairId, std::optional<std::size_t>> out;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("pair") || !item.contains("model") || !item["model"].is_string())
      throw ValidationError(source + ": selection entries need 'pair' and 'model'");
    DatasetPairId pair;
    try {
      pair = item["pair"].get<DatasetPairId>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(source + ": " + e.what());
    }
    const auto model = item["model"].get<std::string>();
    if (out.count(pair)) throw ValidationError(source + ": duplicate selection for " + pair.str());
    out[pair] = model == kAbstain ? std::nullopt : catalog.find(model);
  }
  return out;
}

inline std::map<DatasetPairId, std::optional<std::size_t>> load_selections(const std::filesystem::path& path,
                                                                           const ModelCatalog& catalog) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(csv::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_selections(doc, catalog, path.string());
}

}  // namespace metaood
