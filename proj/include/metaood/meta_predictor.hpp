#pragma once

// Offline training set assembly and zero-shot selection by argmax of the
// predicted performance.

#include <cmath>
#include <concepts>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "metaood/embeddings.hpp"
#include "metaood/error.hpp"
#include "metaood/gbrt.hpp"
#include "metaood/perf_store.hpp"
#include "metaood/rank.hpp"

namespace metaood {

/// Maps a dataset pair to its data embedding (language or meta-feature route).
using DataEmbedder = std::function<std::vector<double>(const DatasetPairId&)>;

/// Model embeddings in catalog order.
using ModelEmbeddings = std::vector<std::vector<double>>;

inline ModelEmbeddings model_embeddings_from_table(const EmbeddingTable& table, const ModelCatalog& catalog) {
  ModelEmbeddings out;
  for (std::size_t j = 0; j < catalog.size(); ++j) {
    if (!table.contains(catalog.name(j))) throw ValidationError("missing model embedding for '" + catalog.name(j) + "'");
    out.push_back(table.at(catalog.name(j)));
  }
  return out;
}

inline ModelEmbeddings one_hot_embeddings(const ModelCatalog& catalog) {
  ModelEmbeddings out;
  for (std::size_t j = 0; j < catalog.size(); ++j) out.push_back(one_hot(catalog, catalog.name(j)));
  return out;
}

struct TrainingSet {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  std::vector<std::size_t> row;    // matrix row of each sample
  std::vector<std::size_t> model;  // catalog index of each sample
};

/// Rank percentiles of the non-missing cells of one row: (ascending midrank
/// - 1) / (k - 1), so the worst model gets 0 and the best 1. MISSING stays NaN.
inline std::vector<double> rank_percentiles(std::span<const double> row) {
  std::vector<double> present;
  std::vector<std::size_t> where;
  for (std::size_t j = 0; j < row.size(); ++j)
    if (!std::isnan(row[j])) {
      present.push_back(row[j]);
      where.push_back(j);
    }
  std::vector<double> out(row.size(), std::nan(""));
  if (present.size() == 1) {
    out[where[0]] = 0.5;
    return out;
  }
  const auto r = midranks(present, RankOrder::ascending);
  const auto denom = static_cast<double>(present.size() - 1);
  for (std::size_t k = 0; k < where.size(); ++k) out[where[k]] = (r[k] - 1.0) / denom;
  return out;
}

/// One sample (data embedding ++ model embedding, target) per non-missing
/// cell of the training pairs. Raw targets are AUROC / 100.
inline TrainingSet build_training_set(const PerformanceMatrix& matrix, std::span<const DatasetPairId> train_pairs,
                                      const DataEmbedder& data_embedding, const ModelEmbeddings& model_embs,
                                      TargetTransform transform = TargetTransform::raw) {
  if (model_embs.size() != matrix.cols())
    throw ValidationError("build_training_set: " + std::to_string(model_embs.size()) + " model embeddings for " +
                          std::to_string(matrix.cols()) + " models");
  TrainingSet ts;
  for (const auto& pair : train_pairs) {
    const std::size_t i = matrix.row_of(pair);
    const auto data = data_embedding(pair);
    const auto row = matrix.row(i);
    const auto pct = transform == TargetTransform::per_pair_rank ? rank_percentiles(row) : std::vector<double>{};
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
      if (std::isnan(row[j])) continue;
      ts.X.push_back(pair_input(data, model_embs[j]));
      ts.y.push_back(transform == TargetTransform::raw ? row[j] / 100.0 : pct[j]);
      ts.row.push_back(i);
      ts.model.push_back(j);
    }
  }
  return ts;
}

template <typename P>
concept PerformancePredictor = requires(const P& p, std::span<const double> x) {
  { p.predict(x) } -> std::convertible_to<double>;
};

struct Selection {
  std::size_t index = 0;
  std::string model;
  std::vector<double> scores;  // predicted score per catalog model
};

/// Index of the largest score; ties go to the lowest index.
inline std::size_t argmax_lowest(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("argmax of an empty score vector");
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j)
    if (scores[j] > scores[best]) best = j;
  return best;
}

/// Predicts every catalog model on the new pair and returns the argmax.
template <PerformancePredictor P>
Selection select(const P& predictor, std::span<const double> data_emb, const ModelEmbeddings& model_embs,
                 const ModelCatalog& catalog) {
  if (model_embs.size() != catalog.size())
    throw ValidationError("select: " + std::to_string(model_embs.size()) + " model embeddings for " +
                          std::to_string(catalog.size()) + " models");
  Selection s;
  for (const auto& m : model_embs) s.scores.push_back(predictor.predict(pair_input(data_emb, m)));
  s.index = argmax_lowest(s.scores);
  s.model = catalog.name(s.index);
  return s;
}

}  // namespace metaood
