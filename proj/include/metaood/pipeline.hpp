#pragma once

// Subcommand bodies shared by the CLI and the tests.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaood/baselines.hpp"
#include "metaood/config.hpp"
#include "metaood/csv.hpp"
#include "metaood/embeddings.hpp"
#include "metaood/error.hpp"
#include "metaood/evaluation.hpp"
#include "metaood/gbrt.hpp"
#include "metaood/image_io.hpp"
#include "metaood/meta_features.hpp"
#include "metaood/meta_predictor.hpp"
#include "metaood/mlp.hpp"
#include "metaood/parallel.hpp"
#include "metaood/perf_store.hpp"
#include "metaood/selectors.hpp"

namespace metaood {

/// Raised when a reproduce run finishes but misses a configured threshold.
class ThresholdFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Catalog, performance matrix and split named by the data section.
struct Workspace {
  ModelCatalog catalog;
  PerformanceMatrix matrix;
  SplitSpec split;
};

inline Workspace load_workspace(const Config& cfg) {
  Workspace ws;
  ws.catalog = load_catalog(cfg.path("data", "catalog"));
  ws.matrix = load_performance_matrix(cfg.path("data", "matrix"));
  if (!ws.catalog.same_names(ws.matrix.catalog()))
    throw ValidationError("catalog models do not match the performance matrix columns");
  ws.split = load_split(cfg.path("data", "split"), ws.matrix);
  return ws;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  csv::write_text(path, j.dump(2) + "\n");
}

inline void write_effective_config(const Config& cfg, const std::filesystem::path& out) {
  write_json(out / "effective_config.json", cfg.effective());
}

// ---------------------------------------------------------------- featurize

inline ImageDataset dataset_from_config(const Config& cfg, const std::string& name, const nlohmann::json& spec) {
  if (spec.is_string()) {
    auto d = load_dataset(cfg.resolve(spec.get<std::string>()));
    return d;
  }
  if (!spec.is_object()) throw ValidationError("dataset '" + name + "': expected a path or a synthetic spec");
  SynthSpec s;
  try {
    s.seed = spec.value("seed", fnv1a(name));
    s.n = spec.value("n", s.n);
    s.h = spec.value("h", s.h);
    s.w = spec.value("w", s.w);
    s.c = spec.value("c", s.c);
    s.num_classes = spec.value("num_classes", s.num_classes);
    s.spread = spec.value("spread", s.spread);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("dataset '" + name + "': " + e.what());
  }
  return synth_dataset(s, name);
}

/// Splits a pair into the proxy training set (first half of the ID data) and
/// the unlabeled test set (second half of the ID data followed by the OOD
/// data resampled to the ID geometry).
inline std::pair<ImageDataset, ImageDataset> pair_datasets(const ImageDataset& id, const ImageDataset& ood) {
  if (id.size() < 4) throw ValidationError("dataset '" + id.name() + "' needs at least 4 images");
  const std::size_t half = id.size() / 2;
  auto train = id.slice(0, half, id.name() + "/train");
  const auto held = id.slice(half, id.size() - half, id.name() + "/test");
  const auto other = conform(ood, id.height(), id.width(), id.channels());
  auto test = concat({&held, &other}, id.name() + "+" + ood.name());
  return {std::move(train), std::move(test)};
}

struct FeaturizeResult {
  MetaFeatureTable table;
  std::map<std::string, std::vector<std::string>> diagnostics;
};

inline FeaturizeResult featurize(const Config& cfg, std::ostream& log = std::clog) {
  auto pairs = cfg.pairs();
  if (pairs.empty()) pairs = load_performance_matrix(cfg.path("data", "matrix")).pairs();
  const auto& specs = cfg.section("data").at("datasets");
  const auto& softmax_files = cfg.section("data").at("softmax");
  const bool fallback = cfg.section("features").at("allow_fallback").get<bool>();
  const auto fcfg = cfg.features();

  std::map<std::string, ImageDataset> datasets;
  for (const auto& p : pairs)
    for (const auto& name : {p.id_dataset, p.ood_dataset}) {
      if (datasets.count(name)) continue;
      if (!specs.contains(name)) throw ValidationError("no dataset entry for '" + name + "' (pair " + p.str() + ")");
      datasets.emplace(name, dataset_from_config(cfg, name, specs.at(name)));
    }

  std::vector<MetaFeatureVector> rows(pairs.size());
  parallel_for(pairs.size(), cfg.threads(), [&](std::size_t k) {
    const auto& p = pairs[k];
    const auto [train, test] = pair_datasets(datasets.at(p.id_dataset), datasets.at(p.ood_dataset));
    SoftmaxSource source;
    source.allow_fallback = fallback;
    source.seed = cfg.seed() ^ fnv1a(p.str());
    if (softmax_files.contains(p.str())) source.external = load_softmax_csv(cfg.resolve(softmax_files.at(p.str()).get<std::string>()));
    if (!source.external && !fallback)
      throw ValidationError("pair " + p.str() + ": no softmax file configured and the fallback is disabled");
    rows[k] = compose(train, test, source, fcfg, p.str());
  });

  FeaturizeResult out;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (k == 0) out.table.schema = rows[k].schema;
    if (rows[k].schema != out.table.schema) throw ValidationError("pair " + pairs[k].str() + ": schema differs");
    out.table.pairs.push_back(pairs[k]);
    out.table.rows.push_back(std::move(rows[k].values));
    if (!rows[k].diagnostics.empty()) out.diagnostics[pairs[k].str()] = rows[k].diagnostics;
  }
  log << "featurized " << pairs.size() << " pairs, " << out.table.schema.size() << " features each\n";
  return out;
}

inline void cmd_featurize(const Config& cfg, const std::filesystem::path& out, std::ostream& log = std::clog) {
  const auto res = featurize(cfg, log);
  csv::write_text(out / "meta_features.csv", meta_feature_csv(res.table));
  write_json(out / "schema.json", res.table.schema);
  write_json(out / "diagnostics.json", res.diagnostics);
  write_effective_config(cfg, out);
}

// ---------------------------------------------------------------- embeddings

/// Data and model embeddings for one route.
struct EmbeddingRoute {
  std::string route;
  DataEmbedder data;
  ModelEmbeddings models;
};

inline std::shared_ptr<const EmbeddingTable> language_table(const Config& cfg) {
  return std::make_shared<const EmbeddingTable>(
      load_embeddings(cfg.path("embeddings", "path"), cfg.section("embeddings").at("l2_normalize").get<bool>()));
}

inline std::shared_ptr<const MetaFeatureTable> meta_feature_table(const Config& cfg) {
  return std::make_shared<const MetaFeatureTable>(load_meta_feature_csv(cfg.path("embeddings", "meta_features")));
}

inline DataEmbedder language_embedder(std::shared_ptr<const EmbeddingTable> t) {
  return [t](const DatasetPairId& p) { return pair_embedding(*t, p); };
}

inline DataEmbedder meta_feature_embedder(std::shared_ptr<const MetaFeatureTable> t) {
  return [t](const DatasetPairId& p) { return t->at(p); };
}

/// language: text embeddings for pairs and models. meta_features:
/// meta-feature rows for pairs, one-hot vectors for models.
inline EmbeddingRoute make_route(const Config& cfg, const std::string& route, const ModelCatalog& catalog) {
  if (route == "language") {
    auto t = language_table(cfg);
    return {route, language_embedder(t), model_embeddings_from_table(*t, catalog)};
  }
  if (route == "meta_features") return {route, meta_feature_embedder(meta_feature_table(cfg)), one_hot_embeddings(catalog)};
  throw ValidationError("unknown embedding route '" + route + "'");
}

// ---------------------------------------------------------------- train

using AnyPredictor = std::variant<MetaPredictor, MLPRegressor>;

struct TrainedPredictor {
  std::string family;
  std::string route;
  AnyPredictor model;
  std::size_t samples = 0;
  double rmse = 0.0;
};

inline double predict_any(const AnyPredictor& p, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, p);
}

inline TrainedPredictor train_predictor(const Workspace& ws, const EmbeddingRoute& route, const std::string& family,
                                        const Config& cfg) {
  const auto ts = build_training_set(ws.matrix, ws.split.train, route.data, route.models, cfg.target());
  TrainedPredictor out{family, route.route, MetaPredictor{}, ts.X.size(), 0.0};
  if (family == "gbrt") {
    auto g = cfg.gbrt();
    g.seed = cfg.seed();
    auto model = fit_gbrt(ts.X, ts.y, g, cfg.threads());
    model.set_target_transform(cfg.target());
    out.model = std::move(model);
  } else if (family == "mlp") {
    auto m = cfg.mlp();
    m.seed = cfg.seed();
    out.model = fit_mlp(ts.X, ts.y, m);
  } else {
    throw ValidationError("unknown predictor family '" + family + "'");
  }
  double se = 0.0;
  for (std::size_t r = 0; r < ts.X.size(); ++r) {
    const double e = predict_any(out.model, ts.X[r]) - ts.y[r];
    se += e * e;
  }
  out.rmse = std::sqrt(se / static_cast<double>(ts.X.size()));
  return out;
}

inline nlohmann::json predictor_json(const TrainedPredictor& p) {
  nlohmann::json model = std::visit([](const auto& m) { return nlohmann::json(to_json(m)); }, p.model);
  return {{"version", 1}, {"family", p.family}, {"route", p.route}, {"model", model}};
}

inline TrainedPredictor predictor_from_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_text(path));
    TrainedPredictor p;
    p.family = j.at("family").get<std::string>();
    p.route = j.at("route").get<std::string>();
    if (p.family == "gbrt")
      p.model = predictor_from_json(j.at("model"));
    else if (p.family == "mlp")
      p.model = mlp_from_json(j.at("model"));
    else
      throw ValidationError(path.string() + ": unknown predictor family '" + p.family + "'");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void cmd_train(const Config& cfg, const std::filesystem::path& out, std::ostream& log = std::clog) {
  const auto ws = load_workspace(cfg);
  const auto route = make_route(cfg, cfg.section("embeddings").at("route").get<std::string>(), ws.catalog);
  const auto family = cfg.section("predictor").at("family").get<std::string>();
  const auto p = train_predictor(ws, route, family, cfg);
  log << "trained " << family << " on " << p.samples << " samples (" << ws.split.train.size()
      << " pairs), training RMSE " << csv::format_double(p.rmse) << "\n";
  write_json(out / "predictor.json", predictor_json(p));
  write_json(out / "training_summary.json",
             {{"family", family}, {"route", route.route}, {"samples", p.samples}, {"train_pairs", ws.split.train.size()},
              {"rmse", p.rmse}});
  write_effective_config(cfg, out);
}

// ---------------------------------------------------------------- select

/// Either a named pair resolved through the configured route, or an explicit
/// data-embedding vector.
struct SelectInput {
  std::optional<DatasetPairId> pair;
  std::optional<std::vector<double>> embedding;
};

inline nlohmann::json select_json(const Selection& s, const ModelCatalog& catalog) {
  auto scores = nlohmann::json::array();
  for (std::size_t j = 0; j < s.scores.size(); ++j) scores.push_back({{"model", catalog.name(j)}, {"score", s.scores[j]}});
  return {{"model", s.model}, {"index", s.index}, {"scores", scores}};
}

inline nlohmann::json cmd_select(const Config& cfg, const std::filesystem::path& predictor_path, const SelectInput& in,
                                 const std::filesystem::path& out) {
  const auto p = predictor_from_file(predictor_path);
  const auto catalog = load_catalog(cfg.path("data", "catalog"));
  std::vector<double> data;
  ModelEmbeddings models;
  if (p.route == "language") {
    const auto t = language_table(cfg);
    models = model_embeddings_from_table(*t, catalog);
    if (in.pair) data = pair_embedding(*t, *in.pair);
  } else {
    models = one_hot_embeddings(catalog);
    if (in.pair) data = meta_feature_table(cfg)->at(*in.pair);
  }
  if (in.embedding) data = *in.embedding;
  if (!in.pair && !in.embedding) throw ValidationError("select: give a pair or an embedding file");
  const auto s = std::visit([&](const auto& m) { return select(m, data, models, catalog); }, p.model);
  auto j = select_json(s, catalog);
  if (in.pair) j["pair"] = *in.pair;
  write_json(out / "selection.json", j);
  return j;
}

// ---------------------------------------------------------------- evaluate

inline std::vector<std::vector<double>> features_for(const DataEmbedder& e, std::span<const DatasetPairId> pairs) {
  std::vector<std::vector<double>> out;
  for (const auto& p : pairs) out.push_back(e(p));
  return out;
}

struct ZooOptions {
  bool include_ablations = false;  // metaood_nn
  bool include_oracles = true;
};

/// Fits every selector named in the configuration. Fitting runs in a fixed
/// order; each fitted selector is immutable.
inline std::vector<SelectorPtr> build_selectors(const Workspace& ws, const Config& cfg, const ZooOptions& opt,
                                                std::ostream& log) {
  const auto& b = cfg.section("baselines");
  const auto family = cfg.section("predictor").at("family").get<std::string>();
  const auto& train = ws.split.train;
  std::vector<SelectorPtr> zoo;

  auto add_meta = [&](const std::string& name, const EmbeddingRoute& route, const std::string& fam) {
    auto p = train_predictor(ws, route, fam, cfg);
    log << name << ": " << fam << " on " << p.samples << " samples, training RMSE " << csv::format_double(p.rmse) << "\n";
    MetaPredictorSelector::Predictor pred = std::visit([](auto m) { return MetaPredictorSelector::Predictor(std::move(m)); }, std::move(p.model));
    zoo.push_back(std::make_unique<MetaPredictorSelector>(name, std::move(pred), route.data, route.models, ws.catalog));
  };

  const auto language = make_route(cfg, "language", ws.catalog);
  const auto classic = make_route(cfg, "meta_features", ws.catalog);
  add_meta("metaood", language, family);
  add_meta("metaood_0", classic, family);
  if (opt.include_ablations) add_meta("metaood_nn", language, "mlp");

  zoo.push_back(std::make_unique<ConstantSelector>("gb", global_best(ws.matrix, train)));
  zoo.push_back(std::make_unique<RandomSelector>("random", ws.catalog, cfg.seed()));
  for (const auto& name : b.at("fixed").get<std::vector<std::string>>())
    zoo.push_back(std::make_unique<ConstantSelector>("fixed:" + name, fixed_select(ws.catalog, name)));

  const auto& feats = b.at("features").get<std::string>() == "language" ? language.data : classic.data;
  const auto train_x = features_for(feats, train);
  zoo.push_back(std::make_unique<IsacSelector>(
      "isac",
      isac_fit(train_x, ws.matrix, train, b.at("isac_k").get<std::size_t>(), cfg.seed(),
               b.at("isac_max_iterations").get<std::size_t>()),
      feats));
  zoo.push_back(std::make_unique<ArgosmartSelector>("argosmart", argosmart_fit(train_x, ws.matrix, train), feats));
  zoo.push_back(std::make_unique<AlorsSelector>(
      "alors",
      alors_fit(ws.matrix, train, b.at("alors_rank").get<std::size_t>(), train_x, cfg.seed(),
                b.at("alors_iterations").get<std::size_t>()),
      feats));
  if (b.at("ncf").get<bool>()) {
    auto m = cfg.mlp();
    m.seed = cfg.seed();
    zoo.push_back(std::make_unique<NcfSelector>("ncf", ncf_fit(ws.matrix, train, train_x, m), feats, ws.catalog));
  }
  const auto llm = b.at("llm_selections").get<std::string>();
  if (!llm.empty())
    zoo.push_back(std::make_unique<RecordedSelector>("llm", load_selections(cfg.resolve(llm), ws.catalog)));
  if (opt.include_oracles) {
    zoo.push_back(std::make_unique<OracleSelector>("oracle", ws.matrix));
    zoo.push_back(std::make_unique<OracleSelector>("anti_oracle", ws.matrix, true));
  }
  return zoo;
}

/// Scores every selector on the test split. Selectors are evaluated in
/// parallel; reports keep zoo order.
inline SelectionReport evaluate_zoo(const std::vector<SelectorPtr>& zoo, const Workspace& ws, const Config& cfg) {
  SelectionReport report;
  report.selectors.resize(zoo.size());
  std::vector<double> seconds(zoo.size());
  parallel_for(zoo.size(), cfg.threads(), [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    report.selectors[i] = evaluate_selector(*zoo[i], ws.matrix, ws.split.test);
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  report.tests = all_pairwise_tests(report.selectors, cfg.alternative());
  if (cfg.section("evaluation").at("timing").get<bool>())
    for (std::size_t i = 0; i < zoo.size(); ++i) report.timing_seconds["select:" + zoo[i]->name()] = seconds[i];
  return report;
}

inline void log_ranks(const SelectionReport& report, std::ostream& log) {
  for (const auto& e : average_rank_table(report.selectors))
    log << "  " << e.selector << "  mean rank " << csv::format_double(std::round(e.mean_rank * 1e4) / 1e4) << "\n";
}

inline SelectionReport cmd_evaluate(const Config& cfg, const std::filesystem::path& out, std::ostream& log = std::clog) {
  const auto ws = load_workspace(cfg);
  const auto zoo = build_selectors(ws, cfg, {}, log);
  auto report = evaluate_zoo(zoo, ws, cfg);
  emit_report(report, out);
  write_effective_config(cfg, out);
  log_ranks(report, log);
  return report;
}

// ---------------------------------------------------------------- reproduce

/// Mean rank of the random selector averaged over `seeds` consecutive seeds.
inline double random_mean_rank(const Workspace& ws, std::uint64_t first_seed, std::size_t seeds) {
  double total = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    const RandomSelector r("random", ws.catalog, first_seed + s);
    total += evaluate_selector(r, ws.matrix, ws.split.test).mean_rank();
  }
  return total / static_cast<double>(seeds);
}

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline nlohmann::json to_json(const Check& c) { return {{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}}; }

/// Thresholds from the evaluation section applied to a finished report.
inline std::vector<Check> acceptance_checks(const SelectionReport& report, double random_mc, const Config& cfg) {
  const auto& t = cfg.section("evaluation").at("thresholds");
  const double margin = t.at("metaood_over_gb").get<double>();
  const double lo = t.at("random_min").get<double>(), hi = t.at("random_max").get<double>();
  const double meta = report.find("metaood").mean_rank();
  const double gb = report.find("gb").mean_rank();
  auto fmt = [](double v) { return csv::format_double(std::round(v * 1e4) / 1e4); };
  std::vector<Check> checks;
  for (const auto& s : report.selectors)
    if (s.selector == "oracle") {
      const double o = s.mean_rank();
      checks.push_back({"oracle_mean_rank", o == 1.0, "oracle " + fmt(o)});
    }
  checks.push_back({"metaood_vs_gb", meta <= gb + margin, "metaood " + fmt(meta) + ", gb " + fmt(gb) + ", margin " + fmt(margin)});
  checks.push_back({"random_band", random_mc >= lo && random_mc <= hi, "random " + fmt(random_mc) + " in [" + fmt(lo) + ", " + fmt(hi) + "]"});
  checks.push_back({"metaood_below_random", meta < random_mc, "metaood " + fmt(meta) + " < random " + fmt(random_mc)});
  checks.push_back({"gb_below_random", gb < random_mc, "gb " + fmt(gb) + " < random " + fmt(random_mc)});
  return checks;
}

/// Full experiment: the selector zoo plus ablations, Monte-Carlo random
/// baseline and threshold checks. Throws ThresholdFailure after writing all
/// outputs when any check fails.
inline std::vector<Check> cmd_reproduce(const Config& cfg, const std::filesystem::path& out,
                                        std::ostream& log = std::clog) {
  const auto start = std::chrono::steady_clock::now();
  auto stage = [&](const std::string& name, auto&& fn) {
    try {
      return fn();
    } catch (const ValidationError& e) {
      throw ValidationError("stage " + name + ": " + e.what());
    }
  };
  const auto ws = stage("load", [&] { return load_workspace(cfg); });
  const auto fit_start = std::chrono::steady_clock::now();
  const auto zoo = stage("fit", [&] { return build_selectors(ws, cfg, {true, true}, log); });
  const double fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - fit_start).count();
  auto report = stage("evaluate", [&] { return evaluate_zoo(zoo, ws, cfg); });
  const auto seeds = cfg.section("baselines").at("random_seeds").get<std::size_t>();
  const double random_mc = random_mean_rank(ws, cfg.seed(), seeds);
  if (!report.timing_seconds.empty()) {
    report.timing_seconds["fit_all"] = fit_seconds;
    report.timing_seconds["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  stage("report", [&] {
    emit_report(report, out);
    return 0;
  });
  const auto checks = acceptance_checks(report, random_mc, cfg);
  auto cj = nlohmann::json::array();
  bool ok = true;
  for (const auto& c : checks) {
    cj.push_back(to_json(c));
    ok = ok && c.pass;
  }
  write_json(out / "acceptance.json", {{"random_mean_rank", random_mc}, {"random_seeds", seeds}, {"checks", cj}});
  write_effective_config(cfg, out);
  log_ranks(report, log);
  log << "  random (" << seeds << " seeds)  mean rank " << csv::format_double(std::round(random_mc * 1e4) / 1e4) << "\n";
  for (const auto& c : checks) log << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  if (!ok) throw ThresholdFailure("acceptance thresholds not met");
  return checks;
}

}  // namespace metaood
