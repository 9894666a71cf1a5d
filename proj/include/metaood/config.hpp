#pragma once

// One JSON file drives every subcommand. User values are merged over the
// defaults below; unknown keys are rejected so typos do not pass silently.
// Relative paths resolve against the directory holding the config file.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaood/csv.hpp"
#include "metaood/error.hpp"
#include "metaood/gbrt.hpp"
#include "metaood/meta_features.hpp"
#include "metaood/mlp.hpp"
#include "metaood/wilcoxon.hpp"

namespace metaood {

/// Component seeds come from the top-level seed, so the per-component
/// configs drop theirs.
inline nlohmann::json default_config() {
  using nlohmann::json;
  json gbrt = GBRTConfig{}, mlp = MLPConfig{};
  gbrt.erase("seed");
  mlp.erase("seed");
  return {
      {"seed", 0},
      {"threads", 1},
      {"data",
       {{"catalog", "catalog.json"},
        {"matrix", "table_b.csv"},
        {"split", "split_default.json"},
        {"datasets", json::object()},
        {"pairs", json::array()},
        {"softmax", json::object()}}},
      {"features",
       {{"glcm_levels", 8}, {"histogram_bins", 32}, {"emd_bins", 32}, {"sobel_white_fraction", 0.5},
        {"allow_fallback", true}}},
      {"embeddings",
       {{"route", "language"}, {"path", "embeddings.json"}, {"meta_features", "meta_features.csv"},
        {"l2_normalize", false}}},
      {"predictor",
       {{"family", "gbrt"}, {"target", "raw"}, {"gbrt", gbrt}, {"mlp", mlp}}},
      {"baselines",
       {{"features", "meta_features"},
        {"isac_k", 3},
        {"isac_max_iterations", 100},
        {"alors_rank", 3},
        {"alors_iterations", 200},
        {"ncf", true},
        {"fixed", {"MSP", "ODIN"}},
        {"random_seeds", 100},
        {"llm_selections", ""}}},
      {"evaluation",
       {{"alternative", "greater"},
        {"timing", false},
        {"thresholds", {{"metaood_over_gb", 0.5}, {"random_min", 5.0}, {"random_max", 7.0}}}}},
      {"output", {{"dir", "out"}}},
  };
}

namespace detail {

// Keys whose values are free-form (user-defined names or lists).
inline bool free_form(const std::string& path) {
  return path == "/data/datasets" || path == "/data/softmax" || path == "/data/pairs" || path == "/baselines/fixed";
}

inline void merge_checked(nlohmann::json& base, const nlohmann::json& user, const std::string& path) {
  for (const auto& [key, value] : user.items()) {
    const std::string here = path + "/" + key;
    if (!base.contains(key)) throw ValidationError("config: unknown key " + here);
    auto& slot = base[key];
    if (slot.is_object() && !free_form(here)) {
      if (!value.is_object()) throw ValidationError("config: " + here + " must be an object");
      merge_checked(slot, value, here);
      continue;
    }
    // Integer settings are counts or seeds: whole and non-negative.
    const bool whole = value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
    const bool compatible = free_form(here)            ? value.type() == slot.type()
                            : slot.is_number_integer() ? whole
                            : slot.is_number()         ? value.is_number()
                                                       : value.type() == slot.type();
    if (!compatible)
      throw ValidationError("config: " + here + (slot.is_number_integer() ? " must be a non-negative integer"
                                                                          : " has the wrong type"));
    slot = value;
  }
}

}  // namespace detail

class Config {
 public:
  Config() : doc_(default_config()), base_dir_(std::filesystem::current_path()) {}

  /// Merges `user` over the defaults. `base_dir` anchors relative paths.
  Config(const nlohmann::json& user, std::filesystem::path base_dir)
      : doc_(default_config()), base_dir_(std::move(base_dir)) {
    if (!user.is_object()) throw ValidationError("config: top level must be an object");
    detail::merge_checked(doc_, user, "");
    validate();
  }

  /// Defaults plus user values, as written back by every subcommand.
  const nlohmann::json& effective() const { return doc_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }

  const nlohmann::json& section(const std::string& name) const { return doc_.at(name); }

  std::filesystem::path path(const std::string& section_name, const std::string& key) const {
    return resolve(doc_.at(section_name).at(key).get<std::string>());
  }
  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir_ / p;
  }

  std::uint64_t seed() const { return doc_.at("seed").get<std::uint64_t>(); }
  std::size_t threads() const { return threads_ ? threads_ : doc_.at("threads").get<std::size_t>(); }
  void set_seed(std::uint64_t s) { doc_["seed"] = s; }
  /// Worker cap for this run only. Results do not depend on it, so it is
  /// not written back to the effective config.
  void set_threads(std::size_t t) {
    if (t == 0) throw ValidationError("threads must be >= 1");
    threads_ = t;
  }
  std::filesystem::path output_dir() const { return path("output", "dir"); }

  GBRTConfig gbrt() const {
    auto c = doc_.at("predictor").at("gbrt").get<GBRTConfig>();
    c.validate();
    return c;
  }
  MLPConfig mlp() const {
    auto c = doc_.at("predictor").at("mlp").get<MLPConfig>();
    c.validate();
    return c;
  }
  TargetTransform target() const { return parse_target_transform(doc_.at("predictor").at("target")); }
  Alternative alternative() const { return parse_alternative(doc_.at("evaluation").at("alternative")); }

  MetaFeatureConfig features() const {
    const auto& f = doc_.at("features");
    MetaFeatureConfig c;
    c.image.glcm_levels = f.at("glcm_levels").get<std::size_t>();
    c.image.histogram_bins = f.at("histogram_bins").get<std::size_t>();
    c.image.sobel_white_fraction = f.at("sobel_white_fraction").get<double>();
    c.emd_bins = f.at("emd_bins").get<std::size_t>();
    return c;
  }

  std::vector<DatasetPairId> pairs() const { return doc_.at("data").at("pairs").get<std::vector<DatasetPairId>>(); }

 private:
  void validate() const {
    try {
      const auto& e = doc_.at("embeddings");
      const auto route = e.at("route").get<std::string>();
      if (route != "language" && route != "meta_features")
        throw ValidationError("config: embeddings.route must be language or meta_features");
      const auto bf = doc_.at("baselines").at("features").get<std::string>();
      if (bf != "language" && bf != "meta_features")
        throw ValidationError("config: baselines.features must be language or meta_features");
      const auto fam = doc_.at("predictor").at("family").get<std::string>();
      if (fam != "gbrt" && fam != "mlp") throw ValidationError("config: predictor.family must be gbrt or mlp");
      if (threads() == 0) throw ValidationError("config: threads must be >= 1");
      (void)target();
      (void)alternative();
      (void)gbrt();
      (void)mlp();
      const auto fc = features();
      if (fc.image.glcm_levels < 2 || fc.image.histogram_bins < 2 || fc.emd_bins < 2)
        throw ValidationError("config: feature level and bin counts must be >= 2");
      (void)pairs();
      (void)doc_.at("baselines").at("fixed").get<std::vector<std::string>>();
      if (doc_.at("baselines").at("random_seeds").get<std::size_t>() == 0)
        throw ValidationError("config: baselines.random_seeds must be >= 1");
    } catch (const nlohmann::json::exception& ex) {
      throw ValidationError(std::string("config: ") + ex.what());
    }
  }

  nlohmann::json doc_;
  std::filesystem::path base_dir_;
  std::size_t threads_ = 0;
};

inline Config load_config(const std::filesystem::path& path) {
  nlohmann::json user;
  try {
    user = nlohmann::json::parse(csv::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return Config(user, std::filesystem::absolute(path).parent_path());
}

}  // namespace metaood
