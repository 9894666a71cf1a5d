// metaood command-line front end.
//
//   metaood featurize        meta-feature CSV for the configured pairs
//   metaood train            fit the meta-predictor on the train split
//   metaood select           choose a detector for one new pair
//   metaood evaluate         score the selector zoo on the test split
//   metaood reproduce-paper  full experiment plus threshold checks
//
// Exit codes: 0 success, 1 validation failure, 2 threshold failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "metaood/metaood.hpp"

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
};

metaood::Config make_config(const GlobalOptions& g) {
  auto cfg = g.config.empty() ? metaood::Config() : metaood::load_config(g.config);
  if (g.seed) cfg.set_seed(*g.seed);
  if (g.threads) cfg.set_threads(*g.threads);
  return cfg;
}

std::filesystem::path output_dir(const GlobalOptions& g, const metaood::Config& cfg) {
  return g.out.empty() ? cfg.output_dir() : std::filesystem::path(g.out);
}

std::optional<metaood::DatasetPairId> parse_pair(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) return std::nullopt;
  return metaood::DatasetPairId{s.substr(0, comma), s.substr(comma + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised OOD detector selection by meta-learning"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for every stochastic component");
  app.add_option("--threads", g.threads, "Worker cap; results do not depend on it")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory (default: output.dir from the config)");

  auto* featurize = app.add_subcommand("featurize", "Extract meta-features for dataset pairs");
  auto* train = app.add_subcommand("train", "Train the meta-predictor");
  auto* select = app.add_subcommand("select", "Select a detector for a new pair");
  std::string predictor, pair_arg, embedding_file;
  select->add_option("--predictor", predictor, "Predictor JSON written by train")->required()->check(CLI::ExistingFile);
  select->add_option("--pair", pair_arg, "Pair as ID,OOD resolved through the predictor's embedding route");
  select->add_option("--embedding", embedding_file, "JSON array holding the pair's data embedding")
      ->check(CLI::ExistingFile);
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate the selector zoo on the test split");
  auto* reproduce = app.add_subcommand("reproduce-paper", "Run the full selection experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto cfg = make_config(g);
    const auto out = output_dir(g, cfg);
    if (featurize->parsed()) {
      metaood::cmd_featurize(cfg, out);
    } else if (train->parsed()) {
      metaood::cmd_train(cfg, out);
    } else if (select->parsed()) {
      metaood::SelectInput in;
      if (!pair_arg.empty()) {
        in.pair = parse_pair(pair_arg);
        if (!in.pair) throw metaood::ValidationError("--pair expects ID,OOD");
      }
      if (!embedding_file.empty()) {
        try {
          in.embedding = nlohmann::json::parse(metaood::csv::read_text(embedding_file)).get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
          throw metaood::ValidationError(embedding_file + ": " + e.what());
        }
      }
      std::cout << metaood::cmd_select(cfg, predictor, in, out).dump(2) << "\n";
    } else if (evaluate->parsed()) {
      metaood::cmd_evaluate(cfg, out);
    } else if (reproduce->parsed()) {
      metaood::cmd_reproduce(cfg, out);
    }
  } catch (const metaood::ThresholdFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
