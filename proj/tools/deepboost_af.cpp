// deepboost-af: end-to-end atrial-fibrillation detection pipeline.
//
//   convert           ingest MAT/CSV records + labels into the binary cache
//   train-dcae        train the 19-layer convolutional autoencoder
//   extract-features  run the encoder over the cache, write features.csv
//   train-booster     fit adaboost | gbdt-level | gbdt-leaf on the features
//   evaluate          score an ensemble on the held-out split
//   run-all           the full six-row raw-vs-DCAE comparison
//
// Exit codes: 0 ok, 2 missing input, 3 parse failure, 4 shape mismatch,
// 5 degenerate evaluation/training input.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "deepboost/pipeline.hpp"

namespace pipeline = deepboost::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"DeepBoost-AF: autoencoder features + boosting for single-lead ECG AF detection"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> feature_mode;
  std::optional<std::string> positive_class;
  std::string algo = "gbdt-leaf";
  std::string ensemble_path;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "pipeline config JSON")->required();
    cmd->add_option("--seed", seed, "override the split seed");
    cmd->add_option("--feature-mode", feature_mode, "reduce | flatten");
    cmd->add_option("--positive-class", positive_class, "positive tags, e.g. A or A,O");
  };

  CLI::App* convert = app.add_subcommand("convert", "build the dataset cache");
  add_common(convert);
  CLI::App* train_dcae = app.add_subcommand("train-dcae", "train the autoencoder");
  add_common(train_dcae);
  CLI::App* extract = app.add_subcommand("extract-features", "encode cached records");
  add_common(extract);
  CLI::App* train_booster = app.add_subcommand("train-booster", "fit a boosting classifier");
  add_common(train_booster);
  train_booster->add_option("--algo", algo, "adaboost | gbdt-level | gbdt-leaf");
  CLI::App* evaluate = app.add_subcommand("evaluate", "score on the held-out split");
  add_common(evaluate);
  evaluate->add_option("--algo", algo, "adaboost | gbdt-level | gbdt-leaf");
  evaluate->add_option("--ensemble", ensemble_path, "explicit ensemble file");
  CLI::App* run_all = app.add_subcommand("run-all", "full raw-vs-DCAE comparison");
  add_common(run_all);

  CLI11_PARSE(app, argc, argv);

  pipeline::PipelineConfig cfg;
  try {
    cfg = pipeline::load_config(config_path);
    pipeline::CliOverrides overrides;
    overrides.seed = seed;
    overrides.feature_mode = feature_mode;
    overrides.positive_class = positive_class;
    pipeline::apply_overrides(cfg, overrides);
  } catch (const pipeline::ConfigError& e) {
    std::cerr << e.what() << "\n";
    const std::string what = e.what();
    return what.find("cannot open") != std::string::npos ? pipeline::kExitMissingInput
                                                         : pipeline::kExitParseFailure;
  } catch (const deepboost::Error& e) {
    std::cerr << e.what() << "\n";
    return pipeline::kExitParseFailure;
  }

  try {
    if (convert->parsed()) return pipeline::cmd_convert(cfg, std::cout, std::cerr);
    if (train_dcae->parsed()) return pipeline::cmd_train_dcae(cfg, std::cout, std::cerr);
    if (extract->parsed()) return pipeline::cmd_extract_features(cfg, std::cout, std::cerr);
    if (train_booster->parsed())
      return pipeline::cmd_train_booster(cfg, algo, std::cout, std::cerr);
    if (evaluate->parsed())
      return pipeline::cmd_evaluate(cfg, algo, ensemble_path, std::cout, std::cerr);
    if (run_all->parsed()) return pipeline::cmd_run_all(cfg, std::cout, std::cerr);
  } catch (const deepboost::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
