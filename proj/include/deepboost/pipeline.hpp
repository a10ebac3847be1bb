#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "deepboost/adaboost.hpp"
#include "deepboost/dcae.hpp"
#include "deepboost/ensemble_io.hpp"
#include "deepboost/gbdt.hpp"
#include "deepboost/metrics.hpp"
#include "deepboost/signal_io.hpp"
#include "json.hpp"

// Pipeline orchestration shared by the CLI: convert, train-dcae,
// extract-features, train-booster, evaluate and run-all. Every subcommand is
// a plain function returning the process exit code, so the whole flow is
// testable without spawning processes.

namespace deepboost::pipeline {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitMissingInput = 2;
inline constexpr int kExitParseFailure = 3;
inline constexpr int kExitShapeMismatch = 4;
inline constexpr int kExitDegenerateInput = 5;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct DcaeSettings {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 0.001;
  std::uint64_t seed = 1;
  dcae::FeatureMode feature_mode = dcae::FeatureMode::Reduce;
};

struct PipelineConfig {
  fs::path records_dir;
  fs::path labels_file;
  fs::path cache_path;
  fs::path output_dir;
  std::uint64_t split_seed = 7;
  std::set<char> positive_class{'A'};
  DcaeSettings dcae;
  std::optional<int> adaboost_rounds;
  std::optional<boosting::GbdtParams> gbdt_level;
  std::optional<boosting::GbdtParams> gbdt_leaf;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline dcae::FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "reduce") return dcae::FeatureMode::Reduce;
  if (s == "flatten") return dcae::FeatureMode::Flatten;
  throw ConfigError("feature mode must be 'reduce' or 'flatten', got '" + s + "'");
}

inline std::set<char> parse_positive_class(const std::vector<std::string>& tags) {
  std::set<char> out;
  for (const auto& t : tags) {
    if (t.size() != 1) throw ConfigError("positive class tags must be single characters");
    out.insert(t[0]);
  }
  io::validate_positive_class(out);
  return out;
}

inline boosting::GbdtParams parse_gbdt_section(const nlohmann::ordered_json& j,
                                               boosting::Growth growth) {
  boosting::GbdtParams p;
  p.growth = growth;
  if (j.contains("trees")) p.trees = j.at("trees").get<int>();
  if (j.contains("learning_rate")) p.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("max_depth")) p.max_depth = j.at("max_depth").get<int>();
  if (j.contains("max_leaves")) p.max_leaves = j.at("max_leaves").get<int>();
  if (j.contains("lambda")) p.lambda = j.at("lambda").get<double>();
  if (j.contains("gamma")) p.gamma = j.at("gamma").get<double>();
  if (j.contains("min_child_weight")) p.min_child_weight = j.at("min_child_weight").get<double>();
  if (j.contains("max_bins")) p.max_bins = j.at("max_bins").get<int>();
  return p;
}

}  // namespace detail

inline PipelineConfig parse_config(const nlohmann::ordered_json& j, const fs::path& base_dir) {
  PipelineConfig cfg;
  const auto path_of = [&](const std::string& key) -> fs::path {
    const fs::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };
  if (j.contains("records_dir")) cfg.records_dir = path_of("records_dir");
  if (j.contains("labels_file")) cfg.labels_file = path_of("labels_file");
  cfg.cache_path = path_of("cache_path");
  cfg.output_dir = path_of("output_dir");
  cfg.split_seed = j.at("split_seed").get<std::uint64_t>();
  if (j.contains("positive_class"))
    cfg.positive_class =
        detail::parse_positive_class(j.at("positive_class").get<std::vector<std::string>>());
  if (j.contains("dcae")) {
    const auto& d = j.at("dcae");
    if (d.contains("epochs")) cfg.dcae.epochs = d.at("epochs").get<int>();
    if (d.contains("batch_size")) cfg.dcae.batch_size = d.at("batch_size").get<int>();
    if (d.contains("learning_rate")) cfg.dcae.learning_rate = d.at("learning_rate").get<double>();
    if (d.contains("seed")) cfg.dcae.seed = d.at("seed").get<std::uint64_t>();
    if (d.contains("feature_mode"))
      cfg.dcae.feature_mode = detail::parse_feature_mode(d.at("feature_mode").get<std::string>());
  }
  if (j.contains("boosters")) {
    const auto& b = j.at("boosters");
    if (b.contains("adaboost")) {
      cfg.adaboost_rounds = 100;
      if (b.at("adaboost").contains("rounds"))
        cfg.adaboost_rounds = b.at("adaboost").at("rounds").get<int>();
    }
    if (b.contains("gbdt_level"))
      cfg.gbdt_level = detail::parse_gbdt_section(b.at("gbdt_level"), boosting::Growth::Level);
    if (b.contains("gbdt_leaf"))
      cfg.gbdt_leaf = detail::parse_gbdt_section(b.at("gbdt_leaf"), boosting::Growth::Leaf);
  }
  return cfg;
}

inline PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
    return parse_config(j, path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
}

struct CliOverrides {
  std::optional<std::uint64_t> seed;  // replaces the split seed
  std::optional<std::string> feature_mode;
  std::optional<std::string> positive_class;  // e.g. "A" or "A,O"
};

inline void apply_overrides(PipelineConfig& cfg, const CliOverrides& ov) {
  if (ov.seed) cfg.split_seed = *ov.seed;
  if (ov.feature_mode) cfg.dcae.feature_mode = detail::parse_feature_mode(*ov.feature_mode);
  if (ov.positive_class) {
    std::set<char> tags;
    for (char c : *ov.positive_class)
      if (c != ',' && c != ' ') tags.insert(c);
    io::validate_positive_class(tags);
    cfg.positive_class = tags;
  }
}

// ---------------------------------------------------------------------------
// Feature files: CSV with header id,label,f0..fN
// ---------------------------------------------------------------------------

struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::uint8_t> labels;
  boosting::FeatureMatrix x;
};

inline void write_features_csv(const fs::path& path, const FeatureTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string());
  out << "id,label";
  for (std::size_t f = 0; f < table.x.cols; ++f) out << ",f" << f;
  out << "\n";
  char buf[40];
  for (std::size_t r = 0; r < table.x.rows; ++r) {
    out << table.ids[r] << ',' << static_cast<int>(table.labels[r]);
    for (std::size_t f = 0; f < table.x.cols; ++f) {
      std::snprintf(buf, sizeof(buf), ",%.17g", table.x.at(r, f));
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw Error("write failed for " + path.string());
}

inline FeatureTable read_features_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header) || header.rfind("id,label", 0) != 0)
    throw Error("feature file " + path.string() + ": malformed header");
  std::size_t cols = 0;
  for (char c : header) cols += c == ',' ? 1 : 0;
  if (cols < 2) throw Error("feature file " + path.string() + ": no feature columns");
  cols -= 1;  // id,label take the first two fields

  FeatureTable table;
  std::vector<double> values;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw Error("feature file line " + std::to_string(line_no) + ": malformed row");
    table.ids.push_back(line.substr(0, c1));
    table.labels.push_back(line[c1 + 1] == '1' ? 1 : 0);
    std::size_t start = c2 + 1;
    std::size_t n_values = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(line.data() + start, line.data() + end, v);
      if (ec != std::errc{} || ptr != line.data() + end)
        throw Error("feature file line " + std::to_string(line_no) + ": bad number");
      values.push_back(v);
      ++n_values;
      start = end + 1;
    }
    if (n_values != cols)
      throw Error("feature file line " + std::to_string(line_no) + ": expected " +
                  std::to_string(cols) + " features, got " + std::to_string(n_values));
  }
  table.x.rows = table.ids.size();
  table.x.cols = cols;
  table.x.data = std::move(values);
  return table;
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<preprocess::Signal> split_signals(const io::DatasetCache& cache,
                                                     std::uint8_t split) {
  std::vector<preprocess::Signal> out;
  for (const auto& rec : cache.records)
    if (rec.split == split) out.push_back(rec.signal);
  return out;
}

// Raw-signal features: the normalized 9000-sample vectors fed directly to
// the baseline boosters.
inline FeatureTable raw_feature_table(const io::DatasetCache& cache) {
  FeatureTable table;
  table.x = boosting::FeatureMatrix(cache.records.size(),
                                    static_cast<std::size_t>(preprocess::kSignalLength));
  for (std::size_t r = 0; r < cache.records.size(); ++r) {
    table.ids.push_back(cache.records[r].id);
    table.labels.push_back(cache.records[r].label);
    const auto& values = cache.records[r].signal.values;
    for (std::size_t f = 0; f < values.size(); ++f)
      table.x.at(r, f) = static_cast<double>(values[f]);
  }
  return table;
}

struct SplitView {
  boosting::FeatureMatrix x;
  std::vector<int> labels01;
  std::vector<bool> truths;
  std::vector<std::string> ids;
};

inline SplitView select_split(const FeatureTable& table, const io::DatasetCache& cache,
                              std::uint8_t split) {
  std::map<std::string, const io::CachedRecord*> by_id;
  for (const auto& rec : cache.records) by_id[rec.id] = &rec;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.ids.size(); ++r) {
    const auto it = by_id.find(table.ids[r]);
    if (it == by_id.end())
      throw Error("feature row '" + table.ids[r] + "' is not in the dataset cache");
    if (it->second->split == split) rows.push_back(r);
  }
  SplitView view;
  view.x = boosting::FeatureMatrix(rows.size(), table.x.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    view.ids.push_back(table.ids[r]);
    view.labels01.push_back(table.labels[r]);
    view.truths.push_back(table.labels[r] != 0);
    for (std::size_t f = 0; f < table.x.cols; ++f) view.x.at(i, f) = table.x.at(r, f);
  }
  return view;
}

inline std::size_t ensemble_feature_count(const boosting::BoostEnsemble& e) {
  if (e.kind == boosting::EnsembleKind::Gbdt) return e.gbdt.binning.features();
  std::size_t max_feature = 0;
  for (const auto& s : e.adaboost.stumps)
    max_feature = std::max(max_feature, static_cast<std::size_t>(s.feature) + 1);
  return max_feature;
}

inline std::string ensemble_file_name(const std::string& algo) {
  std::string name = algo;
  for (char& c : name)
    if (c == '-') c = '_';
  return "ensemble_" + name + ".json";
}

inline void ensure_output_dir(const PipelineConfig& cfg) {
  if (!cfg.output_dir.empty()) fs::create_directories(cfg.output_dir);
}

}  // namespace detail

// One evaluation row in the layout of the published comparison table.
struct ReportRow {
  std::string model;
  metrics::MetricReport report;
};

inline std::string format_report_row(const ReportRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %11.4f %9.4f %10.4f %9.4f  %s", row.model.c_str(),
                row.report.sensitivity, row.report.accuracy, row.report.precision, row.report.f1,
                metrics::format_hms(row.report.total_training_time_s).c_str());
  return buf;
}

inline std::string report_header() {
  return "model        sensitivity  accuracy  precision        f1  ttt";
}

inline void write_report_csv(const fs::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "model,sensitivity,accuracy,precision,f1,ttt,ttt_seconds\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,%.4f", row.report.sensitivity,
                  row.report.accuracy, row.report.precision, row.report.f1);
    out << row.model << ',' << buf << ','
        << metrics::format_hms(row.report.total_training_time_s);
    std::snprintf(buf, sizeof(buf), ",%.3f", row.report.total_training_time_s);
    out << buf << "\n";
  }
}

// Plot-ready long format (model, metric, value); wall-clock time is kept out
// so the file is byte-reproducible.
inline void write_report_long_csv(const fs::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "model,metric,value\n";
  char buf[32];
  for (const auto& row : rows) {
    const std::pair<const char*, double> cells[] = {
        {"sensitivity", row.report.sensitivity},
        {"accuracy", row.report.accuracy},
        {"precision", row.report.precision},
        {"f1", row.report.f1},
    };
    for (const auto& [metric, value] : cells) {
      std::snprintf(buf, sizeof(buf), "%.4f", value);
      out << row.model << ',' << metric << ',' << buf << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// convert
// ---------------------------------------------------------------------------

inline int cmd_convert(const PipelineConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.labels_file.empty() || !fs::exists(cfg.labels_file)) {
    err << "labels file not found: " << cfg.labels_file.string() << "\n";
    return kExitMissingInput;
  }
  if (cfg.records_dir.empty() || !fs::is_directory(cfg.records_dir)) {
    err << "records directory not found: " << cfg.records_dir.string() << "\n";
    return kExitMissingInput;
  }

  io::LabelIndex labels;
  try {
    std::ifstream in(cfg.labels_file, std::ios::binary);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    labels = io::load_labels(text);
  } catch (const io::LabelError& e) {
    err << "labels file: " << e.what() << "\n";
    return kExitParseFailure;
  }
  labels.positive_class = cfg.positive_class;

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(cfg.records_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".mat" || ext == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    err << "no .mat or .csv record files in " << cfg.records_dir.string() << "\n";
    return kExitMissingInput;
  }

  std::vector<io::RawRecord> records;
  std::vector<std::string> file_errors;
  for (const auto& path : files) {
    const std::string id = path.stem().string();
    try {
      if (!labels.entries.count(id)) throw Error("no label for record id '" + id + "'");
      if (path.extension() == ".mat") {
        std::ifstream in(path, std::ios::binary);
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
        records.push_back(io::parse_mat_record(bytes, id));
      } else {
        std::ifstream in(path, std::ios::binary);
        const std::string text((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
        records.push_back(io::parse_csv_record(text, id));
      }
    } catch (const Error& e) {
      file_errors.push_back(path.filename().string() + ": " + e.what());
    }
  }

  if (records.empty()) {
    for (const auto& msg : file_errors) err << msg << "\n";
    err << "no parsable records\n";
    return kExitParseFailure;
  }

  std::vector<std::string> warnings;
  io::DatasetCache cache;
  try {
    cache = io::build_cache(records, labels, cfg.split_seed, &warnings);
  } catch (const io::CacheError& e) {
    err << e.what() << "\n";
    return kExitParseFailure;
  }
  if (!cfg.cache_path.parent_path().empty()) fs::create_directories(cfg.cache_path.parent_path());
  io::write_cache(cache, cfg.cache_path);

  for (const auto& w : warnings) err << "warning: " << w << "\n";
  out << "cached " << cache.records.size() << " records to " << cfg.cache_path.string() << "\n";
  out << cache.manifest.dump(2) << "\n";
  if (!file_errors.empty()) {
    for (const auto& msg : file_errors) err << msg << "\n";
    err << file_errors.size() << " file(s) failed to parse; the rest were cached\n";
    return kExitParseFailure;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train-dcae
// ---------------------------------------------------------------------------

inline int cmd_train_dcae(const PipelineConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!fs::exists(cfg.cache_path)) {
    err << "cache file not found: " << cfg.cache_path.string() << "\n";
    return kExitMissingInput;
  }
  io::DatasetCache cache;
  try {
    cache = io::read_cache(cfg.cache_path);
  } catch (const io::CacheError& e) {
    err << e.what() << "\n";
    return kExitParseFailure;
  }
  const auto train = detail::split_signals(cache, io::kTrainSplit);
  if (train.empty()) {
    err << "training split is empty\n";
    return kExitDegenerateInput;
  }

  dcae::OptimizerConfig opt;
  opt.learning_rate = cfg.dcae.learning_rate;
  opt.batch_size = cfg.dcae.batch_size;
  opt.epochs = cfg.dcae.epochs;

  auto model = dcae::build_dcae(cfg.dcae.seed);
  std::vector<double> loss_log;
  metrics::Stopwatch watch;
  try {
    loss_log = dcae::train_dcae(model, train, opt, cfg.dcae.seed);
  } catch (const dcae::DcaeError& e) {
    err << e.what() << "\n";
    return kExitDegenerateInput;
  }
  const double ttt = watch.elapsed_s();

  detail::ensure_output_dir(cfg);
  dcae::save_model(model, cfg.output_dir / "dcae_model.bin");
  {
    std::ofstream loss_csv(cfg.output_dir / "dcae_loss.csv", std::ios::binary | std::ios::trunc);
    loss_csv << "epoch,mean_mse\n";
    char buf[40];
    for (std::size_t i = 0; i < loss_log.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", loss_log[i]);
      loss_csv << (i + 1) << ',' << buf << "\n";
    }
  }
  out << "trained on " << train.size() << " records for " << loss_log.size() << " epochs\n";
  if (!loss_log.empty()) out << "final mean reconstruction mse: " << loss_log.back() << "\n";
  out << "model: " << (cfg.output_dir / "dcae_model.bin").string() << "\n";
  out << "DCAE TTT: " << metrics::format_hms(ttt) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// extract-features
// ---------------------------------------------------------------------------

inline int cmd_extract_features(const PipelineConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path model_path = cfg.output_dir / "dcae_model.bin";
  if (!fs::exists(cfg.cache_path)) {
    err << "cache file not found: " << cfg.cache_path.string() << "\n";
    return kExitMissingInput;
  }
  if (!fs::exists(model_path)) {
    err << "model file not found: " << model_path.string() << "\n";
    return kExitMissingInput;
  }
  io::DatasetCache cache;
  dcae::DcaeModel model;
  try {
    cache = io::read_cache(cfg.cache_path);
    model = dcae::load_model(model_path);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitParseFailure;
  }
  if (model.layers.empty() || model.layers.front().in_channels != 1) {
    err << "model/cache shape mismatch: model expects input channels "
        << (model.layers.empty() ? 0 : model.layers.front().in_channels)
        << ", cache provides 1-channel signals of length " << preprocess::kSignalLength << "\n";
    return kExitShapeMismatch;
  }
  for (const auto& rec : cache.records)
    if (rec.signal.values.size() != static_cast<std::size_t>(preprocess::kSignalLength)) {
      err << "model/cache shape mismatch: model expects length " << preprocess::kSignalLength
          << ", record '" << rec.id << "' has length " << rec.signal.values.size() << "\n";
      return kExitShapeMismatch;
    }

  FeatureTable table;
  for (const auto& rec : cache.records) {
    const auto fv = dcae::encode_features(model, rec.signal, cfg.dcae.feature_mode, rec.id);
    if (table.x.cols == 0) table.x = boosting::FeatureMatrix(cache.records.size(), fv.values.size());
    table.ids.push_back(rec.id);
    table.labels.push_back(rec.label);
    for (std::size_t f = 0; f < fv.values.size(); ++f)
      table.x.at(table.ids.size() - 1, f) = fv.values[f];
  }
  detail::ensure_output_dir(cfg);
  const fs::path features_path = cfg.output_dir / "features.csv";
  write_features_csv(features_path, table);
  out << "wrote " << table.x.rows << " rows x " << table.x.cols << " features to "
      << features_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train-booster / evaluate
// ---------------------------------------------------------------------------

inline constexpr const char* kAlgoNames[] = {"adaboost", "gbdt-level", "gbdt-leaf"};

inline bool valid_algo(const std::string& algo) {
  for (const char* name : kAlgoNames)
    if (algo == name) return true;
  return false;
}

namespace detail {

struct TrainedBooster {
  boosting::BoostEnsemble ensemble;
  double ttt_s = 0;
};

inline TrainedBooster train_algo(const PipelineConfig& cfg, const std::string& algo,
                                 const SplitView& train) {
  TrainedBooster result;
  metrics::Stopwatch watch;
  if (algo == "adaboost") {
    std::vector<int> pm1;
    for (int y : train.labels01) pm1.push_back(y ? +1 : -1);
    result.ensemble =
        boosting::wrap(boosting::adaboost_train(train.x, pm1, cfg.adaboost_rounds.value_or(100)));
  } else {
    boosting::GbdtParams params;
    if (algo == "gbdt-level")
      params = cfg.gbdt_level.value_or([] {
        boosting::GbdtParams p;
        p.growth = boosting::Growth::Level;
        return p;
      }());
    else
      params = cfg.gbdt_leaf.value_or([] {
        boosting::GbdtParams p;
        p.growth = boosting::Growth::Leaf;
        return p;
      }());
    result.ensemble = boosting::wrap(boosting::gbdt_train(train.x, train.labels01, params));
  }
  result.ttt_s = watch.elapsed_s();
  return result;
}

inline metrics::MetricReport evaluate_ensemble(const boosting::BoostEnsemble& ensemble,
                                               const SplitView& test) {
  std::vector<bool> predictions;
  predictions.reserve(test.x.rows);
  for (std::size_t r = 0; r < test.x.rows; ++r)
    predictions.push_back(boosting::predict_positive(ensemble, test.x.row(r)));
  return metrics::compute_metrics(metrics::accumulate(predictions, test.truths));
}

}  // namespace detail

inline int cmd_train_booster(const PipelineConfig& cfg, const std::string& algo,
                             std::ostream& out, std::ostream& err) {
  if (!valid_algo(algo)) {
    err << "unknown booster algorithm '" << algo << "'\n";
    return kExitMissingInput;
  }
  const fs::path features_path = cfg.output_dir / "features.csv";
  if (!fs::exists(cfg.cache_path) || !fs::exists(features_path)) {
    err << "missing cache or feature file (run convert and extract-features first)\n";
    return kExitMissingInput;
  }
  try {
    const auto cache = io::read_cache(cfg.cache_path);
    const auto table = read_features_csv(features_path);
    const auto train = detail::select_split(table, cache, io::kTrainSplit);
    const auto trained = detail::train_algo(cfg, algo, train);
    detail::ensure_output_dir(cfg);
    const fs::path ensemble_path = cfg.output_dir / detail::ensemble_file_name(algo);
    boosting::save_ensemble(trained.ensemble, ensemble_path);
    out << "trained " << algo << " on " << train.x.rows << " records\n";
    out << "ensemble: " << ensemble_path.string() << "\n";
    out << "TTT: " << metrics::format_hms(trained.ttt_s) << "\n";
    return kExitOk;
  } catch (const boosting::BoostError& e) {
    err << e.what() << "\n";
    return kExitDegenerateInput;
  } catch (const io::CacheError& e) {
    err << e.what() << "\n";
    return kExitParseFailure;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitParseFailure;
  }
}

inline int cmd_evaluate(const PipelineConfig& cfg, const std::string& algo,
                        const fs::path& ensemble_override, std::ostream& out, std::ostream& err) {
  const fs::path features_path = cfg.output_dir / "features.csv";
  const fs::path ensemble_path = ensemble_override.empty()
                                     ? cfg.output_dir / detail::ensemble_file_name(algo)
                                     : ensemble_override;
  if (!fs::exists(cfg.cache_path) || !fs::exists(features_path) || !fs::exists(ensemble_path)) {
    err << "missing cache, feature file or ensemble file\n";
    return kExitMissingInput;
  }
  try {
    const auto cache = io::read_cache(cfg.cache_path);
    const auto table = read_features_csv(features_path);
    const auto test = detail::select_split(table, cache, io::kTestSplit);
    const auto ensemble = boosting::load_ensemble(ensemble_path);
    const std::size_t expected = detail::ensemble_feature_count(ensemble);
    if (expected > table.x.cols ||
        (ensemble.kind == boosting::EnsembleKind::Gbdt && expected != table.x.cols)) {
      err << "shape mismatch: ensemble expects " << expected << " features, feature file has "
          << table.x.cols << "\n";
      return kExitShapeMismatch;
    }
    ReportRow row{algo, detail::evaluate_ensemble(ensemble, test)};
    out << report_header() << "\n" << format_report_row(row) << "\n";
    detail::ensure_output_dir(cfg);
    std::string algo_name = algo;
    for (char& c : algo_name)
      if (c == '-') c = '_';
    write_report_csv(cfg.output_dir / ("eval_" + algo_name + ".csv"), {row});
    return kExitOk;
  } catch (const metrics::MetricError& e) {
    err << e.what() << "\n";
    return kExitDegenerateInput;
  } catch (const io::CacheError& e) {
    err << e.what() << "\n";
    return kExitParseFailure;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitParseFailure;
  }
}

// ---------------------------------------------------------------------------
// run-all: six-row comparison of raw-signal boosters vs DCAE-fed boosters
// ---------------------------------------------------------------------------

inline int cmd_run_all(const PipelineConfig& cfg, std::ostream& out, std::ostream& err) {
  // cache: reuse if present, otherwise convert on the fly
  io::DatasetCache cache;
  if (fs::exists(cfg.cache_path)) {
    try {
      cache = io::read_cache(cfg.cache_path);
    } catch (const io::CacheError& e) {
      err << e.what() << "\n";
      return kExitParseFailure;
    }
  } else {
    const int rc = cmd_convert(cfg, out, err);
    if (rc != kExitOk) return rc;
    cache = io::read_cache(cfg.cache_path);
  }

  // split hygiene: training inputs and the held-out set must not overlap
  std::set<std::string> train_ids, test_ids;
  for (const auto& rec : cache.records)
    (rec.split == io::kTestSplit ? test_ids : train_ids).insert(rec.id);
  for (const auto& id : test_ids)
    if (train_ids.count(id)) {
      err << "split hygiene violation: '" << id << "' in both splits\n";
      return kExitDegenerateInput;
    }
  const std::size_t manifest_train = cache.manifest["train"]["records"].get<std::size_t>();
  if (manifest_train != train_ids.size()) {
    err << "split hygiene violation: manifest train count " << manifest_train
        << " != cache train count " << train_ids.size() << "\n";
    return kExitDegenerateInput;
  }

  const auto train_signals = detail::split_signals(cache, io::kTrainSplit);
  if (train_signals.empty()) {
    err << "training split is empty\n";
    return kExitDegenerateInput;
  }

  // DCAE stage, trained on the training split only
  dcae::OptimizerConfig opt;
  opt.learning_rate = cfg.dcae.learning_rate;
  opt.batch_size = cfg.dcae.batch_size;
  opt.epochs = cfg.dcae.epochs;
  auto model = dcae::build_dcae(cfg.dcae.seed);
  metrics::Stopwatch dcae_watch;
  std::vector<double> loss_log;
  try {
    loss_log = dcae::train_dcae(model, train_signals, opt, cfg.dcae.seed);
  } catch (const dcae::DcaeError& e) {
    err << e.what() << "\n";
    return kExitDegenerateInput;
  }
  const double dcae_ttt = dcae_watch.elapsed_s();
  detail::ensure_output_dir(cfg);
  dcae::save_model(model, cfg.output_dir / "dcae_model.bin");
  {
    std::ofstream loss_csv(cfg.output_dir / "dcae_loss.csv", std::ios::binary | std::ios::trunc);
    loss_csv << "epoch,mean_mse\n";
    char buf[40];
    for (std::size_t i = 0; i < loss_log.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", loss_log[i]);
      loss_csv << (i + 1) << ',' << buf << "\n";
    }
  }

  // features for every record: raw vectors and encoder outputs
  const FeatureTable raw = detail::raw_feature_table(cache);
  FeatureTable encoded;
  for (const auto& rec : cache.records) {
    const auto fv = dcae::encode_features(model, rec.signal, cfg.dcae.feature_mode, rec.id);
    if (encoded.x.cols == 0)
      encoded.x = boosting::FeatureMatrix(cache.records.size(), fv.values.size());
    encoded.ids.push_back(rec.id);
    encoded.labels.push_back(rec.label);
    for (std::size_t f = 0; f < fv.values.size(); ++f)
      encoded.x.at(encoded.ids.size() - 1, f) = fv.values[f];
  }
  write_features_csv(cfg.output_dir / "features.csv", encoded);

  struct RowPlan {
    const char* row_name;
    const char* algo;
    bool use_dcae_features;
    const char* ensemble_suffix;
  };
  const RowPlan plans[] = {
      {"AdaBoost", "adaboost", false, "adaboost_raw"},
      {"D-ADB", "adaboost", true, "adaboost_dcae"},
      {"XGB-style", "gbdt-level", false, "gbdt_level_raw"},
      {"D-XGB", "gbdt-level", true, "gbdt_level_dcae"},
      {"LGBM-style", "gbdt-leaf", false, "gbdt_leaf_raw"},
      {"D-LGB", "gbdt-leaf", true, "gbdt_leaf_dcae"},
  };

  std::vector<ReportRow> rows;
  for (const RowPlan& plan : plans) {
    const bool configured = (std::string(plan.algo) == "adaboost" && cfg.adaboost_rounds) ||
                            (std::string(plan.algo) == "gbdt-level" && cfg.gbdt_level) ||
                            (std::string(plan.algo) == "gbdt-leaf" && cfg.gbdt_leaf);
    if (!configured) {
      err << "warning: booster section for '" << plan.algo << "' missing; skipping row '"
          << plan.row_name << "'\n";
      continue;
    }
    const FeatureTable& table = plan.use_dcae_features ? encoded : raw;
    try {
      const auto train = detail::select_split(table, cache, io::kTrainSplit);
      const auto test = detail::select_split(table, cache, io::kTestSplit);
      const auto trained = detail::train_algo(cfg, plan.algo, train);
      boosting::save_ensemble(trained.ensemble,
                              cfg.output_dir /
                                  ("ensemble_" + std::string(plan.ensemble_suffix) + ".json"));
      ReportRow row{plan.row_name, detail::evaluate_ensemble(trained.ensemble, test)};
      row.report.total_training_time_s = trained.ttt_s;
      rows.push_back(std::move(row));
    } catch (const boosting::BoostError& e) {
      err << "warning: row '" << plan.row_name << "' skipped: " << e.what() << "\n";
    } catch (const metrics::MetricError& e) {
      err << "warning: row '" << plan.row_name << "' skipped: " << e.what() << "\n";
    }
  }
  if (rows.empty()) {
    err << "no evaluable rows\n";
    return kExitDegenerateInput;
  }

  write_report_csv(cfg.output_dir / "report.csv", rows);
  write_report_long_csv(cfg.output_dir / "report_long.csv", rows);
  {
    std::ofstream txt(cfg.output_dir / "report.txt", std::ios::binary | std::ios::trunc);
    txt << report_header() << "\n";
    for (const auto& row : rows) txt << format_report_row(row) << "\n";
    txt << "DCAE training time: " << metrics::format_hms(dcae_ttt) << "\n";
  }

  out << "split hygiene: OK (train=" << train_ids.size() << ", test=" << test_ids.size()
      << ", overlap=0)\n";
  out << report_header() << "\n";
  for (const auto& row : rows) out << format_report_row(row) << "\n";
  out << "DCAE training time: " << metrics::format_hms(dcae_ttt) << "\n";
  return kExitOk;
}

}  // namespace deepboost::pipeline
