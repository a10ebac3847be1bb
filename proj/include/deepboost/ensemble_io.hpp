#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "deepboost/adaboost.hpp"
#include "deepboost/gbdt.hpp"
#include "json.hpp"

// Trained classifier files: UTF-8 JSON with a stable field order so files
// diff cleanly and round-trip byte-identically.

namespace deepboost::boosting {

enum class EnsembleKind { AdaBoost, Gbdt };

struct BoostEnsemble {
  EnsembleKind kind = EnsembleKind::AdaBoost;
  AdaBoostModel adaboost;
  GbdtModel gbdt;
};

inline BoostEnsemble wrap(AdaBoostModel m) {
  BoostEnsemble e;
  e.kind = EnsembleKind::AdaBoost;
  e.adaboost = std::move(m);
  return e;
}

inline BoostEnsemble wrap(GbdtModel m) {
  BoostEnsemble e;
  e.kind = EnsembleKind::Gbdt;
  e.gbdt = std::move(m);
  return e;
}

// Positive-class decision, shared across both kinds.
inline bool predict_positive(const BoostEnsemble& e, const double* x) {
  if (e.kind == EnsembleKind::AdaBoost) return adaboost_predict(e.adaboost, x).label > 0;
  return gbdt_predict(e.gbdt, x).label == 1;
}

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const BoostEnsemble& e) {
  ordered_json j;
  if (e.kind == EnsembleKind::AdaBoost) {
    j["kind"] = "adaboost";
    j["hyperparameters"] = ordered_json{{"rounds", e.adaboost.rounds_requested}};
    ordered_json stumps;
    stumps["feature"] = ordered_json::array();
    stumps["threshold"] = ordered_json::array();
    stumps["polarity"] = ordered_json::array();
    stumps["alpha"] = ordered_json::array();
    for (const Stump& s : e.adaboost.stumps) {
      stumps["feature"].push_back(s.feature);
      stumps["threshold"].push_back(s.threshold);
      stumps["polarity"].push_back(s.polarity);
      stumps["alpha"].push_back(s.alpha);
    }
    j["stumps"] = std::move(stumps);
  } else {
    const GbdtModel& m = e.gbdt;
    j["kind"] = "gbdt";
    j["hyperparameters"] = ordered_json{
        {"trees", m.params.trees},
        {"learning_rate", m.params.learning_rate},
        {"max_depth", m.params.max_depth},
        {"max_leaves", m.params.max_leaves},
        {"lambda", m.params.lambda},
        {"gamma", m.params.gamma},
        {"min_child_weight", m.params.min_child_weight},
        {"growth", m.params.growth == Growth::Level ? "level" : "leaf"},
        {"max_bins", m.params.max_bins},
    };
    j["base_score"] = m.base_score;
    j["binning"] = m.binning.cuts;
    ordered_json trees = ordered_json::array();
    for (const Tree& t : m.trees) {
      ordered_json node_arrays;
      node_arrays["feature"] = ordered_json::array();
      node_arrays["cut_bin"] = ordered_json::array();
      node_arrays["threshold"] = ordered_json::array();
      node_arrays["left"] = ordered_json::array();
      node_arrays["right"] = ordered_json::array();
      node_arrays["leaf_value"] = ordered_json::array();
      for (const TreeNode& n : t.nodes) {
        node_arrays["feature"].push_back(n.feature);
        node_arrays["cut_bin"].push_back(n.cut_bin);
        node_arrays["threshold"].push_back(n.threshold);
        node_arrays["left"].push_back(n.left);
        node_arrays["right"].push_back(n.right);
        node_arrays["leaf_value"].push_back(n.leaf_value);
      }
      trees.push_back(std::move(node_arrays));
    }
    j["trees"] = std::move(trees);
  }
  return j;
}

inline BoostEnsemble ensemble_from_json(const ordered_json& j) {
  BoostEnsemble e;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "adaboost") {
    e.kind = EnsembleKind::AdaBoost;
    e.adaboost.rounds_requested = j.at("hyperparameters").at("rounds").get<int>();
    const auto& stumps = j.at("stumps");
    const std::size_t n = stumps.at("feature").size();
    for (std::size_t i = 0; i < n; ++i) {
      Stump s;
      s.feature = stumps.at("feature").at(i).get<int>();
      s.threshold = stumps.at("threshold").at(i).get<double>();
      s.polarity = stumps.at("polarity").at(i).get<int>();
      s.alpha = stumps.at("alpha").at(i).get<double>();
      e.adaboost.stumps.push_back(s);
    }
  } else if (kind == "gbdt") {
    e.kind = EnsembleKind::Gbdt;
    GbdtModel& m = e.gbdt;
    const auto& hp = j.at("hyperparameters");
    m.params.trees = hp.at("trees").get<int>();
    m.params.learning_rate = hp.at("learning_rate").get<double>();
    m.params.max_depth = hp.at("max_depth").get<int>();
    m.params.max_leaves = hp.at("max_leaves").get<int>();
    m.params.lambda = hp.at("lambda").get<double>();
    m.params.gamma = hp.at("gamma").get<double>();
    m.params.min_child_weight = hp.at("min_child_weight").get<double>();
    m.params.growth = hp.at("growth").get<std::string>() == "leaf" ? Growth::Leaf : Growth::Level;
    m.params.max_bins = hp.at("max_bins").get<int>();
    m.base_score = j.at("base_score").get<double>();
    m.binning.cuts = j.at("binning").get<std::vector<std::vector<double>>>();
    for (const auto& jt : j.at("trees")) {
      Tree t;
      const std::size_t n = jt.at("feature").size();
      for (std::size_t i = 0; i < n; ++i) {
        TreeNode node;
        node.feature = jt.at("feature").at(i).get<int>();
        node.cut_bin = jt.at("cut_bin").at(i).get<int>();
        node.threshold = jt.at("threshold").at(i).get<double>();
        node.left = jt.at("left").at(i).get<int>();
        node.right = jt.at("right").at(i).get<int>();
        node.leaf_value = jt.at("leaf_value").at(i).get<double>();
        t.nodes.push_back(node);
      }
      m.trees.push_back(std::move(t));
    }
  } else {
    throw Error("ensemble file: unknown kind '" + kind + "'");
  }
  return e;
}

inline void save_ensemble(const BoostEnsemble& e, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("save_ensemble: cannot open " + path.string());
  out << to_json(e).dump(2) << "\n";
  if (!out) throw Error("save_ensemble: write failed for " + path.string());
}

inline BoostEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_ensemble: cannot open " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error("ensemble file: " + std::string(ex.what()));
  }
  return ensemble_from_json(j);
}

}  // namespace deepboost::boosting
