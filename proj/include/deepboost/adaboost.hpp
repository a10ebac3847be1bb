#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "deepboost/common.hpp"

namespace deepboost::boosting {

class BoostError : public Error {
 public:
  enum class Kind { SingleClassInput, NonFiniteScore, EmptyMatrix };
  BoostError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Row-major sample matrix: rows = samples, cols = features.
struct FeatureMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
};

// Split midpoint that is guaranteed to separate a < b under a "v <= cut goes
// left" rule even when (a+b)/2 rounds up to b.
inline double split_midpoint(double a, double b) {
  double m = a + (b - a) * 0.5;
  if (!(m < b)) m = a;
  if (m < a) m = a;
  return m;
}

// -------------------------------------------------------------------------
// Discrete AdaBoost over depth-1 trees
// -------------------------------------------------------------------------

struct Stump {
  int feature = 0;
  double threshold = 0.0;
  int polarity = 1;  // +1: predict +1 above the threshold; -1: inverted
  double alpha = 0.0;

  int predict(const double* x) const {
    return x[feature] > threshold ? polarity : -polarity;
  }
};

struct AdaBoostModel {
  std::vector<Stump> stumps;
  int rounds_requested = 0;
};

// Per-round view handed to the observer after the weight update.
struct AdaBoostRound {
  int round = 0;
  double epsilon = 0.0;
  double alpha = 0.0;
  const std::vector<double>& weights;
};

using AdaBoostObserver = std::function<void(const AdaBoostRound&)>;

// A stump with zero weighted error would get an unbounded vote; cap it as if
// the error were this small.
inline constexpr double kMinStumpError = 1e-10;

namespace detail {

struct StumpSearch {
  bool found = false;
  int feature = 0;
  double threshold = 0.0;
  int polarity = 1;
  double error = std::numeric_limits<double>::infinity();
};

// Exhaustive weighted search over every (feature, boundary, polarity).
// Candidate thresholds are midpoints between consecutive distinct values;
// ties in error keep the lowest feature, then lowest threshold, then
// polarity +1.
inline StumpSearch best_stump(const FeatureMatrix& x, const std::vector<int>& y,
                              const std::vector<double>& w,
                              const std::vector<std::vector<std::uint32_t>>& sorted_ids) {
  StumpSearch best;
  double weight_pos = 0.0, weight_neg = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] > 0 ? weight_pos : weight_neg) += w[i];

  for (std::size_t f = 0; f < x.cols; ++f) {
    const auto& order = sorted_ids[f];
    double left_pos = 0.0, left_neg = 0.0;
    for (std::size_t p = 0; p + 1 < order.size(); ++p) {
      const std::uint32_t i = order[p];
      (y[i] > 0 ? left_pos : left_neg) += w[i];
      const double v = x.at(i, f);
      const double v_next = x.at(order[p + 1], f);
      if (v == v_next) continue;
      // polarity +1 predicts +1 strictly above the threshold
      const double err_pos = left_pos + (weight_neg - left_neg);
      const double err_neg = 1.0 - err_pos;
      const double threshold = split_midpoint(v, v_next);
      if (err_pos < best.error) {
        best = {true, static_cast<int>(f), threshold, +1, err_pos};
      }
      if (err_neg < best.error) {
        best = {true, static_cast<int>(f), threshold, -1, err_neg};
      }
    }
  }
  return best;
}

}  // namespace detail

// Discrete two-class AdaBoost: per round fit the best stump under the current
// weights, set alpha = 0.5*ln((1-eps)/eps), reweight
// w_i *= exp(-alpha*y_i*h(x_i)) and renormalize. Stops early when the best
// stump is no better than chance (eps >= 0.5) or perfect (eps == 0, kept with
// a capped alpha).
inline AdaBoostModel adaboost_train(const FeatureMatrix& x, const std::vector<int>& y, int rounds,
                                    const AdaBoostObserver& observer = {}) {
  if (x.rows == 0 || x.cols == 0)
    throw BoostError(BoostError::Kind::EmptyMatrix, "adaboost_train: empty feature matrix");
  if (y.size() != x.rows) throw Error("adaboost_train: label count mismatch");
  if (rounds < 1) throw Error("adaboost_train: rounds must be >= 1");
  const bool has_pos = std::any_of(y.begin(), y.end(), [](int v) { return v > 0; });
  const bool has_neg = std::any_of(y.begin(), y.end(), [](int v) { return v <= 0; });
  if (!has_pos || !has_neg)
    throw BoostError(BoostError::Kind::SingleClassInput,
                     "adaboost_train: both classes required in the training set");

  // per-feature sample order, computed once
  std::vector<std::vector<std::uint32_t>> sorted_ids(x.cols);
  for (std::size_t f = 0; f < x.cols; ++f) {
    auto& order = sorted_ids[f];
    order.resize(x.rows);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x.at(a, f) < x.at(b, f); });
  }

  AdaBoostModel model;
  model.rounds_requested = rounds;
  std::vector<double> w(x.rows, 1.0 / static_cast<double>(x.rows));
  for (int round = 0; round < rounds; ++round) {
    detail::StumpSearch s = detail::best_stump(x, y, w, sorted_ids);
    if (!s.found || s.error >= 0.5) break;  // no stump better than chance

    Stump stump;
    stump.feature = s.feature;
    stump.threshold = s.threshold;
    stump.polarity = s.polarity;
    const double eps = std::max(s.error, kMinStumpError);
    stump.alpha = 0.5 * std::log((1.0 - eps) / eps);
    model.stumps.push_back(stump);

    double sum = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      const int h = stump.predict(x.row(i));
      w[i] *= std::exp(-stump.alpha * y[i] * h);
      sum += w[i];
    }
    for (double& wi : w) wi /= sum;

    if (observer) observer(AdaBoostRound{round + 1, s.error, stump.alpha, w});
    if (s.error == 0.0) break;  // perfect stump, nothing left to reweight
  }
  return model;
}

struct AdaBoostPrediction {
  double score = 0.0;
  int label = +1;  // sign of the score; exact ties resolve to +1
};

inline AdaBoostPrediction adaboost_predict(const AdaBoostModel& model, const double* x) {
  AdaBoostPrediction p;
  for (const Stump& s : model.stumps) p.score += s.alpha * s.predict(x);
  p.label = p.score >= 0.0 ? +1 : -1;
  return p;
}

}  // namespace deepboost::boosting
