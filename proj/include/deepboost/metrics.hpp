#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "deepboost/common.hpp"

namespace deepboost::metrics {

class MetricError : public Error {
 public:
  enum class Kind { LengthMismatch, Undefined };
  MetricError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
};

// Counts prediction/truth pairs; `true` marks the configured positive class.
inline ConfusionMatrix accumulate(const std::vector<bool>& predictions,
                                  const std::vector<bool>& truths) {
  if (predictions.size() != truths.size())
    throw MetricError(MetricError::Kind::LengthMismatch,
                      "accumulate: prediction/truth length mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (truths[i])
      predictions[i] ? ++cm.tp : ++cm.fn;
    else
      predictions[i] ? ++cm.fp : ++cm.tn;
  }
  return cm;
}

struct MetricReport {
  double accuracy = 0;
  double sensitivity = 0;
  double precision = 0;
  double f1 = 0;
  double total_training_time_s = 0;
};

inline double f1_score(double precision, double sensitivity) {
  if (precision + sensitivity == 0.0)
    throw MetricError(MetricError::Kind::Undefined, "undefined metric: f1 (precision + sensitivity is zero)");
  return 2.0 * precision * sensitivity / (precision + sensitivity);
}

// accuracy = (TP+TN)/total, sensitivity = TP/(TP+FN), precision = TP/(TP+FP),
// F1 = harmonic mean of precision and sensitivity. A zero denominator raises
// MetricError naming the metric; it never silently maps to 0.
inline MetricReport compute_metrics(const ConfusionMatrix& cm) {
  MetricReport r;
  if (cm.total() == 0)
    throw MetricError(MetricError::Kind::Undefined, "undefined metric: accuracy (no samples)");
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fn == 0)
    throw MetricError(MetricError::Kind::Undefined, "undefined metric: sensitivity (TP + FN is zero)");
  r.sensitivity = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  if (cm.tp + cm.fp == 0)
    throw MetricError(MetricError::Kind::Undefined, "undefined metric: precision (TP + FP is zero)");
  r.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  r.f1 = f1_score(r.precision, r.sensitivity);
  return r;
}

// Monotonic wall-clock timer for training-time reporting.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_s() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// H:MM:SS, hours unpadded: 244 -> "0:04:04", 7340 -> "2:02:20".
inline std::string format_hms(double seconds) {
  if (seconds < 0) seconds = 0;
  const auto total = static_cast<long long>(seconds);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld:%02lld:%02lld", total / 3600, (total / 60) % 60,
                total % 60);
  return buf;
}

}  // namespace deepboost::metrics
