#pragma once

#include <algorithm>
#include <vector>

#include "deepboost/common.hpp"

namespace deepboost::preprocess {

// Fixed network input length: 30 s at 300 Hz.
inline constexpr int kSignalLength = 9000;

// max == min, so the scaling denominator vanishes. The caller decides what a
// constant record means; the ingest pipeline maps it to all-zeros and warns.
class ConstantSignalError : public Error {
 public:
  ConstantSignalError() : Error("constant signal: max equals min") {}
};

// A normalized, length-fitted record ready for the network. Stored as f32 so
// the binary cache round-trips bit-identically.
struct Signal {
  std::vector<float> values;
};

// out[i] = (x[i] - min) / (max - min). Non-constant input maps onto [0, 1]
// with the extremes hitting 0 and 1 exactly.
inline std::vector<double> min_max_normalize(const std::vector<double>& samples) {
  if (samples.empty()) throw Error("min_max_normalize: empty input");
  auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it, hi = *hi_it;
  if (lo == hi) throw ConstantSignalError();
  const double inv = 1.0 / (hi - lo);
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = (samples[i] - lo) * inv;
  return out;
}

// Truncates to the first `target` samples or pads with zeros. Run after
// normalization so the pad value coincides with the normalized minimum.
inline std::vector<double> fit_length(std::vector<double> samples, int target = kSignalLength) {
  if (samples.empty()) throw Error("fit_length: empty input");
  if (target <= 0) throw Error("fit_length: target must be positive");
  samples.resize(static_cast<std::size_t>(target), 0.0);
  return samples;
}

// normalize + fit + quantize to f32. Throws ConstantSignalError for flat
// records; the caller picks the fallback.
inline Signal make_signal(const std::vector<double>& samples, int target = kSignalLength) {
  std::vector<double> fitted = fit_length(min_max_normalize(samples), target);
  Signal s;
  s.values.reserve(fitted.size());
  for (double v : fitted) s.values.push_back(static_cast<float>(v));
  return s;
}

inline Signal zero_signal(int target = kSignalLength) {
  Signal s;
  s.values.assign(static_cast<std::size_t>(target), 0.0f);
  return s;
}

}  // namespace deepboost::preprocess
