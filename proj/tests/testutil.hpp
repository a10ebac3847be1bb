#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "deepboost/common.hpp"

// Shared test helpers: scratch directories, finite differences, synthetic
// waveforms and a byte-level MAT writer kept independent of the parser under
// test.

namespace testutil {

inline constexpr double kPi = 3.14159265358979323846;

// Scratch directory under the working directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    static int counter = 0;
    path_ = std::filesystem::path("_test_tmp") /
            (name + "-" + std::to_string(++counter) + "-" + std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

inline double relative_error(double a, double b, double floor_value = 1.0) {
  const double denom = std::max({std::abs(a), std::abs(b), floor_value});
  return std::abs(a - b) / denom;
}

// Central difference of f() along one coordinate, using the actually stored
// perturbed values for the step size.
template <typename F>
double central_difference(F&& f, double& slot, double h) {
  const double x0 = slot;
  slot = x0 + h;
  const double hi = slot;
  const double f_hi = f();
  slot = x0 - h;
  const double lo = slot;
  const double f_lo = f();
  slot = x0;
  return (f_hi - f_lo) / (hi - lo);
}

// ---------------------------------------------------------------------------
// Synthetic waveforms
// ---------------------------------------------------------------------------

// Smooth compressible waveform for memorization runs: two incommensurate
// sines, no noise.
inline std::vector<double> smooth_wave(int len, int variant) {
  std::vector<double> v(static_cast<std::size_t>(len));
  const double f0 = 1.1 + 0.17 * variant;
  const double f1 = 3.7 + 0.31 * variant;
  for (int t = 0; t < len; ++t) {
    const double x = static_cast<double>(t) / 300.0;
    v[static_cast<std::size_t>(t)] =
        std::sin(2.0 * kPi * f0 * x) + 0.4 * std::sin(2.0 * kPi * f1 * x + 0.5 * variant);
  }
  return v;
}

// Two-class waveform: a randomized beat-like base plus, for the positive
// class, an oscillation injected into a fixed window of the record. The
// oscillation is position-locked (fixed frequency and phase) so that
// per-timestep statistics carry the class for raw-sample thresholds, while
// its local frequency content feeds the convolutional features.
inline std::vector<double> class_wave(deepboost::Rng& rng, int len, bool positive) {
  std::vector<double> v(static_cast<std::size_t>(len));
  const double beat_hz = rng.uniform(1.0, 1.6);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const int window_lo = len / 10;
  const int window_hi = (9 * len) / 10;
  for (int t = 0; t < len; ++t) {
    const double x = static_cast<double>(t) / 300.0;
    double s = std::sin(2.0 * kPi * beat_hz * x + phase) +
               0.2 * std::sin(2.0 * kPi * 3.1 * beat_hz * x) +
               0.1 * (rng.uniform() - 0.5);
    if (positive && t >= window_lo && t < window_hi)
      s = 0.5 * s + 1.5 * std::sin(2.0 * kPi * 10.0 * x + 0.7);
    v[static_cast<std::size_t>(t)] = s;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Reference MAT writer. Builds Level-5 files byte by byte, independent of
// the reader implementation, in either byte order.
// ---------------------------------------------------------------------------

struct MatWriteOptions {
  bool little_endian = true;
  bool small_name = false;  // pack the array name into a small data element
  enum class ValueType { Int16, Double } value_type = ValueType::Int16;
};

namespace matw {

inline void put16(std::vector<std::uint8_t>& b, std::uint16_t v, bool little) {
  if (little) {
    b.push_back(static_cast<std::uint8_t>(v & 0xFF));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
  } else {
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
}

inline void put32(std::vector<std::uint8_t>& b, std::uint32_t v, bool little) {
  if (little)
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  else
    for (int i = 3; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put64(std::vector<std::uint8_t>& b, std::uint64_t v, bool little) {
  if (little)
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  else
    for (int i = 7; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void pad_to_8(std::vector<std::uint8_t>& b) {
  while (b.size() % 8 != 0) b.push_back(0);
}

inline std::vector<std::uint8_t> header(bool little) {
  std::vector<std::uint8_t> b;
  std::string text = "MATLAB 5.0 MAT-file, test fixture";
  text.resize(116, ' ');
  b.insert(b.end(), text.begin(), text.end());
  for (int i = 0; i < 8; ++i) b.push_back(0);  // subsystem data offset
  put16(b, 0x0100, little);                    // version
  if (little) {
    b.push_back('I');
    b.push_back('M');
  } else {
    b.push_back('M');
    b.push_back('I');
  }
  return b;
}

}  // namespace matw

// One real matrix variable, values given row-major as matrix[row][col].
inline std::vector<std::uint8_t> write_mat(const std::string& var_name,
                                           const std::vector<std::vector<double>>& matrix,
                                           const MatWriteOptions& opt = {}) {
  using namespace matw;
  const bool le = opt.little_endian;
  const auto rows = static_cast<std::uint32_t>(matrix.size());
  const auto cols = static_cast<std::uint32_t>(matrix.empty() ? 0 : matrix[0].size());

  std::vector<std::uint8_t> body;
  // array flags: class 10 = int16, 6 = double
  put32(body, 6, le);
  put32(body, 8, le);
  put32(body, opt.value_type == MatWriteOptions::ValueType::Int16 ? 10u : 6u, le);
  put32(body, 0, le);
  // dimensions
  put32(body, 5, le);
  put32(body, 8, le);
  put32(body, rows, le);
  put32(body, cols, le);
  // name
  if (opt.small_name) {
    const auto n = static_cast<std::uint32_t>(var_name.size());
    put32(body, (n << 16) | 1u, le);
    for (char c : var_name) body.push_back(static_cast<std::uint8_t>(c));
    for (std::uint32_t i = n; i < 4; ++i) body.push_back(0);
  } else {
    put32(body, 1, le);
    put32(body, static_cast<std::uint32_t>(var_name.size()), le);
    for (char c : var_name) body.push_back(static_cast<std::uint8_t>(c));
    pad_to_8(body);
  }
  // numeric data, column-major
  if (opt.value_type == MatWriteOptions::ValueType::Int16) {
    put32(body, 3, le);
    put32(body, rows * cols * 2, le);
    for (std::uint32_t c = 0; c < cols; ++c)
      for (std::uint32_t r = 0; r < rows; ++r)
        put16(body, static_cast<std::uint16_t>(static_cast<std::int16_t>(matrix[r][c])), le);
    pad_to_8(body);
  } else {
    put32(body, 9, le);
    put32(body, rows * cols * 8, le);
    for (std::uint32_t c = 0; c < cols; ++c)
      for (std::uint32_t r = 0; r < rows; ++r) {
        std::uint64_t bits;
        const double v = matrix[r][c];
        std::memcpy(&bits, &v, 8);
        put64(body, bits, le);
      }
    pad_to_8(body);
  }

  std::vector<std::uint8_t> file = header(le);
  put32(file, 14, le);
  put32(file, static_cast<std::uint32_t>(body.size()), le);
  file.insert(file.end(), body.begin(), body.end());
  return file;
}

// Header plus a single compressed element, which the reader must reject.
inline std::vector<std::uint8_t> write_mat_compressed(bool little_endian = true) {
  using namespace matw;
  std::vector<std::uint8_t> file = header(little_endian);
  put32(file, 15, little_endian);
  put32(file, 8, little_endian);
  for (int i = 0; i < 8; ++i) file.push_back(0x5A);
  return file;
}

}  // namespace testutil
