#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "deepboost/common.hpp"
#include "deepboost/mat.hpp"
#include "deepboost/preprocess.hpp"
#include "json.hpp"

// Record ingest (CSV fallback next to the MAT reader), the label index and
// the binary dataset cache with its stratified train/test assignment.

namespace deepboost::io {

inline constexpr std::array<char, 4> kClassTags = {'N', 'A', 'O', '~'};
inline constexpr double kTestFraction = 0.3;
inline constexpr std::uint8_t kTrainSplit = 0;
inline constexpr std::uint8_t kTestSplit = 1;

inline bool is_class_tag(char c) {
  return c == 'N' || c == 'A' || c == 'O' || c == '~';
}

class CsvError : public Error {
 public:
  enum class Kind { NotANumber, Empty };
  CsvError(Kind kind, const std::string& what, int line = 0)
      : Error(what), kind_(kind), line_(line) {}
  Kind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

class LabelError : public Error {
 public:
  enum class Kind { UnknownTag, DuplicateId, BadLine };
  LabelError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class CacheError : public Error {
 public:
  enum class Kind { MissingLabel, Corrupt, VersionMismatch };
  CacheError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    const std::string_view line =
        text.substr(start, end == std::string_view::npos ? text.size() - start : end - start);
    ++line_no;
    fn(line, line_no);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
}

inline double parse_number(std::string_view token, int line_no) {
  token = trim(token);
  double value = 0.0;
  const auto* begin = token.data();
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || token.empty())
    throw CsvError(CsvError::Kind::NotANumber,
                   "line " + std::to_string(line_no) + ": not a number: '" + std::string(token) + "'",
                   line_no);
  return value;
}

}  // namespace detail

// One value per line or comma-separated; blank lines are skipped.
inline RawRecord parse_csv_record(std::string_view text, const std::string& id) {
  RawRecord record;
  record.id = id;
  detail::for_each_line(text, [&](std::string_view line, int line_no) {
    if (detail::trim(line).empty()) return;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = line.find(',', start);
      const std::string_view token =
          line.substr(start, comma == std::string_view::npos ? line.size() - start : comma - start);
      record.samples.push_back(detail::parse_number(token, line_no));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  });
  if (record.samples.empty()) throw CsvError(CsvError::Kind::Empty, "record '" + id + "' is empty");
  return record;
}

struct LabelIndex {
  std::map<std::string, char> entries;
  std::set<char> positive_class{'A'};

  bool is_positive(const std::string& id) const {
    return positive_class.count(entries.at(id)) > 0;
  }
};

// The positive tag set must be a non-empty proper subset of {N, A, O, ~}.
inline void validate_positive_class(const std::set<char>& tags) {
  if (tags.empty()) throw Error("positive class tag set is empty");
  if (tags.size() >= kClassTags.size()) throw Error("positive class tag set covers every tag");
  for (char c : tags)
    if (!is_class_tag(c)) throw Error(std::string("unknown class tag '") + c + "'");
}

// Lines "id,tag" with tags in {N, A, O, ~}; duplicates rejected.
inline LabelIndex load_labels(std::string_view text) {
  LabelIndex index;
  detail::for_each_line(text, [&](std::string_view line, int line_no) {
    line = detail::trim(line);
    if (line.empty()) return;
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos || comma == 0)
      throw LabelError(LabelError::Kind::BadLine,
                       "line " + std::to_string(line_no) + ": expected 'id,tag'");
    const std::string id(detail::trim(line.substr(0, comma)));
    const std::string_view tag_sv = detail::trim(line.substr(comma + 1));
    if (tag_sv.size() != 1 || !is_class_tag(tag_sv[0]))
      throw LabelError(LabelError::Kind::UnknownTag,
                       "line " + std::to_string(line_no) + ": unknown tag '" +
                           std::string(tag_sv) + "'");
    if (!index.entries.emplace(id, tag_sv[0]).second)
      throw LabelError(LabelError::Kind::DuplicateId,
                       "line " + std::to_string(line_no) + ": duplicate id '" + id + "'");
  });
  return index;
}

// Seeded stratified assignment: within each class, a deterministic shuffle
// sends round(fraction * n) samples to the test split, keeping the class
// proportions within one record per class.
inline std::vector<std::uint8_t> stratified_split(const std::vector<std::uint8_t>& labels,
                                                  double test_fraction, std::uint64_t seed) {
  std::vector<std::uint8_t> split(labels.size(), kTrainSplit);
  Rng rng(seed);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if ((labels[i] != 0) == (cls != 0)) ids.push_back(static_cast<std::uint32_t>(i));
    deterministic_shuffle(ids, rng);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(ids.size())));
    for (std::size_t i = 0; i < n_test && i < ids.size(); ++i) split[ids[i]] = kTestSplit;
  }
  return split;
}

struct CachedRecord {
  std::string id;
  std::uint8_t label = 0;  // 1 = positive class
  preprocess::Signal signal;
  std::uint8_t split = kTrainSplit;
};

struct DatasetCache {
  std::vector<CachedRecord> records;
  nlohmann::ordered_json manifest;
};

// Normalizes and length-fits every record, collapses tags to a binary label
// through labels.positive_class and assigns the seeded 70/30 stratified
// split. Constant records become all-zero signals; a note lands in
// `warnings` if given.
inline DatasetCache build_cache(const std::vector<RawRecord>& records, const LabelIndex& labels,
                                std::uint64_t seed, std::vector<std::string>* warnings = nullptr) {
  validate_positive_class(labels.positive_class);
  std::string missing;
  for (const auto& r : records)
    if (!labels.entries.count(r.id)) missing += missing.empty() ? r.id : ", " + r.id;
  if (!missing.empty())
    throw CacheError(CacheError::Kind::MissingLabel, "records missing from label index: " + missing);
  {
    std::set<std::string> seen;
    for (const auto& r : records)
      if (!seen.insert(r.id).second)
        throw CacheError(CacheError::Kind::Corrupt, "duplicate record id '" + r.id + "'");
  }

  DatasetCache cache;
  cache.records.reserve(records.size());
  std::map<char, std::size_t> class_counts{{'N', 0}, {'A', 0}, {'O', 0}, {'~', 0}};
  std::vector<std::uint8_t> bits;
  bits.reserve(records.size());
  for (const auto& r : records) {
    const char tag = labels.entries.at(r.id);
    ++class_counts[tag];
    CachedRecord rec;
    rec.id = r.id;
    rec.label = labels.positive_class.count(tag) ? 1 : 0;
    try {
      rec.signal = preprocess::make_signal(r.samples);
    } catch (const preprocess::ConstantSignalError&) {
      rec.signal = preprocess::zero_signal();
      if (warnings) warnings->push_back("record '" + r.id + "' is constant; cached as all-zeros");
    }
    bits.push_back(rec.label);
    cache.records.push_back(std::move(rec));
  }
  const std::vector<std::uint8_t> split = stratified_split(bits, kTestFraction, seed);
  std::size_t train_n = 0, test_n = 0, train_pos = 0, test_pos = 0;
  for (std::size_t i = 0; i < cache.records.size(); ++i) {
    cache.records[i].split = split[i];
    if (split[i] == kTestSplit) {
      ++test_n;
      test_pos += cache.records[i].label;
    } else {
      ++train_n;
      train_pos += cache.records[i].label;
    }
  }

  nlohmann::ordered_json manifest;
  manifest["split_seed"] = seed;
  manifest["positive_class"] = [&] {
    std::vector<std::string> tags;
    for (char c : labels.positive_class) tags.emplace_back(1, c);
    return tags;
  }();
  manifest["class_counts"] = {{"N", class_counts['N']},
                              {"A", class_counts['A']},
                              {"O", class_counts['O']},
                              {"~", class_counts['~']}};
  manifest["train"] = {{"records", train_n}, {"positive", train_pos}};
  manifest["test"] = {{"records", test_n}, {"positive", test_pos}};
  cache.manifest = std::move(manifest);
  return cache;
}

// -------------------------------------------------------------------------
// Cache file: magic "DBAF", version, count, fixed-length records, then the
// manifest as a length-prefixed JSON blob. Everything little-endian.
// -------------------------------------------------------------------------

inline constexpr std::uint32_t kCacheVersion = 1;

inline std::vector<std::uint8_t> cache_to_bytes(const DatasetCache& cache) {
  ByteWriter w;
  w.text("DBAF");
  w.u32(kCacheVersion);
  w.u32(static_cast<std::uint32_t>(cache.records.size()));
  for (const auto& rec : cache.records) {
    if (rec.signal.values.size() != static_cast<std::size_t>(preprocess::kSignalLength))
      throw Error("cache_to_bytes: signal for '" + rec.id + "' is not length " +
                  std::to_string(preprocess::kSignalLength));
    w.u16(static_cast<std::uint16_t>(rec.id.size()));
    w.text(rec.id);
    w.u8(rec.label);
    for (float v : rec.signal.values) w.f32(v);
    w.u8(rec.split);
  }
  const std::string manifest = cache.manifest.is_null() ? "{}" : cache.manifest.dump();
  w.u32(static_cast<std::uint32_t>(manifest.size()));
  w.text(manifest);
  return w.take();
}

inline DatasetCache cache_from_bytes(const std::vector<std::uint8_t>& bytes) {
  try {
    ByteReader r(bytes);
    if (r.text(4) != "DBAF")
      throw CacheError(CacheError::Kind::Corrupt, "cache file: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kCacheVersion)
      throw CacheError(CacheError::Kind::VersionMismatch,
                       "cache file: unsupported version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    DatasetCache cache;
    cache.records.resize(count);
    for (auto& rec : cache.records) {
      rec.id = r.text(r.u16());
      rec.label = r.u8();
      rec.signal.values.resize(static_cast<std::size_t>(preprocess::kSignalLength));
      for (float& v : rec.signal.values) v = r.f32();
      rec.split = r.u8();
    }
    const std::string manifest_text = r.text(r.u32());
    if (r.remaining() != 0)
      throw CacheError(CacheError::Kind::Corrupt, "cache file: trailing bytes");
    try {
      cache.manifest = nlohmann::ordered_json::parse(manifest_text);
    } catch (const nlohmann::json::exception&) {
      throw CacheError(CacheError::Kind::Corrupt, "cache file: malformed manifest");
    }
    return cache;
  } catch (const TruncatedData&) {
    throw CacheError(CacheError::Kind::Corrupt, "cache file: truncated");
  }
}

inline void write_cache(const DatasetCache& cache, const std::filesystem::path& path) {
  const auto bytes = cache_to_bytes(cache);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("write_cache: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write_cache: write failed for " + path.string());
}

inline DatasetCache read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("read_cache: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return cache_from_bytes(bytes);
}

}  // namespace deepboost::io
