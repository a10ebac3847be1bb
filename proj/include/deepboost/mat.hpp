#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deepboost/common.hpp"

// Reader for the Level-5 MAT container, restricted to what single-lead ECG
// corpora actually ship: one uncompressed numeric matrix per file, int16 or
// double elements. Layout handled here:
//
//   128-byte header: 116 bytes of text, 8 reserved bytes, a 2-byte version
//   (0x0100) and a 2-byte endian indicator ("IM" = little-endian file, "MI"
//   = big-endian).
//
//   Data elements: (u32 type, u32 byte count) tags padded to 8-byte
//   boundaries, with the small-element form packing type, count and data
//   into a single 8-byte block. The one accepted top-level element is type
//   14 (matrix) with sub-elements array-flags (type 6), dimensions (type 5),
//   name (type 1) and numeric data of type 3 (int16) or 9 (double).
//
// Anything else -- compression (type 15), complex data, cells, structs --
// is rejected with the offending type code.

namespace deepboost::io {

class MatError : public Error {
 public:
  enum class Kind { BadHeader, UnsupportedElement, Truncated };
  MatError(Kind kind, const std::string& what, int type_code = -1)
      : Error(what), kind_(kind), type_code_(type_code) {}
  Kind kind() const { return kind_; }
  int type_code() const { return type_code_; }

 private:
  Kind kind_;
  int type_code_;
};

struct RawRecord {
  std::string id;
  std::vector<double> samples;
  int sample_rate_hz = 300;
};

namespace mat_detail {

inline constexpr std::uint32_t kMiInt8 = 1;
inline constexpr std::uint32_t kMiInt16 = 3;
inline constexpr std::uint32_t kMiInt32 = 5;
inline constexpr std::uint32_t kMiUint32 = 6;
inline constexpr std::uint32_t kMiDouble = 9;
inline constexpr std::uint32_t kMiMatrix = 14;
inline constexpr std::uint32_t kMiCompressed = 15;
inline constexpr std::uint32_t kComplexFlag = 0x0800;

// Cursor with the file's byte order baked in.
class Cursor {
 public:
  Cursor(const std::uint8_t* p, std::size_t n, bool little) : p_(p), n_(n), little_(little) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return n_ - pos_; }

  void need(std::size_t n) const {
    if (n_ - pos_ < n)
      throw MatError(MatError::Kind::Truncated, "declared size exceeds remaining bytes");
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  void align8() {
    const std::size_t rem = pos_ % 8;
    if (rem) skip(8 - rem);
  }

  std::uint16_t u16() {
    need(2);
    std::uint16_t v = little_
                          ? static_cast<std::uint16_t>(p_[pos_] | (p_[pos_ + 1] << 8))
                          : static_cast<std::uint16_t>((p_[pos_] << 8) | p_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    if (little_)
      for (int i = 3; i >= 0; --i) v = (v << 8) | p_[pos_ + static_cast<std::size_t>(i)];
    else
      for (int i = 0; i < 4; ++i) v = (v << 8) | p_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    if (little_)
      for (int i = 7; i >= 0; --i) v = (v << 8) | p_[pos_ + static_cast<std::size_t>(i)];
    else
      for (int i = 0; i < 8; ++i) v = (v << 8) | p_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 8;
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  const std::uint8_t* p_;
  std::size_t n_;
  bool little_;
  std::size_t pos_ = 0;
};

struct ElementTag {
  std::uint32_t type = 0;
  std::uint32_t nbytes = 0;
  bool small = false;  // data fits in the second half of the 8-byte tag
};

inline ElementTag read_tag(Cursor& c) {
  ElementTag tag;
  const std::uint32_t raw = c.u32();
  if (raw >> 16) {
    tag.small = true;
    tag.type = raw & 0xFFFF;
    tag.nbytes = raw >> 16;
    if (tag.nbytes > 4)
      throw MatError(MatError::Kind::BadHeader, "small data element longer than 4 bytes");
  } else {
    tag.type = raw;
    tag.nbytes = c.u32();
  }
  return tag;
}

// After a small element, the cursor must land past its fixed 4 data bytes.
inline void finish_small(Cursor& c, std::size_t data_start) {
  const std::size_t consumed = c.pos() - data_start;
  if (consumed > 4) throw MatError(MatError::Kind::BadHeader, "small data element overrun");
  c.skip(4 - consumed);
}

}  // namespace mat_detail

// Parses a complete MAT file image and returns its first numeric matrix as a
// flat sample vector (multi-row matrices flattened row-major). Endianness is
// detected from the header, so the same logical matrix parses identically in
// either byte order.
inline RawRecord parse_mat_record(const std::vector<std::uint8_t>& bytes, const std::string& id) {
  using namespace mat_detail;
  if (bytes.size() < 128)
    throw MatError(MatError::Kind::BadHeader, "file shorter than the 128-byte MAT header");
  const std::uint8_t e0 = bytes[126], e1 = bytes[127];
  bool little;
  if (e0 == 'I' && e1 == 'M')
    little = true;
  else if (e0 == 'M' && e1 == 'I')
    little = false;
  else
    throw MatError(MatError::Kind::BadHeader, "invalid endian indicator");

  Cursor header(bytes.data(), bytes.size(), little);
  header.skip(124);
  const std::uint16_t version = header.u16();
  if (version != 0x0100)
    throw MatError(MatError::Kind::BadHeader, "unsupported MAT version field");

  Cursor c(bytes.data(), bytes.size(), little);
  c.skip(128);
  if (c.remaining() == 0)
    throw MatError(MatError::Kind::Truncated, "no data element after the header");
  const ElementTag top = read_tag(c);
  if (top.small || top.type != kMiMatrix) {
    if (top.type == kMiCompressed)
      throw MatError(MatError::Kind::UnsupportedElement,
                     "compressed data element (type code 15)", 15);
    throw MatError(MatError::Kind::UnsupportedElement,
                   "top-level element is not a numeric matrix (type code " +
                       std::to_string(top.type) + ")",
                   static_cast<int>(top.type));
  }
  c.need(top.nbytes);

  // array flags
  ElementTag flags_tag = read_tag(c);
  if (flags_tag.type != kMiUint32 || flags_tag.nbytes != 8)
    throw MatError(MatError::Kind::BadHeader, "malformed array-flags sub-element");
  const std::uint32_t flags = c.u32();
  c.u32();  // nzmax, unused for dense matrices
  if (flags & kComplexFlag)
    throw MatError(MatError::Kind::UnsupportedElement, "complex matrix data",
                   static_cast<int>(flags & 0xFF));

  // dimensions
  ElementTag dim_tag = read_tag(c);
  if (dim_tag.type != kMiInt32)
    throw MatError(MatError::Kind::BadHeader, "malformed dimensions sub-element");
  if (dim_tag.nbytes != 8)
    throw MatError(MatError::Kind::UnsupportedElement,
                   "only 2-D matrices are supported (got " +
                       std::to_string(dim_tag.nbytes / 4) + " dimensions)",
                   static_cast<int>(dim_tag.type));
  const std::int32_t rows = c.i32();
  const std::int32_t cols = c.i32();
  if (rows < 0 || cols < 0) throw MatError(MatError::Kind::BadHeader, "negative matrix dimension");
  c.align8();

  // array name (normal or small-element form)
  ElementTag name_tag = read_tag(c);
  if (name_tag.type != kMiInt8)
    throw MatError(MatError::Kind::BadHeader, "malformed array-name sub-element");
  if (name_tag.small) {
    const std::size_t start = c.pos();
    c.text(name_tag.nbytes);
    finish_small(c, start);
  } else {
    c.text(name_tag.nbytes);
    c.align8();
  }

  // numeric data (real part)
  ElementTag data_tag = read_tag(c);
  const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (count == 0)
    throw MatError(MatError::Kind::UnsupportedElement, "empty matrix variable",
                   static_cast<int>(data_tag.type));
  std::vector<double> column_major(count);
  if (data_tag.type == kMiInt16) {
    if (data_tag.nbytes < count * 2)
      throw MatError(MatError::Kind::Truncated, "numeric data shorter than the declared shape");
    for (std::size_t i = 0; i < count; ++i) column_major[i] = static_cast<double>(c.i16());
  } else if (data_tag.type == kMiDouble) {
    if (data_tag.nbytes < count * 8)
      throw MatError(MatError::Kind::Truncated, "numeric data shorter than the declared shape");
    for (std::size_t i = 0; i < count; ++i) column_major[i] = c.f64();
  } else {
    throw MatError(MatError::Kind::UnsupportedElement,
                   "unsupported numeric element type (type code " +
                       std::to_string(data_tag.type) + ")",
                   static_cast<int>(data_tag.type));
  }

  RawRecord record;
  record.id = id;
  record.samples.resize(count);
  // MAT stores matrices column-major; emit row-major order
  const auto r_rows = static_cast<std::size_t>(rows);
  const auto r_cols = static_cast<std::size_t>(cols);
  for (std::size_t r = 0; r < r_rows; ++r)
    for (std::size_t col = 0; col < r_cols; ++col)
      record.samples[r * r_cols + col] = column_major[col * r_rows + r];
  return record;
}

}  // namespace deepboost::io
