#pragma once

// File formats: the RGT1 tensor container, CSV tables and binary PGM images.
//
// RGT1 layout (little-endian):
//   "RGT1" | u32 count | count x { u16 name_len | name | u8 dtype | u8 rank |
//                                  rank x u32 dim | row-major payload }
// dtype 0 is f64 and 1 is f32.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include "rgc/errors.hpp"
#include "rgc/tensor.hpp"

namespace rgc {

static_assert(std::endian::native == std::endian::little, "RGT1 encoding assumes a little-endian host");

using Bytes = std::vector<std::uint8_t>;

inline Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Writes to a sibling temporary file and renames it over path.
inline void write_file_atomic(const std::string& path, const void* data, std::size_t size) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp + "' for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw DataError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

inline void write_file_atomic(const std::string& path, const Bytes& b) { write_file_atomic(path, b.data(), b.size()); }
inline void write_file_atomic(const std::string& path, const std::string& s) { write_file_atomic(path, s.data(), s.size()); }

// ---------------------------------------------------------------------------
// RGT1

enum class DType : std::uint8_t { f64 = 0, f32 = 1 };

struct NamedTensor {
  std::string name;
  std::variant<Tensor<double>, Tensor<float>> tensor;

  DType dtype() const { return tensor.index() == 0 ? DType::f64 : DType::f32; }
  const Shape& shape() const {
    return std::visit([](const auto& t) -> const Shape& { return t.shape(); }, tensor);
  }
  /// Values widened to double (exact for both dtypes).
  Tensor<double> as_double() const {
    if (tensor.index() == 0) return std::get<0>(tensor);
    return std::get<1>(tensor).template cast<double>();
  }
};

namespace detail {

template <typename U>
void put(Bytes& b, U v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  b.insert(b.end(), p, p + sizeof(U));
}

struct Reader {
  const Bytes& b;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (b.size() - pos < n) throw FormatError(std::string("truncated ") + what, pos);
  }
  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, b.data() + pos, sizeof(U));
    pos += sizeof(U);
    return v;
  }
};

template <typename T>
Tensor<T> read_payload(Reader& r, Shape shape) {
  const std::size_t n = numel(shape);
  if (n > (r.b.size() - r.pos) / sizeof(T)) throw FormatError("truncated payload", r.pos);
  std::vector<T> v(n);
  if (n) std::memcpy(v.data(), r.b.data() + r.pos, n * sizeof(T));
  r.pos += n * sizeof(T);
  return Tensor<T>(std::move(shape), std::move(v));
}

}  // namespace detail

inline Bytes encode_rgt1(const std::vector<NamedTensor>& items) {
  Bytes b{'R', 'G', 'T', '1'};
  detail::put<std::uint32_t>(b, static_cast<std::uint32_t>(items.size()));
  std::set<std::string> seen;
  for (const auto& it : items) {
    if (it.name.empty() || it.name.size() > 64) throw DataError("tensor name must be 1..64 bytes: '" + it.name + "'");
    for (unsigned char c : it.name)
      if (c < 0x20 || c > 0x7e) throw DataError("tensor name must be printable ASCII: '" + it.name + "'");
    if (!seen.insert(it.name).second) throw DataError("duplicate tensor name '" + it.name + "'");
    detail::put<std::uint16_t>(b, static_cast<std::uint16_t>(it.name.size()));
    b.insert(b.end(), it.name.begin(), it.name.end());
    b.push_back(static_cast<std::uint8_t>(it.dtype()));
    const Shape& s = it.shape();
    if (s.size() > 255) throw DataError("tensor rank above 255");
    b.push_back(static_cast<std::uint8_t>(s.size()));
    for (auto d : s) {
      if (d > 0xffffffffu) throw DataError("tensor dimension exceeds u32");
      detail::put<std::uint32_t>(b, static_cast<std::uint32_t>(d));
    }
    std::visit(
        [&](const auto& t) {
          const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
          b.insert(b.end(), p, p + t.size() * sizeof(*t.data()));
        },
        it.tensor);
  }
  return b;
}

inline std::vector<NamedTensor> decode_rgt1(const Bytes& b) {
  detail::Reader r{b};
  if (b.size() < 4 || std::memcmp(b.data(), "RGT1", 4) != 0) throw FormatError("bad magic", 0);
  r.pos = 4;
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>("name length");
    r.need(len, "name");
    std::string name(reinterpret_cast<const char*>(b.data() + r.pos), len);
    r.pos += len;
    const std::size_t dtype_at = r.pos;
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype > 1) throw FormatError("unknown dtype " + std::to_string(dtype), dtype_at);
    const auto rank = r.get<std::uint8_t>("rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>("dims");
    if (dtype == 0)
      out.push_back({std::move(name), detail::read_payload<double>(r, std::move(shape))});
    else
      out.push_back({std::move(name), detail::read_payload<float>(r, std::move(shape))});
  }
  if (r.pos != b.size()) throw FormatError("trailing bytes after last tensor", r.pos);
  return out;
}

inline void write_rgt1(const std::string& path, const std::vector<NamedTensor>& items) {
  write_file_atomic(path, encode_rgt1(items));
}

inline std::vector<NamedTensor> read_rgt1(const std::string& path) { return decode_rgt1(read_file(path)); }

inline const NamedTensor& find_tensor(const std::vector<NamedTensor>& items, const std::string& name) {
  for (const auto& t : items)
    if (t.name == name) return t;
  throw DataError("tensor '" + name + "' not found in container");
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest round-trip decimal form ("0.1", "1e-07", "-3").
inline std::string format_number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> row) {
    if (row.size() != header_.size())
      throw ContractError("csv: row has " + std::to_string(row.size()) + " fields, header has " +
                          std::to_string(header_.size()));
    rows_.push_back(std::move(row));
  }

  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::vector<std::string>>& data() const { return rows_; }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        out += csv_field(r[i]);
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  void write(const std::string& path) const { write_file_atomic(path, str()); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// ---------------------------------------------------------------------------
// PGM

/// 8-bit binary PGM of a 2D tensor (rows = axis 0), min-max scaled to 0..255.
/// A constant image maps to 128.
template <typename T>
Bytes encode_pgm(const Tensor<T>& img) {
  if (img.rank() != 2) throw ShapeError("pgm: expected a 2D tensor, got " + shape_str(img.shape()));
  double lo = 0, hi = 0;
  bool first = true;
  for (auto v : img.values()) {
    if (!std::isfinite(static_cast<double>(v))) throw DataError("pgm: non-finite pixel value");
    const double d = static_cast<double>(v);
    if (first || d < lo) lo = d;
    if (first || d > hi) hi = d;
    first = false;
  }
  const std::string head = "P5\n" + std::to_string(img.dim(1)) + " " + std::to_string(img.dim(0)) + "\n255\n";
  Bytes b(head.begin(), head.end());
  for (auto v : img.values()) {
    if (hi == lo) {
      b.push_back(128);
      continue;
    }
    const double s = (static_cast<double>(v) - lo) / (hi - lo) * 255.0;
    b.push_back(static_cast<std::uint8_t>(std::lround(s)));
  }
  return b;
}

template <typename T>
void export_pgm(const Tensor<T>& img, const std::string& path) {
  write_file_atomic(path, encode_pgm(img));
}

/// Slice of a [n0, n1, n2] grid at fixed index k on the last axis.
template <typename T>
Tensor<T> slice_last_axis(const Tensor<T>& grid, std::size_t k) {
  if (grid.rank() != 3 || k >= grid.dim(2)) throw ShapeError("slice_last_axis: expected 3D grid and valid index");
  const std::size_t n0 = grid.dim(0), n1 = grid.dim(1), n2 = grid.dim(2);
  std::vector<T> out(n0 * n1);
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) out[i * n1 + j] = grid[(i * n1 + j) * n2 + k];
  return Tensor<T>(Shape{n0, n1}, std::move(out));
}

}  // namespace rgc
