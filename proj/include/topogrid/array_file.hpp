#pragma once

// Binary array records.
//
// Layout, all integers little-endian:
//   offset 0   4 bytes   magic "TGAR"
//   offset 4   u8        element width in bytes (1, 2, 4 or 8)
//   offset 5   u8        element kind (0 unsigned, 1 signed)
//   offset 6   u8        rank (0..8)
//   offset 7   u8        format version (1)
//   offset 8   u64       total element count
//   offset 16  rank x u64 extents, axis 1 first
//   then       count elements, axis 1 varying fastest

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "errors.hpp"
#include "labeling.hpp"

namespace topogrid {

namespace fs = std::filesystem;

struct ArrayHeader {
  std::uint8_t width = 4;
  bool is_signed = false;
  std::vector<std::uint64_t> extents;
  std::uint64_t count = 0;

  std::uint64_t data_offset() const { return 16 + 8 * extents.size(); }
};

namespace detail {

inline constexpr char kArrayMagic[4] = {'T', 'G', 'A', 'R'};
inline constexpr std::uint8_t kArrayVersion = 1;

template <class T>
void put_le(char* dst, T value) {
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = char((u >> (8 * i)) & 0xff);
}

template <class T>
T get_le(const char* src) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= U(std::uint8_t(src[i])) << (8 * i);
  return static_cast<T>(u);
}

[[noreturn]] inline void throw_io(const fs::path& path, const std::string& what) {
  throw store_error(path.string() + ": " + what);
}

template <class T>
void encode(std::span<const T> values, std::vector<char>& bytes) {
  bytes.resize(values.size() * sizeof(T));
  if constexpr (std::endian::native == std::endian::little) {
    if (!values.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) put_le(bytes.data() + i * sizeof(T), values[i]);
  }
}

template <class T>
void decode(const char* bytes, std::size_t n, T* out) {
  if constexpr (std::endian::native == std::endian::little) {
    if (n) std::memcpy(out, bytes, n * sizeof(T));
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = get_le<T>(bytes + i * sizeof(T));
  }
}

template <class T>
void check_element(const ArrayHeader& h, const fs::path& path) {
  if (h.width != sizeof(T) || h.is_signed != std::is_signed_v<T>) {
    throw_io(path, "element type mismatch (file has " + std::to_string(int(h.width)) + "-byte " +
                       (h.is_signed ? "signed" : "unsigned") + " elements)");
  }
}

}  // namespace detail

inline ArrayHeader read_array_header(std::istream& in, const fs::path& path) {
  char fixed[16];
  if (!in.read(fixed, 16)) detail::throw_io(path, "truncated array header");
  if (std::memcmp(fixed, detail::kArrayMagic, 4) != 0) detail::throw_io(path, "not an array record");
  if (std::uint8_t(fixed[7]) != detail::kArrayVersion) detail::throw_io(path, "unsupported array version");
  ArrayHeader h;
  h.width = std::uint8_t(fixed[4]);
  h.is_signed = fixed[5] != 0;
  const std::uint8_t rank = std::uint8_t(fixed[6]);
  if (rank > 8) detail::throw_io(path, "array rank too large");
  h.count = detail::get_le<std::uint64_t>(fixed + 8);
  std::vector<char> ext(8 * rank);
  if (rank && !in.read(ext.data(), std::streamsize(ext.size()))) detail::throw_io(path, "truncated extents");
  std::uint64_t product = 1;
  for (std::uint8_t i = 0; i < rank; ++i) {
    h.extents.push_back(detail::get_le<std::uint64_t>(ext.data() + 8 * i));
    product *= h.extents.back();
  }
  if (rank && product != h.count) detail::throw_io(path, "extents do not match element count");
  return h;
}

inline ArrayHeader read_array_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::throw_io(path, "cannot open");
  return read_array_header(in, path);
}

template <class T>
void write_array(const fs::path& path, std::span<const T> values, std::vector<std::uint64_t> extents) {
  static_assert(std::is_integral_v<T>);
  const std::uint64_t product =
      std::accumulate(extents.begin(), extents.end(), std::uint64_t{1}, std::multiplies<>());
  if (product != values.size()) throw std::invalid_argument("write_array: extents do not match data");
  std::vector<char> head(16 + 8 * extents.size());
  std::memcpy(head.data(), detail::kArrayMagic, 4);
  head[4] = char(sizeof(T));
  head[5] = char(std::is_signed_v<T> ? 1 : 0);
  head[6] = char(extents.size());
  head[7] = char(detail::kArrayVersion);
  detail::put_le<std::uint64_t>(head.data() + 8, values.size());
  for (std::size_t i = 0; i < extents.size(); ++i) detail::put_le<std::uint64_t>(head.data() + 16 + 8 * i, extents[i]);
  std::vector<char> body;
  detail::encode(values, body);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) detail::throw_io(path, "cannot create");
  out.write(head.data(), std::streamsize(head.size()));
  out.write(body.data(), std::streamsize(body.size()));
  out.close();
  if (!out) detail::throw_io(path, "write failed");
}

template <class T>
void write_array(const fs::path& path, const std::vector<T>& values, std::vector<std::uint64_t> extents) {
  write_array(path, std::span<const T>(values), std::move(extents));
}

template <class T>
std::vector<T> read_array(const fs::path& path, std::vector<std::uint64_t>* extents = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::throw_io(path, "cannot open");
  const ArrayHeader h = read_array_header(in, path);
  detail::check_element<T>(h, path);
  std::vector<char> bytes(h.count * sizeof(T));
  if (!bytes.empty() && !in.read(bytes.data(), std::streamsize(bytes.size()))) detail::throw_io(path, "truncated data");
  std::vector<T> out(h.count);
  detail::decode(bytes.data(), out.size(), out.data());
  if (extents) *extents = h.extents;
  return out;
}

// Reads `n` consecutive elements starting at element `first`, one seek.
template <class T>
void read_elements(std::ifstream& in, const ArrayHeader& h, const fs::path& path, std::uint64_t first,
                   std::size_t n, T* out) {
  if (first + n > h.count) throw bounds_error(path.string() + ": element range out of bounds");
  in.seekg(std::streamoff(h.data_offset() + first * sizeof(T)));
  std::array<char, 4096> small;
  std::vector<char> big;
  char* buf = small.data();
  if (n * sizeof(T) > small.size()) {
    big.resize(n * sizeof(T));
    buf = big.data();
  }
  if (!in.read(buf, std::streamsize(n * sizeof(T)))) detail::throw_io(path, "read failed");
  detail::decode(buf, n, out);
}

template <class T>
T read_element(const fs::path& path, std::uint64_t index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::throw_io(path, "cannot open");
  const ArrayHeader h = read_array_header(in, path);
  detail::check_element<T>(h, path);
  T value{};
  read_elements(in, h, path, index, 1, &value);
  return value;
}

// --- Segmentations on disk -------------------------------------------------

inline void write_segmentation(const fs::path& path, const SegmentLabelMap& sigma) {
  const auto e = sigma.shape().voxel_extents();
  write_array(path, sigma.voxels().values(), {std::uint64_t(e[0]), std::uint64_t(e[1]), std::uint64_t(e[2])});
}

// A segmentation stored as an array record or as raw little-endian 32-bit
// labels. Blocks are read on demand, so the volume never has to fit in
// memory; concurrent read_block calls are safe.
class VolumeFile {
 public:
  static VolumeFile open_array(const fs::path& path) {
    const ArrayHeader h = read_array_header(path);
    detail::check_element<label_t>(h, path);
    if (h.extents.size() != 3) detail::throw_io(path, "segmentation must be a rank-3 array");
    for (auto e : h.extents)
      if (e == 0 || e > std::uint64_t(INT32_MAX / 2)) detail::throw_io(path, "bad segmentation extent");
    return VolumeFile(path, GridShape(coord_t(h.extents[0]), coord_t(h.extents[1]), coord_t(h.extents[2])),
                      h.data_offset());
  }

  static VolumeFile open_raw(const fs::path& path, const GridShape& shape, int element_width = 4) {
    if (element_width != 4) throw std::invalid_argument("raw segmentations must use 4-byte labels");
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) detail::throw_io(path, "cannot stat");
    if (size != shape.voxel_count() * 4) {
      detail::throw_io(path, "raw file holds " + std::to_string(size) + " bytes, expected " +
                                 std::to_string(shape.voxel_count() * 4));
    }
    return VolumeFile(path, shape, 0);
  }

  const GridShape& shape() const { return shape_; }
  const fs::path& path() const { return path_; }

  template <class Range>
  SegmentLabelMap read_block(const Range& range) const {
    std::ifstream in(path_, std::ios::binary);
    if (!in) detail::throw_io(path_, "cannot open");
    const GridShape sub = range.shape();
    const auto ext = shape_.voxel_extents();
    const std::size_t row = std::size_t(sub.voxels(0));
    std::vector<label_t> labels(sub.voxel_count());
    std::vector<char> bytes(row * 4);
    std::size_t k = 0;
    for (coord_t r3 = range.first[2]; r3 <= range.last[2]; ++r3)
      for (coord_t r2 = range.first[1]; r2 <= range.last[1]; ++r2) {
        const std::uint64_t first = std::uint64_t(range.first[0] - 1) +
                                    std::uint64_t(ext[0]) * (std::uint64_t(r2 - 1) + std::uint64_t(ext[1]) * std::uint64_t(r3 - 1));
        in.seekg(std::streamoff(offset_ + first * 4));
        if (!in.read(bytes.data(), std::streamsize(bytes.size()))) detail::throw_io(path_, "truncated segmentation");
        detail::decode(bytes.data(), row, labels.data() + k);
        k += row;
      }
    try {
      return SegmentLabelMap(sub, std::move(labels));
    } catch (const std::invalid_argument&) {
      detail::throw_io(path_, "segmentation contains label 0");
    }
  }

  SegmentLabelMap read_all() const {
    struct Whole {
      std::array<coord_t, 3> first{1, 1, 1}, last;
      GridShape s;
      GridShape shape() const { return s; }
    } whole{{1, 1, 1}, shape_.voxel_extents(), shape_};
    return read_block(whole);
  }

 private:
  VolumeFile(fs::path path, GridShape shape, std::uint64_t offset)
      : path_(std::move(path)), shape_(shape), offset_(offset) {}

  fs::path path_;
  GridShape shape_;
  std::uint64_t offset_ = 0;
};

}  // namespace topogrid
