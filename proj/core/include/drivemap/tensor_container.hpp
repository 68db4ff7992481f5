#pragma once

// Little-endian chunked tensor archive (".lka").
//
// Layout:
//   "LKAC" | u32 version (=1) | u32 entry count
//   per entry: u16 name length | name bytes (UTF-8) | u8 dtype | u8 rank | u32 dims[rank] | u64 payload offset
//   payloads, each starting on an 8-byte boundary (offsets are absolute)
//
// Payload byte counts are implied by dtype and dims. Bytes past the last payload are ignored.

#include "drivemap/errors.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace drivemap {

enum class DType : std::uint8_t {
  Float32 = 1,
  Float64 = 2,
  Int32 = 3,
};

std::string_view to_string(DType dtype);
std::size_t dtype_size(DType dtype);

template <class T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() {
  return DType::Float32;
}
template <>
constexpr DType dtype_of<double>() {
  return DType::Float64;
}
template <>
constexpr DType dtype_of<std::int32_t>() {
  return DType::Int32;
}

struct TensorEntry {
  using Storage = std::variant<std::vector<float>, std::vector<double>, std::vector<std::int32_t>>;

  std::string name;
  std::vector<std::uint32_t> shape;
  Storage data;

  DType dtype() const;
  std::size_t element_count() const;

  /// Typed view of the payload; throws ParseError naming this entry on dtype mismatch.
  template <class T>
  const std::vector<T>& values() const {
    if (const auto* v = std::get_if<std::vector<T>>(&data)) {
      return *v;
    }
    throw ParseError(
        name,
        "dtype mismatch: stored " + std::string(to_string(dtype())) + ", requested " +
            std::string(to_string(dtype_of<T>())));
  }
};

class TensorContainer {
 public:
  /// Appends an entry. Throws ParseError on a duplicate name or when the data length
  /// disagrees with the product of `shape`.
  void add(TensorEntry entry);

  template <class T>
  void add(std::string name, std::vector<std::uint32_t> shape, std::vector<T> data) {
    add(TensorEntry{std::move(name), std::move(shape), std::move(data)});
  }

  bool contains(std::string_view name) const;
  const TensorEntry& at(std::string_view name) const;

  template <class T>
  const std::vector<T>& values(std::string_view name) const {
    return at(name).values<T>();
  }

  const std::vector<TensorEntry>& entries() const noexcept {
    return entries_;
  }
  bool empty() const noexcept {
    return entries_.empty();
  }

  /// Entry-by-entry comparison of names, shapes, dtypes and raw payload bytes.
  bool bit_equal(const TensorContainer& other) const;

 private:
  std::vector<TensorEntry> entries_;
};

inline constexpr std::uint32_t kContainerVersion = 1;

std::vector<std::uint8_t> write_container(const TensorContainer& container);

/// Parses container bytes. Non-fatal anomalies (trailing bytes) are appended to `warnings`
/// when provided.
TensorContainer read_container(
    std::span<const std::uint8_t> bytes,
    std::vector<std::string>* warnings = nullptr);

/// Writes through a temporary sibling file and renames it into place.
void save_container(const TensorContainer& container, const std::filesystem::path& path);
TensorContainer load_container(
    const std::filesystem::path& path,
    std::vector<std::string>* warnings = nullptr);

/// Atomic whole-file write shared by the binary and text writers.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

} // namespace drivemap
