#include "drivemap/tensor_container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

namespace drivemap {

namespace {

constexpr std::uint8_t kMagic[4] = {'L', 'K', 'A', 'C'};
constexpr std::size_t kAlignment = 8;

std::size_t align_up(std::size_t n) {
  return (n + kAlignment - 1) / kAlignment * kAlignment;
}

class ByteWriter {
 public:
  template <class U>
  void put(U value) {
    static_assert(std::is_unsigned_v<U>);
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void pad_to(std::size_t size) {
    bytes_.resize(std::max(bytes_.size(), size), 0);
  }
  std::size_t size() const {
    return bytes_.size();
  }
  std::vector<std::uint8_t>& bytes() {
    return bytes_;
  }
  void patch_u64(std::size_t at, std::uint64_t value) {
    for (std::size_t i = 0; i < 8; ++i) {
      bytes_[at + i] = static_cast<std::uint8_t>(value >> (8 * i));
    }
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class U>
  U get(const std::string& entry, const char* what) {
    static_assert(std::is_unsigned_v<U>);
    require(sizeof(U), entry, what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      value |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(U);
    return value;
  }

  std::string get_string(std::size_t n, const std::string& entry) {
    require(n, entry, "entry name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const {
    return pos_;
  }

 private:
  void require(std::size_t n, const std::string& entry, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(
          entry,
          std::string("truncated header while reading ") + what + " (need " + std::to_string(n) +
              " bytes at offset " + std::to_string(pos_) + ", file has " +
              std::to_string(bytes_.size()) + ")");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <class T>
void append_payload(ByteWriter& w, const std::vector<T>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    w.put_bytes(values.data(), values.size() * sizeof(T));
  } else {
    for (const T& v : values) {
      std::uint8_t raw[sizeof(T)];
      std::memcpy(raw, &v, sizeof(T));
      std::reverse(raw, raw + sizeof(T));
      w.put_bytes(raw, sizeof(T));
    }
  }
}

template <class T>
std::vector<T> decode_payload(const std::uint8_t* src, std::size_t count) {
  std::vector<T> out(count);
  if (count == 0) {
    return out;
  }
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), src, count * sizeof(T));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint8_t raw[sizeof(T)];
      std::memcpy(raw, src + i * sizeof(T), sizeof(T));
      std::reverse(raw, raw + sizeof(T));
      std::memcpy(&out[i], raw, sizeof(T));
    }
  }
  return out;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c >> 5) == 0x6) {
      extra = 1;
    } else if ((c >> 4) == 0xE) {
      extra = 2;
    } else if ((c >> 3) == 0x1E) {
      extra = 3;
    } else {
      return false;
    }
    if (extra > 0 && i + extra >= s.size()) {
      return false;
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) {
        return false;
      }
    }
    i += extra + 1;
  }
  return true;
}

std::uint64_t shape_product(const std::vector<std::uint32_t>& shape) {
  std::uint64_t n = 1;
  for (auto d : shape) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    n *= d;
  }
  return n;
}

} // namespace

std::string_view to_string(DType dtype) {
  switch (dtype) {
    case DType::Float32:
      return "float32";
    case DType::Float64:
      return "float64";
    case DType::Int32:
      return "int32";
  }
  return "unknown";
}

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::Float32:
    case DType::Int32:
      return 4;
    case DType::Float64:
      return 8;
  }
  return 0;
}

DType TensorEntry::dtype() const {
  switch (data.index()) {
    case 0:
      return DType::Float32;
    case 1:
      return DType::Float64;
    default:
      return DType::Int32;
  }
}

std::size_t TensorEntry::element_count() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

void TensorContainer::add(TensorEntry entry) {
  if (entry.name.empty() || entry.name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ParseError(entry.name, "entry name must have 1..65535 bytes");
  }
  if (!valid_utf8(entry.name)) {
    throw ParseError(entry.name, "entry name is not valid UTF-8");
  }
  if (entry.shape.size() > std::numeric_limits<std::uint8_t>::max()) {
    throw ParseError(entry.name, "rank exceeds 255");
  }
  if (contains(entry.name)) {
    throw ParseError(entry.name, "duplicate entry name");
  }
  if (shape_product(entry.shape) != entry.element_count()) {
    throw ParseError(
        entry.name,
        "shape declares " + std::to_string(shape_product(entry.shape)) + " elements but data has " +
            std::to_string(entry.element_count()));
  }
  entries_.push_back(std::move(entry));
}

bool TensorContainer::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const TensorEntry& e) {
    return e.name == name;
  });
}

const TensorEntry& TensorContainer::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) {
      return e;
    }
  }
  throw ParseError(std::string(name), "missing entry");
}

bool TensorContainer::bit_equal(const TensorContainer& other) const {
  if (entries_.size() != other.entries_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.shape != b.shape || a.dtype() != b.dtype() ||
        a.element_count() != b.element_count()) {
      return false;
    }
    const bool same = std::visit(
        [&](const auto& va) {
          using V = std::decay_t<decltype(va)>;
          const auto& vb = std::get<V>(b.data);
          return va.empty() ||
              std::memcmp(va.data(), vb.data(), va.size() * sizeof(typename V::value_type)) == 0;
        },
        a.data);
    if (!same) {
      return false;
    }
  }
  return true;
}

std::vector<std::uint8_t> write_container(const TensorContainer& container) {
  ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kContainerVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(container.entries().size()));

  std::vector<std::size_t> offset_slots;
  for (const auto& e : container.entries()) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.put_bytes(e.name.data(), e.name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(e.dtype()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) {
      w.put<std::uint32_t>(d);
    }
    offset_slots.push_back(w.size());
    w.put<std::uint64_t>(0);
  }

  for (std::size_t i = 0; i < container.entries().size(); ++i) {
    const auto& e = container.entries()[i];
    w.pad_to(align_up(w.size()));
    w.patch_u64(offset_slots[i], w.size());
    std::visit([&](const auto& v) { append_payload(w, v); }, e.data);
  }
  if (!container.empty()) {
    w.pad_to(align_up(w.size()));
  }
  return std::move(w.bytes());
}

TensorContainer read_container(
    std::span<const std::uint8_t> bytes,
    std::vector<std::string>* warnings) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ParseError("", "bad magic: not an LKAC container");
  }
  ByteReader r(bytes.subspan(4));
  const auto version = r.get<std::uint32_t>("", "version");
  if (version != kContainerVersion) {
    throw ParseError("", "unsupported container version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("", "entry count");

  struct Header {
    std::string name;
    DType dtype;
    std::vector<std::uint32_t> shape;
    std::uint64_t offset;
  };
  std::vector<Header> headers;
  headers.reserve(std::min<std::uint32_t>(count, 1u << 16));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string placeholder = "#" + std::to_string(i);
    const auto name_len = r.get<std::uint16_t>(placeholder, "name length");
    Header h;
    h.name = r.get_string(name_len, placeholder);
    const auto code = r.get<std::uint8_t>(h.name, "dtype");
    if (code < 1 || code > 3) {
      throw ParseError(h.name, "dtype mismatch: unknown dtype code " + std::to_string(code));
    }
    h.dtype = static_cast<DType>(code);
    const auto rank = r.get<std::uint8_t>(h.name, "rank");
    for (std::uint8_t k = 0; k < rank; ++k) {
      h.shape.push_back(r.get<std::uint32_t>(h.name, "dims"));
    }
    h.offset = r.get<std::uint64_t>(h.name, "payload offset");
    for (const auto& prev : headers) {
      if (prev.name == h.name) {
        throw ParseError(h.name, "duplicate entry name");
      }
    }
    headers.push_back(std::move(h));
  }

  TensorContainer out;
  std::size_t payload_end = 4 + r.pos();
  for (const auto& h : headers) {
    const std::uint64_t elements = shape_product(h.shape);
    const std::size_t elem_size = dtype_size(h.dtype);
    if (elements > std::numeric_limits<std::uint64_t>::max() / elem_size) {
      throw ParseError(h.name, "declared element count overflows");
    }
    const std::uint64_t nbytes = elements * elem_size;
    if (h.offset % kAlignment != 0) {
      throw ParseError(h.name, "payload offset " + std::to_string(h.offset) + " is not 8-byte aligned");
    }
    if (h.offset > bytes.size() || nbytes > bytes.size() - h.offset) {
      throw ParseError(
          h.name,
          "truncated payload: expected " + std::to_string(nbytes) + " bytes at offset " +
              std::to_string(h.offset) + ", file has " + std::to_string(bytes.size()) + " bytes");
    }
    const std::uint8_t* src = bytes.data() + h.offset;
    TensorEntry e{h.name, h.shape, {}};
    switch (h.dtype) {
      case DType::Float32:
        e.data = decode_payload<float>(src, elements);
        break;
      case DType::Float64:
        e.data = decode_payload<double>(src, elements);
        break;
      case DType::Int32:
        e.data = decode_payload<std::int32_t>(src, elements);
        break;
    }
    out.add(std::move(e));
    payload_end = std::max<std::size_t>(payload_end, h.offset + nbytes);
  }

  const std::size_t padded_end = std::min(align_up(payload_end), bytes.size());
  if (bytes.size() > padded_end && warnings != nullptr) {
    warnings->push_back(
        "ignoring " + std::to_string(bytes.size() - padded_end) + " unknown trailing bytes");
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::random_device rd;
  auto tmp = path;
  tmp += ".tmp" + std::to_string(rd());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw IoError("cannot open '" + tmp.string() + "' for writing");
    }
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) {
      throw IoError("write failed for '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  return std::vector<std::uint8_t>(
      (std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

void save_container(const TensorContainer& container, const std::filesystem::path& path) {
  write_file_atomic(path, write_container(container));
}

TensorContainer load_container(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  const auto bytes = read_file_bytes(path);
  return read_container(bytes, warnings);
}

} // namespace drivemap
