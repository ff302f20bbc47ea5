// SPDX-License-Identifier: Apache-2.0
#include "mctk/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <system_error>

namespace mctk {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'T', 'K'};

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
void put_payload(std::vector<std::uint8_t>& out, const BasicTensor<T>& t) {
  for (const T v : t.data()) {
    if constexpr (std::is_same_v<T, float>) {
      put_le(out, std::bit_cast<std::uint32_t>(v), 4);
    } else if constexpr (std::is_same_v<T, double>) {
      put_le(out, std::bit_cast<std::uint64_t>(v), 8);
    } else {
      put_le(out, v, 4);
    }
  }
}

std::size_t element_size(DType d) { return d == DType::kF64 ? 8 : 4; }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated container: expected ") + what, pos_);
    }
  }

  std::uint64_t le(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
BasicTensor<T> decode_payload(Shape shape, std::span<const std::uint8_t> raw) {
  std::vector<T> data(shape_volume(shape));
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<std::uint64_t>(raw[i * sizeof(T) + b]) << (8 * b);
    if constexpr (std::is_same_v<T, float>) {
      data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(v));
    } else if constexpr (std::is_same_v<T, double>) {
      data[i] = std::bit_cast<double>(v);
    } else {
      data[i] = static_cast<std::uint32_t>(v);
    }
  }
  return BasicTensor<T>(std::move(shape), std::move(data));
}

}  // namespace

DType dtype_of(const AnyTensor& t) { return static_cast<DType>(t.index()); }

std::string dtype_name(DType d) {
  switch (d) {
    case DType::kF32:
      return "f32";
    case DType::kF64:
      return "f64";
    case DType::kU32:
      return "u32";
  }
  return "unknown";
}

void TensorContainer::add(std::string name, AnyTensor tensor) {
  if (name.empty()) throw ArgumentError("container record name must be nonempty");
  if (name.size() > 0xFFFF) throw ArgumentError("container record name longer than 65535 bytes");
  if (contains(name)) throw ArgumentError("duplicate container record name '" + name + "'");
  if (dtype_of(tensor) != dtype_) {
    throw ArgumentError("record '" + name + "' has dtype " + dtype_name(dtype_of(tensor)) + ", container holds " +
                        dtype_name(dtype_));
  }
  const std::size_t rank = std::visit([](const auto& t) { return t.rank(); }, tensor);
  if (rank == 0) throw ArgumentError("record '" + name + "' is a null tensor");
  if (rank > 255) throw ArgumentError("record '" + name + "' rank exceeds 255");
  records_.push_back({std::move(name), std::move(tensor)});
}

bool TensorContainer::contains(const std::string& name) const {
  for (const auto& r : records_) {
    if (r.name == name) return true;
  }
  return false;
}

const AnyTensor& TensorContainer::get(const std::string& name) const {
  for (const auto& r : records_) {
    if (r.name == name) return r.tensor;
  }
  throw FormatError("container has no record named '" + name + "'");
}

std::vector<std::uint8_t> TensorContainer::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kContainerVersion);
  out.push_back(static_cast<std::uint8_t>(dtype_));
  put_le(out, records_.size(), 4);
  for (const auto& r : records_) {
    put_le(out, r.name.size(), 2);
    out.insert(out.end(), r.name.begin(), r.name.end());
    std::visit(
        [&](const auto& t) {
          out.push_back(static_cast<std::uint8_t>(t.rank()));
          for (const auto d : t.shape()) put_le(out, d, 8);
          put_payload(out, t);
        },
        r.tensor);
  }
  return out;
}

TensorContainer TensorContainer::parse(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad magic, not an MCTK container", 0);
  const auto version = in.le(1, "version");
  if (version != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(version), 4);
  }
  const auto dtype_raw = in.le(1, "dtype");
  if (dtype_raw > 2) throw FormatError("unknown dtype code " + std::to_string(dtype_raw), 5);
  const auto dtype = static_cast<DType>(dtype_raw);
  const auto count = in.le(4, "record count");

  TensorContainer c(dtype);
  std::set<std::string> names;
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::size_t record_start = in.offset();
    const auto name_len = in.le(2, "record name length");
    const auto name_bytes = in.take(name_len, "record name");
    std::string name(name_bytes.begin(), name_bytes.end());
    if (name.empty()) throw FormatError("empty record name", record_start);
    if (!names.insert(name).second) throw FormatError("duplicate record name '" + name + "'", record_start);
    const std::size_t rank_at = in.offset();
    const auto rank = in.le(1, "rank");
    if (rank == 0) throw FormatError("record '" + name + "' has rank 0", rank_at);
    Shape shape;
    std::uint64_t volume = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      const std::size_t dim_at = in.offset();
      const auto dim = in.le(8, "dimension");
      if (dim == 0) throw FormatError("record '" + name + "' has a zero dimension", dim_at);
      if (volume > (UINT64_MAX / dim)) throw FormatError("record '" + name + "' volume overflows", dim_at);
      volume *= dim;
      shape.push_back(static_cast<std::size_t>(dim));
    }
    const std::size_t esize = element_size(dtype);
    if (volume > (bytes.size() / esize) + 1) {
      throw FormatError("truncated container: payload of '" + name + "' exceeds file size", in.offset());
    }
    const auto raw = in.take(static_cast<std::size_t>(volume) * esize, "payload");
    switch (dtype) {
      case DType::kF32:
        c.records_.push_back({name, decode_payload<float>(std::move(shape), raw)});
        break;
      case DType::kF64:
        c.records_.push_back({name, decode_payload<double>(std::move(shape), raw)});
        break;
      case DType::kU32:
        c.records_.push_back({name, decode_payload<std::uint32_t>(std::move(shape), raw)});
        break;
    }
  }
  if (!in.done()) throw FormatError("trailing bytes after last record", in.offset());
  return c;
}

void TensorContainer::write(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

TensorContainer TensorContainer::read(const std::filesystem::path& path) { return parse(read_file_bytes(path)); }

bool TensorContainer::bit_equal(const TensorContainer& other) const {
  if (dtype_ != other.dtype_ || records_.size() != other.records_.size()) return false;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& a = records_[i];
    const auto& b = other.records_[i];
    if (a.name != b.name || a.tensor.index() != b.tensor.index()) return false;
    const bool same = std::visit(
        [&](const auto& ta) {
          using TT = std::decay_t<decltype(ta)>;
          return ta.bit_equal(std::get<TT>(b.tensor));
        },
        a.tensor);
    if (!same) return false;
  }
  return true;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
      f.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

}  // namespace mctk
