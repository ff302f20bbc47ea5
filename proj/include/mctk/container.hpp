// SPDX-License-Identifier: Apache-2.0
#pragma once

// MCTK binary tensor container.
//
//   offset  size  field
//   0       4     magic "MCTK"
//   4       1     version (1)
//   5       1     dtype: 0 = f32, 1 = f64, 2 = u32 (applies to every record)
//   6       4     record count, u32 little-endian
//   then per record:
//           2     name length n, u16 LE
//           n     name, UTF-8
//           1     rank r (>= 1)
//           8 r   dimensions, u64 LE
//           ...   payload, row-major, little-endian elements

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mctk/tensor.hpp"

namespace mctk {

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1, kU32 = 2 };

inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 10;

using AnyTensor = std::variant<Tensor, Tensor64, IndexTensor>;

struct NamedTensor {
  std::string name;
  AnyTensor tensor;
};

DType dtype_of(const AnyTensor& t);
std::string dtype_name(DType d);

class TensorContainer {
 public:
  explicit TensorContainer(DType dtype = DType::kF32) : dtype_(dtype) {}

  DType dtype() const noexcept { return dtype_; }
  const std::vector<NamedTensor>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  /// Appends a record. Names must be unique, nonempty and at most 65535 bytes;
  /// the tensor dtype must match the container's.
  void add(std::string name, AnyTensor tensor);

  bool contains(const std::string& name) const;
  const AnyTensor& get(const std::string& name) const;

  template <typename T>
  const BasicTensor<T>& get_as(const std::string& name) const {
    const auto* t = std::get_if<BasicTensor<T>>(&get(name));
    if (t == nullptr) throw FormatError("record '" + name + "' has dtype " + dtype_name(dtype_));
    return *t;
  }

  std::vector<std::uint8_t> serialize() const;
  /// Throws FormatError carrying the byte offset of the first problem.
  static TensorContainer parse(std::span<const std::uint8_t> bytes);

  /// Writes to a temporary sibling then renames, so a failed write leaves no file.
  void write(const std::filesystem::path& path) const;
  static TensorContainer read(const std::filesystem::path& path);

  bool bit_equal(const TensorContainer& other) const;

 private:
  DType dtype_;
  std::vector<NamedTensor> records_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Temp-file-then-rename write.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace mctk
