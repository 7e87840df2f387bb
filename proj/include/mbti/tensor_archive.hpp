#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mbti {

/// Dense tensor held in double precision, row-major.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    std::int64_t numel() const;
};

/// Named-tensor archive in the safetensors layout: an 8-byte little-endian
/// header length, a JSON header mapping names to {dtype, shape,
/// data_offsets}, then the raw little-endian payload. F16, BF16, F32 and F64
/// are accepted on read.
struct TensorArchive {
    std::map<std::string, Tensor> tensors;
    std::map<std::string, std::string> metadata;

    bool contains(const std::string& name) const { return tensors.count(name) != 0; }
    /// Throws DataError naming the tensor when it is absent or its shape differs.
    const Tensor& get(const std::string& name, const std::vector<std::int64_t>& shape) const;
};

TensorArchive read_tensor_archive(const std::filesystem::path& path);
TensorArchive parse_tensor_archive(const std::string& bytes);
/// Writes every tensor as F32 (or F64 when `f64`).
void write_tensor_archive(const TensorArchive& archive, const std::filesystem::path& path, bool f64 = false);

double half_to_double(std::uint16_t bits);
double bfloat16_to_double(std::uint16_t bits);

} // namespace mbti
