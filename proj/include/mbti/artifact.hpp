#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace mbti {

enum class ArtifactDType : std::uint8_t { f64 = 1, i64 = 2 };

struct ArtifactTensor {
    ArtifactDType dtype = ArtifactDType::f64;
    std::vector<std::uint64_t> dims;
    std::vector<double> f64;
    std::vector<std::int64_t> i64;

    bool operator==(const ArtifactTensor&) const = default;
};

/// Model container: magic "MBTIART\0", u32 format version, u64 metadata
/// length, JSON metadata, u32 tensor count, then per tensor a u32-length
/// name, u8 dtype, u32 rank, u64 dims and the little-endian payload.
/// Matrices are stored row-major.
struct Artifact {
    static constexpr std::uint32_t kVersion = 1;

    nlohmann::json metadata = nlohmann::json::object();
    std::map<std::string, ArtifactTensor> tensors;

    void put(const std::string& name, const Eigen::MatrixXd& m);
    void put(const std::string& name, const std::vector<double>& v);
    void put_ints(const std::string& name, const std::vector<std::int64_t>& v);

    /// Throws SchemaError when the tensor is absent or has the wrong dtype.
    Eigen::MatrixXd matrix(const std::string& name) const;
    std::vector<double> vector(const std::string& name) const;
    std::vector<std::int64_t> ints(const std::string& name) const;
    bool has(const std::string& name) const { return tensors.count(name) != 0; }
};

std::string serialize_artifact(const Artifact& artifact);
/// Throws SchemaError on a bad magic, unsupported version or truncation.
Artifact parse_artifact(std::string_view bytes);

void save_artifact(const Artifact& artifact, const std::filesystem::path& path);
Artifact load_artifact(const std::filesystem::path& path);

} // namespace mbti
