#include "mbti/artifact.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "mbti/error.hpp"

namespace mbti {

namespace {

constexpr char kMagic[8] = {'M', 'B', 'T', 'I', 'A', 'R', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <class T>
void put_raw(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <class T>
    T take() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string_view take_bytes(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw SchemaError("model artifact truncated");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

void Artifact::put(const std::string& name, const Eigen::MatrixXd& m) {
    ArtifactTensor t;
    t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    t.f64.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) t.f64.push_back(m(i, j));
    tensors[name] = std::move(t);
}

void Artifact::put(const std::string& name, const std::vector<double>& v) {
    ArtifactTensor t;
    t.dims = {v.size()};
    t.f64 = v;
    tensors[name] = std::move(t);
}

void Artifact::put_ints(const std::string& name, const std::vector<std::int64_t>& v) {
    ArtifactTensor t;
    t.dtype = ArtifactDType::i64;
    t.dims = {v.size()};
    t.i64 = v;
    tensors[name] = std::move(t);
}

Eigen::MatrixXd Artifact::matrix(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end() || it->second.dtype != ArtifactDType::f64)
        throw SchemaError(fmt::format("artifact lacks f64 tensor '{}'", name));
    const auto& t = it->second;
    const auto rows = t.dims.empty() ? 0 : static_cast<Eigen::Index>(t.dims[0]);
    const auto cols = t.dims.size() < 2 ? 1 : static_cast<Eigen::Index>(t.dims[1]);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = t.f64[static_cast<std::size_t>(i * cols + j)];
    return m;
}

std::vector<double> Artifact::vector(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end() || it->second.dtype != ArtifactDType::f64)
        throw SchemaError(fmt::format("artifact lacks f64 tensor '{}'", name));
    return it->second.f64;
}

std::vector<std::int64_t> Artifact::ints(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end() || it->second.dtype != ArtifactDType::i64)
        throw SchemaError(fmt::format("artifact lacks i64 tensor '{}'", name));
    return it->second.i64;
}

std::string serialize_artifact(const Artifact& a) {
    std::string out(kMagic, sizeof kMagic);
    put_raw<std::uint32_t>(out, Artifact::kVersion);
    const std::string meta = a.metadata.dump();
    put_raw<std::uint64_t>(out, meta.size());
    out += meta;
    put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(a.tensors.size()));
    for (const auto& [name, t] : a.tensors) {
        put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_raw<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
        put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) put_raw<std::uint64_t>(out, d);
        if (t.dtype == ArtifactDType::f64)
            for (double v : t.f64) put_raw(out, v);
        else
            for (auto v : t.i64) put_raw(out, v);
    }
    return out;
}

Artifact parse_artifact(std::string_view bytes) {
    Reader r(bytes);
    if (r.take_bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
        throw SchemaError("not a model artifact (bad magic)");
    const auto version = r.take<std::uint32_t>();
    if (version != Artifact::kVersion) throw SchemaError(fmt::format("unsupported artifact version {}", version));
    Artifact a;
    const auto meta_len = r.take<std::uint64_t>();
    try {
        a.metadata = nlohmann::json::parse(r.take_bytes(static_cast<std::size_t>(meta_len)));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(fmt::format("artifact metadata is not valid JSON: {}", e.what()));
    }
    const auto count = r.take<std::uint32_t>();
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto name_len = r.take<std::uint32_t>();
        std::string name(r.take_bytes(name_len));
        ArtifactTensor t;
        const auto dtype = r.take<std::uint8_t>();
        if (dtype != 1 && dtype != 2) throw SchemaError(fmt::format("tensor '{}': unknown dtype {}", name, dtype));
        t.dtype = static_cast<ArtifactDType>(dtype);
        const auto rank = r.take<std::uint32_t>();
        std::uint64_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            t.dims.push_back(r.take<std::uint64_t>());
            n *= t.dims.back();
        }
        if (n > bytes.size()) throw SchemaError(fmt::format("tensor '{}': implausible size", name));
        if (t.dtype == ArtifactDType::f64) {
            t.f64.resize(n);
            for (auto& v : t.f64) v = r.take<double>();
        } else {
            t.i64.resize(n);
            for (auto& v : t.i64) v = r.take<std::int64_t>();
        }
        a.tensors.emplace(std::move(name), std::move(t));
    }
    if (!r.done()) throw SchemaError("trailing bytes after model artifact");
    return a;
}

void save_artifact(const Artifact& artifact, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
    const std::string bytes = serialize_artifact(artifact);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

Artifact load_artifact(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open model artifact {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_artifact(ss.str());
}

} // namespace mbti
