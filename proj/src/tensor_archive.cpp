#include "mbti/tensor_archive.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "mbti/error.hpp"

namespace mbti {

using nlohmann::json;

std::int64_t Tensor::numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

const Tensor& TensorArchive::get(const std::string& name, const std::vector<std::int64_t>& shape) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError(fmt::format("tensor '{}' missing from weight archive", name));
    if (it->second.shape != shape)
        throw DataError(fmt::format("tensor '{}' has shape [{}], expected [{}]", name,
                                    fmt::join(it->second.shape, ","), fmt::join(shape, ",")));
    return it->second;
}

double half_to_double(std::uint16_t h) {
    const int sign = (h >> 15) & 1;
    const int exp = (h >> 10) & 0x1f;
    const int mant = h & 0x3ff;
    double v;
    if (exp == 0)
        v = std::ldexp(static_cast<double>(mant), -24);
    else if (exp == 31)
        v = mant ? std::nan("") : INFINITY;
    else
        v = std::ldexp(static_cast<double>(mant | 0x400), exp - 25);
    return sign ? -v : v;
}

double bfloat16_to_double(std::uint16_t b) {
    const std::uint32_t bits = static_cast<std::uint32_t>(b) << 16;
    return static_cast<double>(std::bit_cast<float>(bits));
}

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <class T>
T load(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

std::size_t dtype_size(const std::string& dtype) {
    if (dtype == "F64") return 8;
    if (dtype == "F32") return 4;
    if (dtype == "F16" || dtype == "BF16") return 2;
    throw DataError(fmt::format("unsupported tensor dtype '{}'", dtype));
}

} // namespace

TensorArchive parse_tensor_archive(const std::string& bytes) {
    if (bytes.size() < 8) throw DataError("weight archive truncated (no header length)");
    const auto header_len = load<std::uint64_t>(bytes.data());
    if (header_len > bytes.size() - 8) throw DataError("weight archive truncated (header)");
    json header;
    try {
        header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const json::exception& e) {
        throw DataError(fmt::format("weight archive header is not valid JSON: {}", e.what()));
    }
    const std::size_t base = 8 + header_len;
    const std::size_t payload = bytes.size() - base;

    TensorArchive ar;
    for (auto& [name, info] : header.items()) {
        if (name == "__metadata__") {
            for (auto& [k, v] : info.items())
                if (v.is_string()) ar.metadata[k] = v.get<std::string>();
            continue;
        }
        Tensor t;
        try {
            t.shape = info.at("shape").get<std::vector<std::int64_t>>();
            const auto dtype = info.at("dtype").get<std::string>();
            const auto offsets = info.at("data_offsets").get<std::vector<std::size_t>>();
            const std::size_t width = dtype_size(dtype);
            if (offsets.size() != 2 || offsets[0] > offsets[1] || offsets[1] > payload ||
                offsets[1] - offsets[0] != static_cast<std::size_t>(t.numel()) * width)
                throw DataError("bad data_offsets");
            const char* p = bytes.data() + base + offsets[0];
            t.data.resize(static_cast<std::size_t>(t.numel()));
            for (std::size_t i = 0; i < t.data.size(); ++i, p += width) {
                if (dtype == "F64")
                    t.data[i] = load<double>(p);
                else if (dtype == "F32")
                    t.data[i] = load<float>(p);
                else if (dtype == "F16")
                    t.data[i] = half_to_double(load<std::uint16_t>(p));
                else
                    t.data[i] = bfloat16_to_double(load<std::uint16_t>(p));
            }
        } catch (const json::exception& e) {
            throw DataError(fmt::format("tensor '{}': malformed header entry ({})", name, e.what()));
        } catch (const DataError& e) {
            throw DataError(fmt::format("tensor '{}': {}", name, e.what()));
        }
        ar.tensors.emplace(name, std::move(t));
    }
    return ar;
}

TensorArchive read_tensor_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open weight archive {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_tensor_archive(ss.str());
}

void write_tensor_archive(const TensorArchive& ar, const std::filesystem::path& path, bool f64) {
    json header = json::object();
    if (!ar.metadata.empty()) header["__metadata__"] = ar.metadata;
    const std::size_t width = f64 ? 8 : 4;
    std::size_t offset = 0;
    for (const auto& [name, t] : ar.tensors) {
        const std::size_t n = t.data.size() * width;
        header[name] = {{"dtype", f64 ? "F64" : "F32"}, {"shape", t.shape}, {"data_offsets", {offset, offset + n}}};
        offset += n;
    }
    std::string h = header.dump();
    while ((h.size() + 8) % 8 != 0) h.push_back(' ');
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write weight archive {}", path.string()));
    const std::uint64_t len = h.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto& [name, t] : ar.tensors) {
        for (double v : t.data) {
            if (f64) {
                out.write(reinterpret_cast<const char*>(&v), 8);
            } else {
                const float f = static_cast<float>(v);
                out.write(reinterpret_cast<const char*>(&f), 4);
            }
        }
    }
    if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

} // namespace mbti
