#include "drugsent/weights.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "drugsent/errors.hpp"

namespace drugsent {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'W', 'T', '0', '0', '0', '1'};

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError(path + ": truncated weights file");
    return v;
}

} // namespace

void write_weights(const std::filesystem::path& path,
                   const std::vector<Parameter>& params) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write weights: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint64_t>(out, params.size());
    for (const Parameter& p : params) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const nn::Tensor& t = p.var.value();
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!out) throw DataError("write failed: " + path.string());
}

std::unordered_map<std::string, nn::Tensor> read_weights(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open weights: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError(path.string() + ": not a weights file");
    }
    const auto count = get<std::uint64_t>(in, path.string());
    std::unordered_map<std::string, nn::Tensor> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = get<std::uint32_t>(in, path.string());
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = get<std::uint32_t>(in, path.string());
        nn::Shape shape(rank);
        for (auto& d : shape) {
            d = static_cast<std::size_t>(get<std::uint64_t>(in, path.string()));
        }
        nn::Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!in) throw DataError(path.string() + ": truncated weights file");
        if (!out.emplace(std::move(name), std::move(t)).second) {
            throw DataError(path.string() + ": duplicate parameter name");
        }
    }
    return out;
}

void load_weights_into(std::vector<Parameter>& params,
                       std::unordered_map<std::string, nn::Tensor> loaded,
                       const std::string& context) {
    for (Parameter& p : params) {
        auto it = loaded.find(p.name);
        if (it == loaded.end()) {
            throw DataError(context + ": missing parameter " + p.name);
        }
        if (it->second.shape() != p.var.value().shape()) {
            throw DataError(context + ": shape mismatch for " + p.name +
                            ": expected " +
                            nn::shape_str(p.var.value().shape()) + ", found " +
                            nn::shape_str(it->second.shape()));
        }
        p.var.value() = std::move(it->second);
        loaded.erase(it);
    }
    if (!loaded.empty()) {
        throw DataError(context + ": unexpected parameter " +
                        loaded.begin()->first);
    }
}

} // namespace drugsent
