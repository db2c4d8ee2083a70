#include "mlook/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mlook {

namespace {

constexpr char kMagic[4] = {'M', 'L', 'K', 'W'};
constexpr char kAdamMagic[4] = {'A', 'D', 'A', 'M'};
constexpr uint32_t kVersion = 1;

template <typename V>
void put(std::ofstream& out, V v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::ifstream& in) {
    V v;
    in.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!in) throw std::runtime_error("checkpoint truncated");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kMagic, 4);
    put<uint32_t>(out, kVersion);
    put<uint64_t>(out, ckpt.step);
    put<uint64_t>(out, ckpt.seed);
    put<uint64_t>(out, ckpt.config_hash);
    put<uint32_t>(out, static_cast<uint32_t>(ckpt.params.size()));
    for (const auto& [name, t] : ckpt.params) {
        put<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) put<uint64_t>(out, static_cast<uint64_t>(d));
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (ckpt.has_trainer_state) {
        out.write(kAdamMagic, 4);
        put<int64_t>(out, ckpt.adam_step);
        put<uint32_t>(out, static_cast<uint32_t>(ckpt.adam_m.size()));
        for (const auto& [name, m] : ckpt.adam_m) {
            const auto& v = ckpt.adam_v.at(name);
            put<uint32_t>(out, static_cast<uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            put<uint64_t>(out, static_cast<uint64_t>(m.size()));
            out.write(reinterpret_cast<const char*>(m.data()),
                      static_cast<std::streamsize>(m.size() * sizeof(double)));
            out.write(reinterpret_cast<const char*>(v.data()),
                      static_cast<std::streamsize>(v.size() * sizeof(double)));
        }
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path + ": not a MLKW checkpoint");
    Checkpoint ckpt;
    ckpt.version = get<uint32_t>(in);
    if (ckpt.version != kVersion)
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(ckpt.version));
    ckpt.step = get<uint64_t>(in);
    ckpt.seed = get<uint64_t>(in);
    ckpt.config_hash = get<uint64_t>(in);
    const uint32_t count = get<uint32_t>(in);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t nlen = get<uint32_t>(in);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        const uint32_t rank = get<uint32_t>(in);
        nn::Tensor<float> t;
        t.shape.resize(rank);
        size_t total = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            t.shape[d] = static_cast<int>(get<uint64_t>(in));
            total *= static_cast<size_t>(t.shape[d]);
        }
        t.data.resize(total);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(total * sizeof(float)));
        if (!in) throw std::runtime_error(path + ": checkpoint truncated");
        ckpt.params[name] = std::move(t);
    }
    // optional trainer section
    if (in.read(magic, 4)) {
        if (std::memcmp(magic, kAdamMagic, 4) != 0)
            throw std::runtime_error(path + ": unknown trailing section");
        ckpt.has_trainer_state = true;
        ckpt.adam_step = get<int64_t>(in);
        const uint32_t n = get<uint32_t>(in);
        for (uint32_t i = 0; i < n; ++i) {
            const uint32_t nlen = get<uint32_t>(in);
            std::string name(nlen, '\0');
            in.read(name.data(), nlen);
            const uint64_t sz = get<uint64_t>(in);
            std::vector<double> m(sz), v(sz);
            in.read(reinterpret_cast<char*>(m.data()),
                    static_cast<std::streamsize>(sz * sizeof(double)));
            in.read(reinterpret_cast<char*>(v.data()),
                    static_cast<std::streamsize>(sz * sizeof(double)));
            if (!in) throw std::runtime_error(path + ": checkpoint truncated");
            ckpt.adam_m[name] = std::move(m);
            ckpt.adam_v[name] = std::move(v);
        }
    }
    return ckpt;
}

}  // namespace mlook
