#ifndef MLOOK_CHECKPOINT_HPP
#define MLOOK_CHECKPOINT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mlook/nn.hpp"

namespace mlook {

// On-disk model state. Parameters are 32-bit floats; an optional trainer
// section carries Adam moments at full precision so training can resume
// exactly where it stopped.
struct Checkpoint {
    uint32_t version = 1;
    uint64_t step = 0;
    uint64_t seed = 0;
    uint64_t config_hash = 0;
    std::map<std::string, nn::Tensor<float>> params;

    // optional trainer state
    bool has_trainer_state = false;
    int64_t adam_step = 0;
    std::map<std::string, std::vector<double>> adam_m, adam_v;
};

// File layout: magic "MLKW", u32 version, u64 step, u64 seed, u64 config
// hash, u32 param count, then per parameter: u32 name length, name bytes,
// u32 rank, u64 dims, float32 data. An optional trailing "ADAM" section
// holds the optimizer moments.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

template <typename T>
void store_to_checkpoint(const nn::ParamStore<T>& store, Checkpoint& ckpt) {
    ckpt.params.clear();
    for (const auto& [name, p] : store.params) {
        nn::Tensor<float> t;
        t.shape = p->value.shape;
        t.data.resize(p->value.size());
        for (size_t i = 0; i < t.data.size(); ++i)
            t.data[i] = static_cast<float>(p->value.data[i]);
        ckpt.params[name] = std::move(t);
    }
}

template <typename T>
void checkpoint_to_store(const Checkpoint& ckpt, nn::ParamStore<T>& store,
                         const std::string& prefix = "") {
    for (auto& [name, p] : store.params) {
        if (name.rfind(prefix, 0) != 0) continue;
        auto it = ckpt.params.find(name);
        if (it == ckpt.params.end())
            throw std::runtime_error("checkpoint missing parameter " + name);
        if (it->second.shape != p->value.shape)
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        for (size_t i = 0; i < p->value.size(); ++i)
            p->value.data[i] = static_cast<T>(it->second.data[i]);
    }
}

}  // namespace mlook

#endif
