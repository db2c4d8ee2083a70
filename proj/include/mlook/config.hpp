#ifndef MLOOK_CONFIG_HPP
#define MLOOK_CONFIG_HPP

#include <cstdint>
#include <string>

#include "mlook/mlenet.hpp"
#include "mlook/roomsim.hpp"
#include "mlook/training.hpp"

namespace mlook {

// One JSON file drives an entire run. Unknown keys are rejected by name so a
// typo never silently falls back to a default. `hash` is an FNV-1a digest of
// the canonical serialization; it is stamped into datasets and checkpoints so
// mismatched artifacts can be refused.
struct RunConfig {
    uint64_t seed = 0;
    LookDirectionSet looks;
    MlenetConfig mlenet;     // looks/pairs/stft filled from this config
    DatasetRecipe dataset;
    TrainParams train;
    int kws_attn_dim = 128;
    int kws_dense = 64;
    int kws_conv_kernels = 8;
    uint64_t hash = 0;       // computed, not a file key
};

RunConfig default_run_config();

RunConfig load_run_config(const std::string& path);

// FNV-1a over the canonical serialization of everything except `hash`.
uint64_t config_fingerprint(const RunConfig& cfg);

}  // namespace mlook

#endif
