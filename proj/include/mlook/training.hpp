#ifndef MLOOK_TRAINING_HPP
#define MLOOK_TRAINING_HPP

#include <optional>
#include <string>

#include "mlook/mlenet.hpp"
#include "mlook/roomsim.hpp"

namespace mlook {

constexpr double kSiSnrCapDb = 60.0;

// Scale-invariant SNR in dB after zero-mean normalization, clamped to
// +/- kSiSnrCapDb. Zero reference is an error; zero estimate returns -cap.
double si_snr(const Waveform& est, const Waveform& ref, double cap = kSiSnrCapDb);

struct AssignmentMap {
    std::vector<int> source_of_look;   // per look k: nearest source index
    std::vector<double> distance_deg;  // per look: circular distance
};

// Nearest source per look under circular distance; ties break to the lowest
// source index.
AssignmentMap assign_targets(const LookDirectionSet& looks, const std::vector<double>& doas_deg);

// True when source `src` is assigned to no look (absent from all K outputs).
bool is_off_target(const AssignmentMap& map, int src);

// Training objective: -sum_k si_snr(est_k, ref_{assigned(k)}).
double multi_look_loss(const std::vector<Waveform>& ests, const std::vector<Waveform>& refs,
                       const AssignmentMap& map, double cap = kSiSnrCapDb);

template <typename T>
nn::Var<T> multi_look_loss_graph(const std::vector<nn::Var<T>>& ests,
                                 const std::vector<Waveform>& refs, const AssignmentMap& map,
                                 double cap = kSiSnrCapDb) {
    if (ests.empty() || ests.size() != map.source_of_look.size())
        throw std::invalid_argument("multi_look_loss_graph: look count mismatch");
    nn::Var<T> total;
    for (size_t k = 0; k < ests.size(); ++k) {
        const auto& ref = refs.at(map.source_of_look[k]).samples;
        auto si = nn::si_snr_graph(ests[k], ref, cap);
        total = total ? nn::add(total, si) : si;
    }
    return nn::scale(total, T(-1));
}

// ---- in-memory training dataset -------------------------------------------

struct TrainUtterance {
    std::string id;
    bool positive = false;
    nn::Tensor<float> features;  // [T x feature_width]
    ComplexSpectrogram ref_spec;
    Waveform ref_channel;        // mic-1 mixture, trimmed to the istft length
    std::vector<Waveform> refs;  // per-source reverberant references, trimmed
    std::vector<double> doas_deg;
    std::vector<double> sirs_db;
};

struct LoadedDataset {
    std::vector<TrainUtterance> utterances;
};

LoadedDataset load_training_data(const std::string& dataset_dir,
                                 const std::vector<ManifestEntry>& entries,
                                 const MlenetConfig& cfg);

// ---- MLENet training -------------------------------------------------------

struct TrainParams {
    int epochs = 30;
    int batch = 4;
    nn::AdamConfig adam;
    double si_snr_cap = kSiSnrCapDb;
};

struct LossReport {
    int epoch = 0;
    double train_loss = 0.0;          // mean multi-look loss
    double val_best_look_si_snr = 0.0;  // mean over validation set, if present
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<LossReport> curve;
};

// Deterministic given (config, seed). Aborts on NaN loss, returning the last
// finite state in `checkpoint`. `resume` restores parameters and optimizer
// moments and continues from the recorded epoch.
TrainResult train_mlenet(const LoadedDataset& train_set, const LoadedDataset* val_set,
                         const MlenetConfig& cfg, const TrainParams& params, uint64_t seed,
                         uint64_t config_hash = 0,
                         const std::optional<Checkpoint>& resume = std::nullopt);

// ---- SIR-bucketed evaluation ----------------------------------------------

inline const char* kBucketNames[3] = {"<6dB", ">=6dB", "w/o Intf."};

// 0: min SIR < 6 dB, 1: min SIR >= 6 dB, 2: no interference
int sir_bucket(const std::vector<double>& sirs_db);

struct BucketRow {
    std::string system;
    std::string bucket;
    double mean_si_snr_db = 0.0;
    int n = 0;
    double off_target_pct = 0.0;
};

// Per-bucket mean SI-SNR of the raw reference channel and of the best look
// of the model (max over the K outputs against the target reference),
// plus the off-target percentage per bucket.
std::vector<BucketRow> evaluate_si_snr_buckets(MlenetModel<float>& model,
                                               const LoadedDataset& data,
                                               const std::string& system_name);

// Raw-channel-only rows (no model).
std::vector<BucketRow> evaluate_raw_buckets(const LoadedDataset& data);

void write_bucket_csv(const std::string& path, const std::vector<BucketRow>& rows);

}  // namespace mlook

#endif
