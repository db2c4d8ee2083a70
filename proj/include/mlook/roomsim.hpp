#ifndef MLOOK_ROOMSIM_HPP
#define MLOOK_ROOMSIM_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mlook/array.hpp"
#include "mlook/wave.hpp"

namespace mlook {

struct RoomSpec {
    double length = 5.0, width = 6.0, height = 3.0;  // meters
    double t60 = 0.0;                                // seconds; 0 = anechoic
    Position array_center{2.5, 3.0, 1.5};
    double array_rotation_deg = 0.0;

    void validate() const;
};

enum class SourceRole { kTarget, kInterferer, kNoise };

struct SourcePlacement {
    Position position;
    SourceRole role = SourceRole::kTarget;
    Waveform dry_signal;
};

struct MixtureRecord {
    MultiChannelWaveform mixture;
    std::vector<Waveform> references;  // reverberant per speech source at mic 1
    std::vector<double> doas_deg;      // per speech source, array frame
    std::vector<double> sirs_db;       // per interferer
    double snr_db = 0.0;
    bool positive = false;
    double t60_s = 0.0;
    std::vector<double> room_dims_m;
};

// Azimuth of a world position seen from the array, in the array frame, [0,360).
double doa_of(const RoomSpec& room, const Position& src);

// Per-mic room impulse responses via the image method. max_order < 0 derives
// the truncation from T60 (-60 dB decay); max_order = 0 is direct path only.
std::vector<std::vector<double>> simulate_rir(const RoomSpec& room, const Position& src,
                                              const ArrayGeometry& geometry, int max_order = -1,
                                              int sample_rate = kSampleRate);

// Backward-integration T60 estimate (fit of the -5..-25 dB decay range).
double schroeder_t60(const std::vector<double>& rir, int sample_rate = kSampleRate);

std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& h);

MixtureRecord render_and_mix(const RoomSpec& room, const ArrayGeometry& geometry,
                             const std::vector<SourcePlacement>& placements,
                             std::pair<double, double> sir_range_db,
                             std::pair<double, double> snr_range_db, uint64_t seed);

// ---- synthetic dry-signal pool -------------------------------------------

// Band-shaped noise with syllabic amplitude modulation.
Waveform speech_shaped_signal(int num_samples, std::mt19937_64& rng);

// The fixed "keyword": a three-segment harmonic tone contour with small
// per-instance jitter, embedded at a random offset in a num_samples buffer.
Waveform keyword_signal(int num_samples, std::mt19937_64& rng);

// ---- dataset generation ---------------------------------------------------

struct DatasetRecipe {
    int num_utterances = 100;
    double utterance_len_s = 1.0;
    double positive_fraction = 0.5;
    int min_interferers = 0;
    int max_interferers = 2;
    std::pair<double, double> t60_range_s{0.0, 0.0};
    std::vector<double> room_min{3.0, 3.0, 2.5};
    std::vector<double> room_max{8.0, 10.0, 6.0};
    std::pair<double, double> sir_range_db{-12.0, 12.0};
    std::pair<double, double> snr_range_db{12.0, 30.0};
    bool noise_enabled = false;
    // When non-empty, source j takes doa_choices[j % size] + jitter.
    std::vector<double> doa_choices;
    double doa_jitter_deg = 180.0;  // uniform +/- jitter; 180 = unconstrained
    std::pair<double, double> source_distance_m{1.0, 2.5};

    void validate() const;
};

struct ManifestEntry {
    std::string id;
    std::string path;  // multichannel mixture wav, relative to manifest dir
    std::vector<std::string> ref_paths;
    std::string label;  // "positive" | "negative"
    std::vector<double> doas_deg;
    std::vector<double> sirs_db;
    double snr_db = 0.0;
    double t60_s = 0.0;
    std::vector<double> room_dims_m;
    int num_sources = 0;
};

// Writes WAVs under out_dir and returns the manifest entries (also written as
// out_dir/manifest.jsonl, one JSON object per line). Deterministic per seed.
std::vector<ManifestEntry> generate_dataset(const DatasetRecipe& recipe,
                                            const ArrayGeometry& geometry,
                                            const std::string& out_dir, uint64_t seed,
                                            uint64_t config_hash = 0, int jobs = 1);

std::vector<ManifestEntry> read_manifest(const std::string& path);

}  // namespace mlook

#endif
