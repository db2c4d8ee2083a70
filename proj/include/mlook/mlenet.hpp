#ifndef MLOOK_MLENET_HPP
#define MLOOK_MLENET_HPP

// Multi-look enhancement network: LPS + IPD + per-look directional features
// feed a dilated-conv trunk that predicts one sigmoid mask per look
// direction; masks are applied to the reference-channel spectrogram and
// synthesized back to waveforms. A single-look configuration with the oracle
// DOA gives the direction-aware enhancement (DAE) variant.

#include <string>

#include "mlook/array.hpp"
#include "mlook/checkpoint.hpp"
#include "mlook/nn_dsp.hpp"

namespace mlook {

struct MlenetConfig {
    LookDirectionSet looks;       // K azimuths
    std::vector<MicPair> pairs;   // M IPD pairs
    double sound_speed = 343.0;
    StftConfig stft;
    int repeats = 2;   // paper scale: 4
    int blocks = 4;    // paper scale: 8, dilations 1..2^(B-1)
    int channels = 64;
    int kernel = 3;
    bool df_normalize = true;

    int num_bins() const { return stft.num_bins(); }
    int feature_width() const {
        return num_bins() * (1 + static_cast<int>(pairs.size()) + looks.size());
    }
    void validate() const {
        looks.validate();
        stft.validate();
        if (pairs.empty()) throw std::invalid_argument("MlenetConfig: no mic pairs");
        if (repeats < 1 || blocks < 1 || channels < 1 || kernel < 1 || kernel % 2 == 0)
            throw std::invalid_argument("MlenetConfig: bad trunk shape");
    }
};

MlenetConfig default_mlenet_config();

// [T x F*(1+M+K)] feature matrix, concatenated [LPS | IPD_1..M | DF_1..K].
std::vector<std::vector<double>> assemble_features(const std::vector<ComplexSpectrogram>& specs,
                                                   const MlenetConfig& cfg);

template <typename T>
struct MlenetModel {
    MlenetConfig cfg;
    nn::ParamStore<T> store;

    MlenetModel(MlenetConfig c, uint64_t seed) : cfg(std::move(c)) {
        cfg.validate();
        std::mt19937_64 rng(seed);
        const int H = cfg.channels, Cin = cfg.feature_width();
        const int KF = cfg.looks.size() * cfg.num_bins();
        store.create("enc.w", {H, Cin, 1}, rng);
        store.create("enc.b", {H}, rng);
        for (int r = 0; r < cfg.repeats; ++r)
            for (int b = 0; b < cfg.blocks; ++b) {
                const std::string p = block_prefix(r, b);
                store.create(p + ".conv.w", {H, H, cfg.kernel}, rng);
                store.create(p + ".conv.b", {H}, rng);
                auto alpha = store.create(p + ".prelu", {1}, rng, 0.0);
                alpha->value.data[0] = T(0.25);
                auto gain = store.create(p + ".ln.gain", {H}, rng, 0.0);
                std::fill(gain->value.data.begin(), gain->value.data.end(), T(1));
                store.create(p + ".ln.bias", {H}, rng, 0.0);
            }
        store.create("head.w", {KF, H, 1}, rng);
        store.create("head.b", {KF}, rng);
    }

    static std::string block_prefix(int r, int b) {
        return "block." + std::to_string(r) + "." + std::to_string(b);
    }

    // features [T x Cin] -> K mask Vars, each [T x F]
    std::vector<nn::Var<T>> predict_masks(const std::vector<std::vector<double>>& features) {
        const int Cin = cfg.feature_width();
        if (features.empty() || static_cast<int>(features[0].size()) != Cin)
            throw std::invalid_argument("predict_masks: feature width mismatch (layer enc)");
        return predict_masks(nn::const_matrix<T>(features));
    }

    std::vector<nn::Var<T>> predict_masks(nn::Var<T> features_tc) {
        if (features_tc->value.shape.size() != 2 ||
            features_tc->value.shape[1] != cfg.feature_width())
            throw std::invalid_argument("predict_masks: feature width mismatch (layer enc)");
        auto x = nn::transpose(features_tc);  // [Cin x T]
        x = nn::conv1d(x, store.params.at("enc.w"), store.params.at("enc.b"));
        for (int r = 0; r < cfg.repeats; ++r)
            for (int b = 0; b < cfg.blocks; ++b) {
                const std::string p = block_prefix(r, b);
                auto y = nn::conv1d(x, store.params.at(p + ".conv.w"),
                                    store.params.at(p + ".conv.b"), 1 << b);
                y = nn::prelu(y, store.params.at(p + ".prelu"));
                y = nn::global_layer_norm(y, store.params.at(p + ".ln.gain"),
                                          store.params.at(p + ".ln.bias"));
                x = nn::add(x, y);
            }
        auto logits = nn::conv1d(x, store.params.at("head.w"), store.params.at("head.b"));
        auto masks_ct = nn::sigmoid(logits);  // [K*F x T]
        std::vector<nn::Var<T>> masks;
        const int F = cfg.num_bins();
        for (int k = 0; k < cfg.looks.size(); ++k)
            masks.push_back(nn::transpose(nn::slice_rows(masks_ct, k * F, (k + 1) * F)));
        return masks;
    }

    // Enhanced waveform Vars [L x 1], one per look: istft(mask_k * Y_ref).
    std::vector<nn::Var<T>> enhance_graph(const std::vector<std::vector<double>>& features,
                                          const ComplexSpectrogram& ref_spec) {
        return enhance_graph(nn::const_matrix<T>(features), ref_spec);
    }

    std::vector<nn::Var<T>> enhance_graph(nn::Var<T> features_tc,
                                          const ComplexSpectrogram& ref_spec) {
        auto masks = predict_masks(features_tc);
        std::vector<nn::Var<T>> waves;
        for (auto& m : masks) waves.push_back(nn::mask_istft(m, ref_spec, cfg.stft));
        return waves;
    }

    // Inference without gradients: plain K waveforms.
    std::vector<Waveform> enhance(const MultiChannelWaveform& mixture) {
        std::vector<ComplexSpectrogram> specs;
        for (const auto& ch : mixture.channels) specs.push_back(stft(ch, cfg.stft));
        auto feats = assemble_features(specs, cfg);
        auto waves = enhance_graph(feats, specs[0]);
        std::vector<Waveform> out;
        for (auto& w : waves) {
            std::vector<double> s(w->value.size());
            for (size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(w->value.data[i]);
            out.emplace_back(std::move(s));
        }
        return out;
    }

    Checkpoint to_checkpoint(uint64_t step, uint64_t seed, uint64_t config_hash) const {
        Checkpoint ckpt;
        ckpt.step = step;
        ckpt.seed = seed;
        ckpt.config_hash = config_hash;
        store_to_checkpoint(store, ckpt);
        return ckpt;
    }
    void load(const Checkpoint& ckpt) { checkpoint_to_store(ckpt, store); }
};

// DAE: same architecture with a single look direction. The oracle DOA enters
// through the directional feature column block.
MlenetConfig dae_config(const MlenetConfig& base, double oracle_doa_deg);

}  // namespace mlook

#endif
