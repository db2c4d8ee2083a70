#ifndef MLOOK_KWS_HPP
#define MLOOK_KWS_HPP

// Keyword spotter over stacked log-mel features, with soft self-attention
// fusion across the K enhanced channels plus the raw reference channel, and
// joint training of the spotter together with the enhancement front end.

#include <array>
#include <cmath>
#include <optional>

#include "mlook/training.hpp"

namespace mlook {

struct KwsConfig {
    int n_mels = 40;
    int left_context = 10;
    int right_context = 5;
    int attn_dim = 128;
    int conv_kernels = 8;  // per region; 8 regions -> 64 conv outputs
    int dense = 64;

    int frame_dim() const { return n_mels * 3; }
    int feat_dim() const { return frame_dim() * (left_context + 1 + right_context); }
    int center_col() const { return left_context * frame_dim(); }
    void validate() const {
        if (n_mels != 40)
            throw std::invalid_argument("KwsConfig: region conv requires 40 mel bins");
        if (left_context < 0 || right_context < 0 || attn_dim < 1 || conv_kernels < 1 ||
            dense < 1)
            throw std::invalid_argument("KwsConfig: bad shape");
    }
};

template <typename T>
struct KwsModel {
    KwsConfig cfg;
    nn::ParamStore<T> store;

    KwsModel(KwsConfig c, uint64_t seed, const std::string& prefix = "")
        : cfg(c), prefix_(prefix) {
        cfg.validate();
        std::mt19937_64 rng(seed);
        const int D = cfg.feat_dim(), A = cfg.attn_dim;
        store.create(prefix_ + "attn.w", {A, D}, rng);
        store.create(prefix_ + "attn.b", {A}, rng, 0.0);
        store.create(prefix_ + "attn.v", {A}, rng);
        store.create(prefix_ + "conv.w", {8, cfg.conv_kernels, 4}, rng);
        store.create(prefix_ + "conv.b", {8 * cfg.conv_kernels}, rng, 0.0);
        const int conv_out = 8 * cfg.conv_kernels;
        const int dense_in = conv_out + 2 * cfg.n_mels;  // conv of static + d1 + d2
        store.create(prefix_ + "fc1.w", {cfg.dense, dense_in}, rng);
        store.create(prefix_ + "fc1.b", {cfg.dense}, rng, 0.0);
        store.create(prefix_ + "fc2.w", {cfg.dense, cfg.dense}, rng);
        store.create(prefix_ + "fc2.b", {cfg.dense}, rng, 0.0);
        store.create(prefix_ + "out.w", {2, cfg.dense}, rng);
        store.create(prefix_ + "out.b", {2}, rng, 0.0);
    }

    nn::Var<T> p(const std::string& name) { return store.params.at(prefix_ + name); }

    // Per-frame attention energies e_i = v' tanh(W z_i + b) for one channel's
    // feature matrix [Tf x D]; returns a column [Tf x 1].
    nn::Var<T> attention_energy(nn::Var<T> z) {
        auto h = nn::tanh_op(
            nn::add_rowvec(nn::matmul(z, nn::transpose(p("attn.w"))), p("attn.b")));
        return nn::matmul(h, nn::reshape(p("attn.v"), {cfg.attn_dim, 1}));
    }

    // Soft fusion of N channels, each [Tf x D]: per frame, alpha = softmax over
    // channels of the energies and z_hat = sum_i alpha_i z_i.
    nn::Var<T> attention_fuse(const std::vector<nn::Var<T>>& channels) {
        if (channels.empty()) throw std::invalid_argument("attention_fuse: no channels");
        if (channels.size() == 1) return channels[0];
        std::vector<nn::Var<T>> energies;
        for (auto& z : channels) energies.push_back(attention_energy(z));
        auto alpha = nn::softmax_rows(nn::concat_cols(energies));  // [Tf x N]
        nn::Var<T> fused;
        for (size_t i = 0; i < channels.size(); ++i) {
            const int ci = static_cast<int>(i);
            auto w = nn::rowwise_scale(channels[i], nn::slice_cols(alpha, ci, ci + 1));
            fused = fused ? nn::add(fused, w) : w;
        }
        return fused;
    }

    // Per-frame attention weights for inspection: [Tf x N], rows sum to 1.
    nn::Var<T> attention_weights(const std::vector<nn::Var<T>>& channels) {
        std::vector<nn::Var<T>> energies;
        for (auto& z : channels) energies.push_back(attention_energy(z));
        return nn::softmax_rows(nn::concat_cols(energies));
    }

    // fused [Tf x D] -> frame logits [Tf x 2], column 0 background, 1 keyword.
    nn::Var<T> frame_logits(nn::Var<T> fused) {
        const int c0 = cfg.center_col();
        auto stat = nn::slice_cols(fused, c0, c0 + cfg.n_mels);
        auto conv = nn::relu(nn::region_conv(stat, p("conv.w"), p("conv.b")));
        auto dd = nn::slice_cols(fused, c0 + cfg.n_mels, c0 + 3 * cfg.n_mels);
        auto h = nn::concat_cols<T>({conv, dd});
        auto dense = [&](nn::Var<T> x, const char* w, const char* b) {
            return nn::add_rowvec(nn::matmul(x, nn::transpose(p(w))), p(b));
        };
        h = nn::relu(dense(h, "fc1.w", "fc1.b"));
        h = nn::relu(dense(h, "fc2.w", "fc2.b"));
        return dense(h, "out.w", "out.b");
    }

    // Utterance logit: max over frames of (keyword - background).
    nn::Var<T> utterance_logit(nn::Var<T> fused) {
        auto l = frame_logits(fused);
        auto diff = nn::sub(nn::slice_cols(l, 1, 2), nn::slice_cols(l, 0, 1));
        return nn::max_elem(nn::reshape(diff, {l->value.rows()}));
    }

    // Cross entropy of the utterance decision: softplus(-m) for positives,
    // softplus(m) for negatives.
    nn::Var<T> utterance_loss(nn::Var<T> fused, bool positive) {
        auto m = utterance_logit(fused);
        return nn::softplus(positive ? nn::scale(m, T(-1)) : m);
    }

    double utterance_score(nn::Var<T> fused) {
        const double m = static_cast<double>(utterance_logit(fused)->value.data[0]);
        return 1.0 / (1.0 + std::exp(-m));
    }

   private:
    std::string prefix_;
};

// Stacked log-mel features of a waveform graph node [L x 1] -> [Tf x D].
template <typename T>
nn::Var<T> kws_features_graph(nn::Var<T> wave, const KwsConfig& cfg) {
    FbankConfig fb;
    fb.n_mels = cfg.n_mels;
    return nn::deltas_and_stack_graph(nn::fbank_graph(wave, fb), cfg.left_context,
                                      cfg.right_context);
}

// Plain (constant) stacked features of a waveform.
std::vector<std::vector<double>> kws_features(const Waveform& wave, const KwsConfig& cfg);

// ---- training --------------------------------------------------------------

struct KwsTrainParams {
    int epochs = 20;
    int batch = 8;
    nn::AdamConfig adam;
};

// Trains the spotter alone on the raw reference channel.
TrainResult train_kws(const LoadedDataset& train_set, const KwsConfig& cfg,
                      const KwsTrainParams& params, uint64_t seed, uint64_t config_hash = 0,
                      const std::optional<Checkpoint>& resume = std::nullopt);

struct JointTrainParams {
    int epochs = 10;
    int batch = 4;
    nn::AdamConfig adam;
    double enhance_loss_weight = 0.0;  // optional multi-look SI-SNR term
};

// Joint fine-tuning: gradients flow from the keyword cross entropy through
// attention fusion, the log-mel front end, the masked iSTFT, and into the
// enhancement trunk. Parameters live in one store under the "mlenet." and
// "kws." prefixes; the returned checkpoint holds both.
TrainResult joint_train(const LoadedDataset& train_set, const MlenetConfig& mcfg,
                        const KwsConfig& kcfg, const JointTrainParams& params, uint64_t seed,
                        uint64_t config_hash = 0,
                        const std::optional<Checkpoint>& enhance_init = std::nullopt,
                        const std::optional<Checkpoint>& kws_init = std::nullopt,
                        const std::optional<Checkpoint>& resume = std::nullopt);

// Joint model wrapper: shared store, prefixed parameter names.
template <typename T>
struct JointModel {
    MlenetModel<T> mlenet;
    KwsModel<T> kws;

    JointModel(const MlenetConfig& mcfg, const KwsConfig& kcfg, uint64_t seed)
        : mlenet(mcfg, seed), kws(kcfg, seed ^ 0x6b77735f6b777373ULL, "kws.") {}

    // Utterance score graph: enhance, featurize K+1 channels, fuse, classify.
    nn::Var<T> score_graph(const TrainUtterance& u) {
        auto feats = nn::const_from_tensor<T>(u.features);
        auto waves = mlenet.enhance_graph(feats, u.ref_spec);
        std::vector<nn::Var<T>> channels;
        for (auto& w : waves) channels.push_back(kws_features_graph(w, kws.cfg));
        channels.push_back(
            nn::const_matrix<T>(kws_features(u.ref_channel, kws.cfg)));  // raw channel
        return kws.attention_fuse(channels);
    }
};

// ---- wake-up word evaluation ----------------------------------------------

struct WakeupRow {
    std::string system;
    std::string bucket;   // SIR bucket of positives
    double accuracy = 0.0;  // fraction of positives above threshold
    int n = 0;
    double off_target_pct = 0.0;
};

struct WakeupReport {
    double threshold = 0.0;
    int false_alarms = 0;  // negatives above threshold at that setting
    std::vector<WakeupRow> rows;
    // (threshold, false alarm count, overall hit rate) sweep for plotting
    std::vector<std::array<double, 3>> sweep;
};

struct ScoredUtterance {
    double score = 0.0;
    bool positive = false;
    int bucket = 2;
    bool off_target = false;
};

// Threshold = smallest score keeping at most `fa_budget` negatives above it;
// per-bucket accuracy of the positives at that threshold.
WakeupReport evaluate_wakeup(const std::vector<ScoredUtterance>& scored, int fa_budget,
                             const std::string& system_name);

void write_wakeup_csv(const std::string& path, const WakeupReport& report);

}  // namespace mlook

#endif
