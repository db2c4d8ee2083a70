#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "mlook/mlenet.hpp"
#include "mlook/training.hpp"

using namespace mlook;

namespace {

MultiChannelWaveform random_mixture(int frames, uint64_t seed) {
    StftConfig cfg;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<Waveform> chans(6);
    const int L = cfg.window_len + (frames - 1) * cfg.hop;
    for (auto& c : chans) {
        c.samples.resize(L);
        for (auto& v : c.samples) v = 0.2 * g(rng);
    }
    return MultiChannelWaveform(chans);
}

MlenetConfig tiny_config() {
    MlenetConfig cfg = default_mlenet_config();
    cfg.repeats = 1;
    cfg.blocks = 2;
    cfg.channels = 8;
    return cfg;
}

}  // namespace

TEST_CASE("default feature width is 257 * 11 = 2827") {
    auto cfg = default_mlenet_config();
    CHECK(cfg.num_bins() == 257);
    CHECK(cfg.pairs.size() == 6);
    CHECK(cfg.looks.size() == 4);
    CHECK(cfg.feature_width() == 2827);
}

TEST_CASE("single-look DAE feature width is 257 * 8 = 2056") {
    auto cfg = dae_config(default_mlenet_config(), 45.0);
    CHECK(cfg.looks.size() == 1);
    CHECK(cfg.feature_width() == 2056);
}

TEST_CASE("assemble_features layout: [LPS | IPDs | DFs]") {
    auto cfg = tiny_config();
    auto mix = random_mixture(3, 5);
    std::vector<ComplexSpectrogram> specs;
    for (const auto& ch : mix.channels) specs.push_back(stft(ch, cfg.stft));
    auto feats = assemble_features(specs, cfg);
    REQUIRE(static_cast<int>(feats.size()) == specs[0].num_frames());
    REQUIRE(static_cast<int>(feats[0].size()) == cfg.feature_width());

    const int F = cfg.num_bins();
    auto lps = log_power_spectrum(specs[0]);
    // LPS block is the reference-channel log power spectrum
    for (int f = 0; f < F; f += 37) CHECK(feats[1][f] == doctest::Approx(lps[1][f]));
    // IPD block: first pair at frame 1, spot bins
    auto ipd0 = ipd(specs[cfg.pairs[0].m1], specs[cfg.pairs[0].m2]);
    for (int f = 1; f < F; f += 63) {
        CHECK(feats[1][F + f] == doctest::Approx(ipd0[1][f]));
        CHECK(feats[1][F + f] <= std::acos(-1.0));
        CHECK(feats[1][F + f] > -std::acos(-1.0));
    }
}

TEST_CASE("zero head weights give 0.5 masks everywhere") {
    auto cfg = tiny_config();
    MlenetModel<double> model(cfg, 3);
    auto& hw = model.store.params.at("head.w")->value;
    auto& hb = model.store.params.at("head.b")->value;
    std::fill(hw.data.begin(), hw.data.end(), 0.0);
    std::fill(hb.data.begin(), hb.data.end(), 0.0);

    auto mix = random_mixture(3, 7);
    std::vector<ComplexSpectrogram> specs;
    for (const auto& ch : mix.channels) specs.push_back(stft(ch, cfg.stft));
    auto masks = model.predict_masks(assemble_features(specs, cfg));
    REQUIRE(static_cast<int>(masks.size()) == cfg.looks.size());
    for (auto& m : masks) {
        REQUIRE(m->value.shape == std::vector<int>{specs[0].num_frames(), cfg.num_bins()});
        for (double v : m->value.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("masks lie in (0, 1)") {
    auto cfg = tiny_config();
    MlenetModel<double> model(cfg, 11);
    auto mix = random_mixture(4, 13);
    std::vector<ComplexSpectrogram> specs;
    for (const auto& ch : mix.channels) specs.push_back(stft(ch, cfg.stft));
    auto masks = model.predict_masks(assemble_features(specs, cfg));
    for (auto& m : masks)
        for (double v : m->value.data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
}

TEST_CASE("all-ones mask reconstructs the reference channel") {
    // Oracle: if every mask value is 1, enhance == istft(stft(ch0)) == ch0
    // (up to numerical noise) over the analysis span.
    auto cfg = tiny_config();
    auto mix = random_mixture(5, 17);
    auto spec0 = stft(mix.channels[0], cfg.stft);
    const int T = spec0.num_frames(), F = spec0.num_bins();
    nn::Tensor<double> ones({T, F});
    std::fill(ones.data.begin(), ones.data.end(), 1.0);
    auto wave = nn::mask_istft(nn::constant(ones), spec0, cfg.stft);
    // Skip the first/last window where the floored overlap-add envelope
    // tapers the output; the interior is an exact round trip.
    const int W = cfg.stft.window_len;
    for (int i = W; i < static_cast<int>(wave->value.size()) - W; ++i)
        CHECK(wave->value.data[i] == doctest::Approx(mix.channels[0].samples[i]).epsilon(1e-6));
}

TEST_CASE("ideal binary mask beats the raw mixture on a synthetic two-tone scene") {
    // Oracle: target = 400 Hz tone, interferer = 3 kHz tone. The ideal
    // binary mask selects target-dominated bins; applying it must raise
    // SI-SNR far above the raw mixture.
    StftConfig cfg;
    const int L = cfg.window_len + 7 * cfg.hop;
    Waveform target, interf, mixture;
    target.samples.resize(L);
    interf.samples.resize(L);
    mixture.samples.resize(L);
    for (int n = 0; n < L; ++n) {
        target.samples[n] = 0.5 * std::sin(2 * std::acos(-1.0) * 400.0 * n / kSampleRate);
        interf.samples[n] = 0.5 * std::sin(2 * std::acos(-1.0) * 3000.0 * n / kSampleRate);
        mixture.samples[n] = target.samples[n] + interf.samples[n];
    }
    auto sm = stft(mixture, cfg);
    auto st = stft(target, cfg);
    auto si = stft(interf, cfg);
    const int T = sm.num_frames(), F = sm.num_bins();
    nn::Tensor<double> ibm({T, F});
    for (int t = 0; t < T; ++t)
        for (int f = 0; f < F; ++f)
            ibm.at(t, f) = std::abs(st.values[t][f]) >= std::abs(si.values[t][f]) ? 1.0 : 0.0;
    auto est = nn::mask_istft(nn::constant(ibm), sm, cfg);

    // Score the interior span only; the floored overlap-add envelope tapers
    // the first/last window of the synthesis output.
    const int lo = cfg.window_len;
    const int hi = static_cast<int>(est->value.size()) - cfg.window_len;
    Waveform est_w, ref_w, mix_w;
    est_w.samples.assign(est->value.data.begin() + lo, est->value.data.begin() + hi);
    ref_w.samples.assign(target.samples.begin() + lo, target.samples.begin() + hi);
    mix_w.samples.assign(mixture.samples.begin() + lo, mixture.samples.begin() + hi);
    const double raw = si_snr(mix_w, ref_w);
    const double masked = si_snr(est_w, ref_w);
    CHECK(raw < 1.0);  // equal-power orthogonal tones: ~0 dB
    CHECK(masked > raw + 20.0);
}

TEST_CASE("end-to-end gradient: multi-look loss w.r.t. trunk parameters") {
    auto cfg = tiny_config();
    cfg.looks.azimuths_deg = {0.0, 180.0};
    MlenetModel<double> model(cfg, 19);
    auto mix = random_mixture(2, 23);
    std::vector<ComplexSpectrogram> specs;
    for (const auto& ch : mix.channels) specs.push_back(stft(ch, cfg.stft));
    auto feats = assemble_features(specs, cfg);

    std::mt19937_64 rng(29);
    std::normal_distribution<double> g;
    std::vector<Waveform> refs(2);
    const size_t L = cfg.stft.window_len + cfg.stft.hop;
    for (auto& r : refs) {
        r.samples.resize(L);
        for (auto& v : r.samples) v = 0.2 * g(rng);
    }
    auto map = assign_targets(cfg.looks, {15.0, 170.0});

    auto build = [&] {
        auto ests = model.enhance_graph(feats, specs[0]);
        return multi_look_loss_graph(ests, refs, map);
    };
    auto loss = build();
    model.store.zero_grads();
    nn::backward(loss);

    // FD spot checks across layers
    for (const auto& probe : std::vector<std::pair<std::string, size_t>>{
             {"enc.w", 0}, {"enc.w", 431}, {"enc.b", 2}, {"block.0.0.conv.w", 9},
             {"block.0.1.ln.gain", 3}, {"head.w", 12}, {"head.b", 0}}) {
        auto p = model.store.params.at(probe.first);
        const double h = 1e-5;
        const double keep = p->value.data[probe.second];
        p->value.data[probe.second] = keep + h;
        const double up = build()->value.data[0];
        p->value.data[probe.second] = keep - h;
        const double dn = build()->value.data[0];
        p->value.data[probe.second] = keep;
        const double fd = (up - dn) / (2 * h);
        const double an = p->grad.data[probe.second];
        CAPTURE(probe.first);
        CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}) < 1e-4);
    }
}

TEST_CASE("checkpoint round trip restores identical masks") {
    auto cfg = tiny_config();
    MlenetModel<float> model(cfg, 31);
    auto ckpt = model.to_checkpoint(5, 31, 99);
    const std::string path = "/tmp/mlook_test_mlenet.ckpt";
    save_checkpoint(path, ckpt);
    auto back = load_checkpoint(path);
    CHECK(back.step == 5);
    CHECK(back.config_hash == 99);

    MlenetModel<float> other(cfg, 777);  // different init
    other.load(back);
    auto mix = random_mixture(3, 37);
    std::vector<ComplexSpectrogram> specs;
    for (const auto& ch : mix.channels) specs.push_back(stft(ch, cfg.stft));
    auto feats = assemble_features(specs, cfg);
    auto m1 = model.predict_masks(feats);
    auto m2 = other.predict_masks(feats);
    for (size_t k = 0; k < m1.size(); ++k) CHECK(m1[k]->value.data == m2[k]->value.data);
    std::remove(path.c_str());
}
