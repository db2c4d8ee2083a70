#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "mlook/kws.hpp"

using namespace mlook;

namespace {

KwsConfig tiny_kws() {
    KwsConfig cfg;
    cfg.left_context = 2;
    cfg.right_context = 1;
    cfg.attn_dim = 6;
    cfg.conv_kernels = 2;
    cfg.dense = 8;
    return cfg;
}

nn::Tensor<double> random_tensor(std::vector<int> shape, std::mt19937_64& rng, double s = 0.5) {
    nn::Tensor<double> t(shape);
    std::uniform_real_distribution<double> u(-s, s);
    for (auto& v : t.data) v = u(rng);
    return t;
}

}  // namespace

TEST_CASE("default stacked dimensionality is 40*3*16 = 1920") {
    KwsConfig cfg;
    CHECK(cfg.feat_dim() == 1920);
    CHECK(cfg.center_col() == 1200);
}

TEST_CASE("identical channels get uniform attention weights") {
    auto cfg = tiny_kws();
    KwsModel<double> model(cfg, 3);
    std::mt19937_64 rng(5);
    auto z = nn::constant(random_tensor({4, cfg.feat_dim()}, rng));
    auto alpha = model.attention_weights({z, z, z});
    REQUIRE(alpha->value.shape == std::vector<int>{4, 3});
    for (int t = 0; t < 4; ++t)
        for (int i = 0; i < 3; ++i)
            CHECK(alpha->value.at(t, i) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax hand example: energy gap of ln 2 gives weights 1/3 and 2/3") {
    // independent oracle for the fusion softmax: e2 - e1 = ln 2 =>
    // alpha = [1/(1+2), 2/(1+2)]
    auto e = nn::constant(nn::Tensor<double>({1, 2}));
    e->value.data = {0.0, std::log(2.0)};
    auto alpha = nn::softmax_rows(e);
    CHECK(alpha->value.data[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(alpha->value.data[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("attention weights are positive and rows sum to one") {
    auto cfg = tiny_kws();
    KwsModel<double> model(cfg, 7);
    std::mt19937_64 rng(9);
    std::vector<nn::Var<double>> chans;
    for (int i = 0; i < 4; ++i) chans.push_back(nn::constant(random_tensor({5, cfg.feat_dim()}, rng)));
    auto alpha = model.attention_weights(chans);
    for (int t = 0; t < 5; ++t) {
        double row = 0.0;
        for (int i = 0; i < 4; ++i) {
            CHECK(alpha->value.at(t, i) > 0.0);
            row += alpha->value.at(t, i);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("fusion output stays inside the per-dimension convex hull") {
    auto cfg = tiny_kws();
    KwsModel<double> model(cfg, 11);
    std::mt19937_64 rng(13);
    std::vector<nn::Var<double>> chans;
    for (int i = 0; i < 3; ++i) chans.push_back(nn::constant(random_tensor({3, cfg.feat_dim()}, rng)));
    auto fused = model.attention_fuse(chans);
    for (int t = 0; t < 3; ++t)
        for (int d = 0; d < cfg.feat_dim(); d += 31) {
            double lo = 1e9, hi = -1e9;
            for (auto& z : chans) {
                lo = std::min(lo, z->value.at(t, d));
                hi = std::max(hi, z->value.at(t, d));
            }
            CHECK(fused->value.at(t, d) >= lo - 1e-12);
            CHECK(fused->value.at(t, d) <= hi + 1e-12);
        }
}

TEST_CASE("fusion is equivariant under channel permutation") {
    auto cfg = tiny_kws();
    KwsModel<double> model(cfg, 17);
    std::mt19937_64 rng(19);
    std::vector<nn::Var<double>> chans;
    for (int i = 0; i < 3; ++i) chans.push_back(nn::constant(random_tensor({3, cfg.feat_dim()}, rng)));
    auto fused = model.attention_fuse(chans);
    auto fused_perm = model.attention_fuse({chans[2], chans[0], chans[1]});
    for (size_t i = 0; i < fused->value.size(); ++i)
        CHECK(fused->value.data[i] == doctest::Approx(fused_perm->value.data[i]).epsilon(1e-12));
}

TEST_CASE("frame posteriors sum to one and utterance score lies in (0,1)") {
    auto cfg = tiny_kws();
    KwsModel<double> model(cfg, 23);
    std::mt19937_64 rng(29);
    auto z = nn::constant(random_tensor({6, cfg.feat_dim()}, rng));
    auto logits = model.frame_logits(z);
    REQUIRE(logits->value.shape == std::vector<int>{6, 2});
    auto post = nn::softmax_rows(logits);
    for (int t = 0; t < 6; ++t)
        CHECK(post->value.at(t, 0) + post->value.at(t, 1) == doctest::Approx(1.0).epsilon(1e-12));
    const double score = model.utterance_score(z);
    CHECK(score > 0.0);
    CHECK(score < 1.0);
}

TEST_CASE("attention gradient: finite differences through the fused score") {
    auto cfg = tiny_kws();
    KwsModel<double> model(cfg, 31);
    std::mt19937_64 rng(37);
    std::vector<nn::Var<double>> chans;
    for (int i = 0; i < 3; ++i) chans.push_back(nn::constant(random_tensor({3, cfg.feat_dim()}, rng)));

    auto build = [&] { return model.utterance_loss(model.attention_fuse(chans), true); };
    auto loss = build();
    model.store.zero_grads();
    nn::backward(loss);

    for (const auto& probe : std::vector<std::pair<std::string, size_t>>{
             {"attn.w", 0}, {"attn.w", 101}, {"attn.v", 2}, {"attn.b", 1},
             {"conv.w", 5}, {"fc1.w", 7}, {"out.b", 0}}) {
        auto p = model.store.params.at(probe.first);
        const double h = 1e-6;
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

TEST_CASE("utterance loss is softplus of the signed margin") {
    auto cfg = tiny_kws();
    KwsModel<double> model(cfg, 41);
    std::mt19937_64 rng(43);
    auto z = nn::constant(random_tensor({4, cfg.feat_dim()}, rng));
    const double m = model.utterance_logit(z)->value.data[0];
    CHECK(model.utterance_loss(z, true)->value.data[0] ==
          doctest::Approx(std::log1p(std::exp(-m))).epsilon(1e-9));
    CHECK(model.utterance_loss(z, false)->value.data[0] ==
          doctest::Approx(std::log1p(std::exp(m))).epsilon(1e-9));
}

namespace {

LoadedDataset kws_toy_dataset(int n, uint64_t seed) {
    // positives carry a strong 600 Hz tone, negatives are noise only
    LoadedDataset data;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    const int L = 1600;
    for (int i = 0; i < n; ++i) {
        TrainUtterance u;
        u.id = "k" + std::to_string(i);
        u.positive = i % 2 == 0;
        u.doas_deg = {30.0};
        u.ref_channel.samples.resize(L);
        for (int t = 0; t < L; ++t) {
            double v = 0.05 * g(rng);
            if (u.positive) v += 0.4 * std::sin(2 * std::acos(-1.0) * 600.0 * t / kSampleRate);
            u.ref_channel.samples[t] = v;
        }
        data.utterances.push_back(std::move(u));
    }
    return data;
}

}  // namespace

TEST_CASE("train_kws reduces the loss, separates the toy classes, and is deterministic") {
    auto cfg = tiny_kws();
    auto data = kws_toy_dataset(8, 3);
    KwsTrainParams params;
    params.epochs = 30;
    params.batch = 4;
    params.adam.lr = 3e-3;

    auto r1 = train_kws(data, cfg, params, 5);
    auto r2 = train_kws(data, cfg, params, 5);
    REQUIRE(!r1.curve.empty());
    CHECK(r1.curve.back().train_loss < r1.curve.front().train_loss);
    for (const auto& [name, t] : r1.checkpoint.params)
        CHECK(t.data == r2.checkpoint.params.at(name).data);

    KwsModel<float> model(cfg, 5, "kws.");
    for (auto& [name, p] : model.store.params) p->value.data = r1.checkpoint.params.at(name).data;
    double pos_min = 1.0, neg_max = 0.0;
    for (const auto& u : data.utterances) {
        auto fused = nn::const_matrix<float>(kws_features(u.ref_channel, cfg));
        const double s = model.utterance_score(fused);
        if (u.positive) pos_min = std::min(pos_min, s);
        else neg_max = std::max(neg_max, s);
    }
    CHECK(pos_min > neg_max);
}

TEST_CASE("evaluate_wakeup threshold honors the false alarm budget") {
    std::vector<ScoredUtterance> scored;
    // negatives at 0.1 .. 0.5, positives at 0.45 .. 0.9
    for (int i = 0; i < 5; ++i) {
        ScoredUtterance s;
        s.score = 0.1 * (i + 1);
        s.positive = false;
        scored.push_back(s);
    }
    for (int i = 0; i < 5; ++i) {
        ScoredUtterance s;
        s.score = 0.45 + 0.1 * i;
        s.positive = true;
        s.bucket = i % 3;
        scored.push_back(s);
    }
    auto report = evaluate_wakeup(scored, 1, "t");
    CHECK(report.threshold == doctest::Approx(0.4));  // second-highest negative
    CHECK(report.false_alarms <= 1);
    REQUIRE(report.rows.size() == 4);
    CHECK(report.rows[3].bucket == "all");
    CHECK(report.rows[3].accuracy == doctest::Approx(1.0));  // all positives > 0.4

    auto strict = evaluate_wakeup(scored, 0, "t");
    CHECK(strict.threshold == doctest::Approx(0.5));
    CHECK(strict.false_alarms == 0);
    CHECK(strict.rows[3].accuracy < 1.0);  // positive at 0.45 now rejected
}

TEST_CASE("joint training propagates gradients into the enhancement trunk") {
    auto kcfg = tiny_kws();
    auto mcfg = default_mlenet_config();
    mcfg.looks.azimuths_deg = {0.0, 180.0};
    mcfg.repeats = 1;
    mcfg.blocks = 2;
    mcfg.channels = 8;

    // one tiny utterance with full fields
    LoadedDataset data;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    const int Tf = 3;
    const int L = mcfg.stft.window_len + (Tf - 1) * mcfg.stft.hop;
    TrainUtterance u;
    u.id = "j0";
    u.positive = true;
    u.doas_deg = {10.0, 200.0};
    u.sirs_db = {4.0};
    u.refs.resize(2);
    for (auto& r : u.refs) {
        r.samples.resize(L);
        for (auto& v : r.samples) v = 0.2 * g(rng);
    }
    std::vector<Waveform> chans(6);
    for (auto& c : chans) {
        c.samples.resize(L);
        for (int t = 0; t < L; ++t) c.samples[t] = u.refs[0].samples[t] + 0.1 * g(rng);
    }
    std::vector<ComplexSpectrogram> specs;
    for (const auto& c : chans) specs.push_back(stft(c, mcfg.stft));
    auto feats = assemble_features(specs, mcfg);
    u.features = nn::Tensor<float>({static_cast<int>(feats.size()), mcfg.feature_width()});
    for (size_t t = 0; t < feats.size(); ++t)
        for (int c = 0; c < mcfg.feature_width(); ++c)
            u.features.data[t * mcfg.feature_width() + c] = static_cast<float>(feats[t][c]);
    u.ref_spec = specs[0];
    u.ref_channel.samples.assign(chans[0].samples.begin(), chans[0].samples.begin() + L);
    data.utterances.push_back(std::move(u));

    // direct gradient probe: build the joint graph once and check the trunk grads
    JointModel<float> model(mcfg, kcfg, 9);
    auto fused = model.score_graph(data.utterances[0]);
    auto loss = model.kws.utterance_loss(fused, true);
    model.mlenet.store.zero_grads();
    model.kws.store.zero_grads();
    nn::backward(loss);
    double enc_grad_norm = 0.0;
    for (float v : model.mlenet.store.params.at("enc.w")->grad.data)
        enc_grad_norm += static_cast<double>(v) * v;
    CHECK(enc_grad_norm > 0.0);

    // one joint epoch runs and changes both parameter families
    JointTrainParams params;
    params.epochs = 1;
    params.batch = 1;
    auto result = joint_train(data, mcfg, kcfg, params, 9);
    CHECK(result.checkpoint.params.count("mlenet.enc.w") == 1);
    CHECK(result.checkpoint.params.count("kws.attn.w") == 1);
    REQUIRE(result.curve.size() == 1);
}

TEST_CASE("joint resume is bit-exact") {
    auto kcfg = tiny_kws();
    auto mcfg = default_mlenet_config();
    mcfg.looks.azimuths_deg = {0.0};
    mcfg.repeats = 1;
    mcfg.blocks = 1;
    mcfg.channels = 4;

    LoadedDataset data;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    const int L = mcfg.stft.window_len + mcfg.stft.hop;
    for (int i = 0; i < 2; ++i) {
        TrainUtterance u;
        u.id = "r" + std::to_string(i);
        u.positive = i == 0;
        u.doas_deg = {20.0};
        u.refs.resize(1);
        u.refs[0].samples.resize(L);
        for (auto& v : u.refs[0].samples) v = 0.2 * g(rng);
        std::vector<Waveform> chans(6);
        for (auto& c : chans) {
            c.samples.resize(L);
            for (int t = 0; t < L; ++t) c.samples[t] = u.refs[0].samples[t] + 0.1 * g(rng);
        }
        std::vector<ComplexSpectrogram> specs;
        for (const auto& c : chans) specs.push_back(stft(c, mcfg.stft));
        auto feats = assemble_features(specs, mcfg);
        u.features = nn::Tensor<float>({static_cast<int>(feats.size()), mcfg.feature_width()});
        for (size_t t = 0; t < feats.size(); ++t)
            for (int c = 0; c < mcfg.feature_width(); ++c)
                u.features.data[t * mcfg.feature_width() + c] = static_cast<float>(feats[t][c]);
        u.ref_spec = specs[0];
        u.ref_channel.samples.assign(chans[0].samples.begin(), chans[0].samples.begin() + L);
        data.utterances.push_back(std::move(u));
    }

    JointTrainParams full, half;
    full.epochs = 2;
    half.epochs = 1;
    full.batch = half.batch = 1;
    auto straight = joint_train(data, mcfg, kcfg, full, 13);
    auto part = joint_train(data, mcfg, kcfg, half, 13);
    auto resumed = joint_train(data, mcfg, kcfg, full, 13, 0, std::nullopt, std::nullopt,
                               part.checkpoint);
    for (const auto& [name, t] : straight.checkpoint.params)
        CHECK(t.data == resumed.checkpoint.params.at(name).data);
}
