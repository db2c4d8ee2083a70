#include "mlook/kws.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace mlook {

std::vector<std::vector<double>> kws_features(const Waveform& wave, const KwsConfig& cfg) {
    FbankConfig fb;
    fb.n_mels = cfg.n_mels;
    return add_deltas_and_stack(logmel_fbank(wave, fb), cfg.left_context, cfg.right_context);
}

namespace {

nn::Tensor<float> to_float_tensor(const std::vector<std::vector<double>>& m) {
    nn::Tensor<float> t({static_cast<int>(m.size()), static_cast<int>(m[0].size())});
    for (size_t r = 0; r < m.size(); ++r)
        for (size_t c = 0; c < m[r].size(); ++c)
            t.data[r * m[r].size() + c] = static_cast<float>(m[r][c]);
    return t;
}

void merge_into_checkpoint(const nn::ParamStore<float>& store, const std::string& prefix,
                           nn::Adam<float>& opt, Checkpoint& ckpt) {
    for (const auto& [name, p] : store.params) {
        nn::Tensor<float> t;
        t.shape = p->value.shape;
        t.data = p->value.data;
        ckpt.params[prefix + name] = std::move(t);
    }
    for (const auto& [name, m] : opt.moment1()) ckpt.adam_m[prefix + name] = m;
    for (const auto& [name, v] : opt.moment2()) ckpt.adam_v[prefix + name] = v;
}

void load_prefixed(const Checkpoint& ckpt, const std::string& prefix,
                   nn::ParamStore<float>& store, nn::Adam<float>* opt) {
    for (auto& [name, p] : store.params) {
        auto it = ckpt.params.find(prefix + name);
        if (it == ckpt.params.end())
            throw std::runtime_error("checkpoint missing parameter " + prefix + name);
        if (it->second.shape != p->value.shape)
            throw std::runtime_error("checkpoint shape mismatch for " + prefix + name);
        p->value.data = it->second.data;
    }
    if (opt && ckpt.has_trainer_state) {
        for (auto& [name, _] : store.params) {
            auto mi = ckpt.adam_m.find(prefix + name);
            auto vi = ckpt.adam_v.find(prefix + name);
            if (mi != ckpt.adam_m.end()) opt->moment1()[name] = mi->second;
            if (vi != ckpt.adam_v.end()) opt->moment2()[name] = vi->second;
        }
        opt->set_step_count(ckpt.adam_step);
    }
}

}  // namespace

TrainResult train_kws(const LoadedDataset& train_set, const KwsConfig& cfg,
                      const KwsTrainParams& params, uint64_t seed, uint64_t config_hash,
                      const std::optional<Checkpoint>& resume) {
    KwsModel<float> model(cfg, seed, "kws.");
    nn::Adam<float> opt(params.adam);
    int start_epoch = 0;
    if (resume) {
        load_prefixed(*resume, "", model.store, &opt);
        start_epoch = static_cast<int>(resume->step);
    }

    const int N = static_cast<int>(train_set.utterances.size());
    if (N == 0) throw std::invalid_argument("train_kws: empty training set");
    std::vector<nn::Tensor<float>> feats;
    feats.reserve(N);
    for (const auto& u : train_set.utterances)
        feats.push_back(to_float_tensor(kws_features(u.ref_channel, cfg)));

    auto snapshot = [&](int epoch) {
        Checkpoint c;
        c.step = epoch;
        c.seed = seed;
        c.config_hash = config_hash;
        c.has_trainer_state = true;
        c.adam_step = opt.step_count();
        merge_into_checkpoint(model.store, "", opt, c);
        return c;
    };

    TrainResult result;
    result.checkpoint = snapshot(start_epoch);
    for (int epoch = start_epoch; epoch < params.epochs; ++epoch) {
        std::vector<int> order(N);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        try {
            for (int b0 = 0; b0 < N; b0 += params.batch) {
                const int bsz = std::min(params.batch, N - b0);
                model.store.zero_grads();
                for (int i = 0; i < bsz; ++i) {
                    const auto& u = train_set.utterances[order[b0 + i]];
                    auto fused = nn::const_from_tensor<float>(feats[order[b0 + i]]);
                    auto loss = model.utterance_loss(fused, u.positive);
                    const double lv = static_cast<double>(loss->value.data[0]);
                    if (!std::isfinite(lv)) throw std::runtime_error("non-finite loss");
                    epoch_loss += lv;
                    nn::backward(nn::scale(loss, 1.0f / bsz));
                }
                opt.step(model.store);
            }
        } catch (const std::runtime_error&) {
            return result;
        }
        LossReport rep;
        rep.epoch = epoch + 1;
        rep.train_loss = epoch_loss / N;
        result.curve.push_back(rep);
        result.checkpoint = snapshot(epoch + 1);
    }
    return result;
}

TrainResult joint_train(const LoadedDataset& train_set, const MlenetConfig& mcfg,
                        const KwsConfig& kcfg, const JointTrainParams& params, uint64_t seed,
                        uint64_t config_hash, const std::optional<Checkpoint>& enhance_init,
                        const std::optional<Checkpoint>& kws_init,
                        const std::optional<Checkpoint>& resume) {
    JointModel<float> model(mcfg, kcfg, seed);
    nn::Adam<float> opt_m(params.adam), opt_k(params.adam);
    int start_epoch = 0;
    if (enhance_init) model.mlenet.load(*enhance_init);
    if (kws_init) load_prefixed(*kws_init, "", model.kws.store, nullptr);
    if (resume) {
        load_prefixed(*resume, "mlenet.", model.mlenet.store, &opt_m);
        load_prefixed(*resume, "", model.kws.store, &opt_k);
        start_epoch = static_cast<int>(resume->step);
    }

    const int N = static_cast<int>(train_set.utterances.size());
    if (N == 0) throw std::invalid_argument("joint_train: empty training set");
    std::vector<AssignmentMap> maps;
    for (const auto& u : train_set.utterances)
        maps.push_back(assign_targets(mcfg.looks, u.doas_deg));

    auto snapshot = [&](int epoch) {
        Checkpoint c;
        c.step = epoch;
        c.seed = seed;
        c.config_hash = config_hash;
        c.has_trainer_state = true;
        c.adam_step = opt_m.step_count();
        merge_into_checkpoint(model.mlenet.store, "mlenet.", opt_m, c);
        merge_into_checkpoint(model.kws.store, "", opt_k, c);
        return c;
    };

    TrainResult result;
    result.checkpoint = snapshot(start_epoch);
    for (int epoch = start_epoch; epoch < params.epochs; ++epoch) {
        std::vector<int> order(N);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        try {
            for (int b0 = 0; b0 < N; b0 += params.batch) {
                const int bsz = std::min(params.batch, N - b0);
                model.mlenet.store.zero_grads();
                model.kws.store.zero_grads();
                for (int i = 0; i < bsz; ++i) {
                    const auto& u = train_set.utterances[order[b0 + i]];
                    auto feats = nn::const_from_tensor<float>(u.features);
                    auto ests = model.mlenet.enhance_graph(feats, u.ref_spec);
                    std::vector<nn::Var<float>> channels;
                    for (auto& w : ests) channels.push_back(kws_features_graph(w, kcfg));
                    channels.push_back(nn::const_matrix<float>(kws_features(u.ref_channel, kcfg)));
                    auto fused = model.kws.attention_fuse(channels);
                    auto loss = model.kws.utterance_loss(fused, u.positive);
                    if (params.enhance_loss_weight > 0.0) {
                        auto ml = multi_look_loss_graph(ests, u.refs, maps[order[b0 + i]]);
                        loss = nn::add(
                            loss, nn::scale(ml, static_cast<float>(params.enhance_loss_weight)));
                    }
                    const double lv = static_cast<double>(loss->value.data[0]);
                    if (!std::isfinite(lv)) throw std::runtime_error("non-finite loss");
                    epoch_loss += lv;
                    nn::backward(nn::scale(loss, 1.0f / bsz));
                }
                opt_m.step(model.mlenet.store);
                opt_k.step(model.kws.store);
            }
        } catch (const std::runtime_error&) {
            return result;
        }
        LossReport rep;
        rep.epoch = epoch + 1;
        rep.train_loss = epoch_loss / N;
        result.curve.push_back(rep);
        result.checkpoint = snapshot(epoch + 1);
    }
    return result;
}

WakeupReport evaluate_wakeup(const std::vector<ScoredUtterance>& scored, int fa_budget,
                             const std::string& system_name) {
    std::vector<double> neg;
    for (const auto& s : scored)
        if (!s.positive) neg.push_back(s.score);
    std::sort(neg.rbegin(), neg.rend());

    WakeupReport report;
    report.threshold =
        (fa_budget < static_cast<int>(neg.size())) ? neg[fa_budget] : 0.0;
    for (const auto& s : scored)
        if (!s.positive && s.score > report.threshold) ++report.false_alarms;

    int hit[3] = {}, n[3] = {}, off[3] = {};
    for (const auto& s : scored) {
        if (!s.positive) continue;
        n[s.bucket] += 1;
        hit[s.bucket] += s.score > report.threshold ? 1 : 0;
        off[s.bucket] += s.off_target ? 1 : 0;
    }
    for (int b = 0; b < 3; ++b) {
        WakeupRow r;
        r.system = system_name;
        r.bucket = kBucketNames[b];
        r.n = n[b];
        r.accuracy = n[b] ? static_cast<double>(hit[b]) / n[b] : 0.0;
        r.off_target_pct = n[b] ? 100.0 * off[b] / n[b] : 0.0;
        report.rows.push_back(r);
    }
    WakeupRow all;
    all.system = system_name;
    all.bucket = "all";
    all.n = n[0] + n[1] + n[2];
    all.accuracy = all.n ? static_cast<double>(hit[0] + hit[1] + hit[2]) / all.n : 0.0;
    all.off_target_pct = all.n ? 100.0 * (off[0] + off[1] + off[2]) / all.n : 0.0;
    report.rows.push_back(all);

    // threshold sweep over the negative scores (plus accept-everything)
    std::vector<double> cuts = neg;
    cuts.push_back(0.0);
    for (double cut : cuts) {
        int fa = 0, hits = 0, pos = 0;
        for (const auto& s : scored) {
            if (s.positive) {
                ++pos;
                hits += s.score > cut ? 1 : 0;
            } else {
                fa += s.score > cut ? 1 : 0;
            }
        }
        report.sweep.push_back({cut, static_cast<double>(fa),
                                pos ? static_cast<double>(hits) / pos : 0.0});
    }
    return report;
}

void write_wakeup_csv(const std::string& path, const WakeupReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "system,bucket,accuracy,n,off_target_pct,threshold,false_alarms\n";
    for (const auto& r : report.rows)
        out << r.system << "," << r.bucket << "," << r.accuracy << "," << r.n << ","
            << r.off_target_pct << "," << report.threshold << "," << report.false_alarms
            << "\n";
    std::ofstream sw(path + ".sweep.csv");
    sw << "threshold,false_alarms,hit_rate\n";
    for (const auto& s : report.sweep) sw << s[0] << "," << s[1] << "," << s[2] << "\n";
}

}  // namespace mlook
