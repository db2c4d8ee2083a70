#include "mlook/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mlook/wavio.hpp"

namespace mlook {

namespace {

std::vector<double> zero_mean(const std::vector<double>& x) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] - mean;
    return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

double si_snr(const Waveform& est, const Waveform& ref, double cap) {
    if (est.samples.size() != ref.samples.size() || est.samples.empty())
        throw std::invalid_argument("si_snr: length mismatch");
    const auto x = zero_mean(ref.samples);
    const auto xh = zero_mean(est.samples);
    const double xx = dot(x, x);
    if (xx <= 0.0) throw std::invalid_argument("si_snr: zero reference");
    const double a = dot(xh, x) / xx;
    double sig = 0.0, noise = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double t = a * x[i];
        const double e = xh[i] - t;
        sig += t * t;
        noise += e * e;
    }
    if (sig <= 0.0) return -cap;
    if (noise <= 0.0) return cap;
    return std::clamp(10.0 * std::log10(sig / noise), -cap, cap);
}

AssignmentMap assign_targets(const LookDirectionSet& looks, const std::vector<double>& doas_deg) {
    if (doas_deg.empty()) throw std::invalid_argument("assign_targets: no sources");
    AssignmentMap map;
    for (double look : looks.azimuths_deg) {
        int best = 0;
        double best_d = circular_angle_distance(look, doas_deg[0]);
        for (size_t j = 1; j < doas_deg.size(); ++j) {
            const double d = circular_angle_distance(look, doas_deg[j]);
            if (d < best_d) {  // strict: ties keep the lowest source index
                best_d = d;
                best = static_cast<int>(j);
            }
        }
        map.source_of_look.push_back(best);
        map.distance_deg.push_back(best_d);
    }
    return map;
}

bool is_off_target(const AssignmentMap& map, int src) {
    return std::find(map.source_of_look.begin(), map.source_of_look.end(), src) ==
           map.source_of_look.end();
}

double multi_look_loss(const std::vector<Waveform>& ests, const std::vector<Waveform>& refs,
                       const AssignmentMap& map, double cap) {
    if (ests.size() != map.source_of_look.size())
        throw std::invalid_argument("multi_look_loss: look count mismatch");
    double total = 0.0;
    for (size_t k = 0; k < ests.size(); ++k)
        total += si_snr(ests[k], refs.at(map.source_of_look[k]), cap);
    return -total;
}

LoadedDataset load_training_data(const std::string& dataset_dir,
                                 const std::vector<ManifestEntry>& entries,
                                 const MlenetConfig& cfg) {
    LoadedDataset data;
    data.utterances.reserve(entries.size());
    for (const auto& e : entries) {
        TrainUtterance u;
        u.id = e.id;
        u.positive = e.label == "positive";
        u.doas_deg = e.doas_deg;
        u.sirs_db = e.sirs_db;
        auto mix = read_wav(dataset_dir + "/" + e.path);
        std::vector<ComplexSpectrogram> specs;
        for (const auto& ch : mix.channels) specs.push_back(stft(ch, cfg.stft));
        auto feats = assemble_features(specs, cfg);
        u.features = nn::Tensor<float>({static_cast<int>(feats.size()), cfg.feature_width()});
        for (size_t t = 0; t < feats.size(); ++t)
            for (int c = 0; c < cfg.feature_width(); ++c)
                u.features.data[t * cfg.feature_width() + c] = static_cast<float>(feats[t][c]);
        u.ref_spec = std::move(specs[0]);
        const size_t L = cfg.stft.window_len + (u.ref_spec.num_frames() - 1) * cfg.stft.hop;
        u.ref_channel.samples.assign(mix.channels[0].samples.begin(),
                                     mix.channels[0].samples.begin() + L);
        for (const auto& rp : e.ref_paths) {
            auto ref = read_wav(dataset_dir + "/" + rp);
            Waveform r;
            r.samples.assign(ref.channels.at(0).samples.begin(),
                             ref.channels.at(0).samples.begin() + L);
            u.refs.push_back(std::move(r));
        }
        if (u.refs.size() != u.doas_deg.size())
            throw std::runtime_error("load_training_data: refs/doas mismatch for " + e.id);
        data.utterances.push_back(std::move(u));
    }
    return data;
}

namespace {

double mean_best_look_si_snr(MlenetModel<float>& model, const LoadedDataset& data) {
    double total = 0.0;
    for (const auto& u : data.utterances) {
        auto feats = nn::const_from_tensor<float>(u.features);
        auto waves = model.enhance_graph(feats, u.ref_spec);
        double best = -kSiSnrCapDb;
        for (auto& w : waves) {
            Waveform est;
            est.samples.assign(w->value.data.begin(), w->value.data.end());
            best = std::max(best, si_snr(est, u.refs[0]));
        }
        total += best;
    }
    return data.utterances.empty() ? 0.0 : total / data.utterances.size();
}

}  // namespace

TrainResult train_mlenet(const LoadedDataset& train_set, const LoadedDataset* val_set,
                         const MlenetConfig& cfg, const TrainParams& params, uint64_t seed,
                         uint64_t config_hash, const std::optional<Checkpoint>& resume) {
    MlenetModel<float> model(cfg, seed);
    nn::Adam<float> opt(params.adam);
    int start_epoch = 0;
    if (resume) {
        model.load(*resume);
        if (resume->has_trainer_state) {
            opt.moment1() = resume->adam_m;
            opt.moment2() = resume->adam_v;
            opt.set_step_count(resume->adam_step);
        }
        start_epoch = static_cast<int>(resume->step);
    }

    const int N = static_cast<int>(train_set.utterances.size());
    if (N == 0) throw std::invalid_argument("train_mlenet: empty training set");
    std::vector<AssignmentMap> maps;
    for (const auto& u : train_set.utterances)
        maps.push_back(assign_targets(cfg.looks, u.doas_deg));

    auto snapshot = [&](int epoch) {
        Checkpoint c = model.to_checkpoint(epoch, seed, config_hash);
        c.has_trainer_state = true;
        c.adam_step = opt.step_count();
        c.adam_m = opt.moment1();
        c.adam_v = opt.moment2();
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
                    auto feats = nn::const_from_tensor<float>(u.features);
                    auto ests = model.enhance_graph(feats, u.ref_spec);
                    auto loss = multi_look_loss_graph(ests, u.refs, maps[order[b0 + i]],
                                                      params.si_snr_cap);
                    const double lv = static_cast<double>(loss->value.data[0]);
                    if (!std::isfinite(lv)) throw std::runtime_error("non-finite loss");
                    epoch_loss += lv;
                    nn::backward(nn::scale(loss, 1.0f / bsz));
                }
                opt.step(model.store);
            }
        } catch (const std::runtime_error&) {
            // Non-finite loss or gradient: stop and keep the last finite state.
            return result;
        }
        LossReport rep;
        rep.epoch = epoch + 1;
        rep.train_loss = epoch_loss / N;
        if (val_set) rep.val_best_look_si_snr = mean_best_look_si_snr(model, *val_set);
        result.curve.push_back(rep);
        result.checkpoint = snapshot(epoch + 1);
    }
    return result;
}

int sir_bucket(const std::vector<double>& sirs_db) {
    if (sirs_db.empty()) return 2;
    const double min_sir = *std::min_element(sirs_db.begin(), sirs_db.end());
    return min_sir < 6.0 ? 0 : 1;
}

namespace {

std::vector<BucketRow> finalize_rows(const std::string& system, const double sum[3],
                                     const int n[3], const int off[3]) {
    std::vector<BucketRow> rows;
    for (int b = 0; b < 3; ++b) {
        BucketRow r;
        r.system = system;
        r.bucket = kBucketNames[b];
        r.n = n[b];
        r.mean_si_snr_db = n[b] ? sum[b] / n[b] : 0.0;
        r.off_target_pct = n[b] ? 100.0 * off[b] / n[b] : 0.0;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

std::vector<BucketRow> evaluate_si_snr_buckets(MlenetModel<float>& model,
                                               const LoadedDataset& data,
                                               const std::string& system_name) {
    double sum[3] = {};
    int n[3] = {}, off[3] = {};
    for (const auto& u : data.utterances) {
        const int b = sir_bucket(u.sirs_db);
        auto map = assign_targets(model.cfg.looks, u.doas_deg);
        auto feats = nn::const_from_tensor<float>(u.features);
        auto waves = model.enhance_graph(feats, u.ref_spec);
        double best = -kSiSnrCapDb;
        for (auto& w : waves) {
            Waveform est;
            est.samples.assign(w->value.data.begin(), w->value.data.end());
            best = std::max(best, si_snr(est, u.refs[0]));
        }
        sum[b] += best;
        n[b] += 1;
        off[b] += is_off_target(map, 0) ? 1 : 0;
    }
    return finalize_rows(system_name, sum, n, off);
}

std::vector<BucketRow> evaluate_raw_buckets(const LoadedDataset& data) {
    double sum[3] = {};
    int n[3] = {}, off[3] = {};
    for (const auto& u : data.utterances) {
        const int b = sir_bucket(u.sirs_db);
        sum[b] += si_snr(u.ref_channel, u.refs[0]);
        n[b] += 1;
    }
    return finalize_rows("raw", sum, n, off);
}

void write_bucket_csv(const std::string& path, const std::vector<BucketRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "system,bucket,mean_si_snr_db,n,off_target_pct\n";
    for (const auto& r : rows)
        out << r.system << "," << r.bucket << "," << r.mean_si_snr_db << "," << r.n << ","
            << r.off_target_pct << "\n";
}

}  // namespace mlook
