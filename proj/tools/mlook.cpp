// mlook: one binary covering the whole pipeline — dataset simulation,
// feature extraction, fixed beamforming, enhancement / keyword training,
// inference, evaluation, and a finite-difference gradient check.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlook/beamform.hpp"
#include "mlook/config.hpp"
#include "mlook/kws.hpp"
#include "mlook/wavio.hpp"

namespace fs = std::filesystem;
using namespace mlook;

namespace {

int log_level() {
    const char* v = std::getenv("MLOOK_LOG");
    if (!v) return 1;
    const std::string s = v;
    return s == "error" ? 0 : s == "debug" ? 2 : 1;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[mlook] " << msg << "\n";
}

uint64_t manifest_config_hash(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    std::string line;
    if (!in || !std::getline(in, line)) return 0;
    auto j = nlohmann::json::parse(line);
    return j.value("config_hash", uint64_t{0});
}

void check_hash(uint64_t expected, uint64_t got, const std::string& what, bool force) {
    if (!expected || !got || expected == got) return;
    if (force) {
        info("config hash mismatch on " + what + " (overridden by --force)");
        return;
    }
    throw std::runtime_error("error=config_hash_mismatch artifact=" + what +
                             " hint=pass --force to override");
}

struct CommonOpts {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = ".";
    int jobs = 1;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "run config JSON");
    cmd->add_option("--seed", o.seed, "seed override")->each([&](const std::string&) {
        o.seed_set = true;
    });
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--jobs", o.jobs, "worker threads");
    cmd->add_flag("--force", o.force, "ignore config hash mismatches");
}

RunConfig load_cfg(const CommonOpts& o) {
    RunConfig cfg = o.config_path.empty() ? default_run_config() : load_run_config(o.config_path);
    if (o.seed_set) cfg.seed = o.seed;
    return cfg;
}

LoadedDataset load_data(const std::string& data_dir, const RunConfig& cfg, bool force) {
    const std::string manifest = data_dir + "/manifest.jsonl";
    check_hash(cfg.hash, manifest_config_hash(manifest), manifest, force);
    return load_training_data(data_dir, read_manifest(manifest), cfg.mlenet);
}

void write_loss_curve(const std::string& path, const std::vector<LossReport>& curve) {
    std::ofstream out(path);
    out << "epoch,train_loss,val_best_look_si_snr\n";
    for (const auto& r : curve)
        out << r.epoch << "," << r.train_loss << "," << r.val_best_look_si_snr << "\n";
}

std::optional<Checkpoint> maybe_load(const std::string& path, uint64_t cfg_hash, bool force) {
    if (path.empty()) return std::nullopt;
    auto c = load_checkpoint(path);
    check_hash(cfg_hash, c.config_hash, path, force);
    return c;
}

// ---- subcommand bodies -----------------------------------------------------

int run_simulate(const CommonOpts& o) {
    auto cfg = load_cfg(o);
    fs::create_directories(o.out_dir);
    auto entries = generate_dataset(cfg.dataset, ArrayGeometry::uniform_circular(6, 0.035),
                                    o.out_dir, cfg.seed, cfg.hash, o.jobs);
    info("simulate: wrote " + std::to_string(entries.size()) + " utterances to " + o.out_dir);
    return 0;
}

int run_features(const CommonOpts& o, const std::string& in_wav) {
    auto cfg = load_cfg(o);
    auto mix = read_wav(in_wav);
    std::vector<ComplexSpectrogram> specs;
    for (const auto& ch : mix.channels) specs.push_back(stft(ch, cfg.mlenet.stft));
    auto feats = assemble_features(specs, cfg.mlenet);
    fs::create_directories(o.out_dir);
    std::ofstream bin(o.out_dir + "/features.f32", std::ios::binary);
    for (const auto& row : feats)
        for (double v : row) {
            const float f = static_cast<float>(v);
            bin.write(reinterpret_cast<const char*>(&f), 4);
        }
    nlohmann::ordered_json meta{{"frames", feats.size()},
                                {"width", cfg.mlenet.feature_width()},
                                {"config_hash", cfg.hash}};
    std::ofstream(o.out_dir + "/features.json") << meta.dump(2) << "\n";
    info("features: " + std::to_string(feats.size()) + " frames x " +
         std::to_string(cfg.mlenet.feature_width()));
    return 0;
}

int run_beamform(const CommonOpts& o, const std::string& in_wav) {
    auto cfg = load_cfg(o);
    auto geo = ArrayGeometry::uniform_circular(6, 0.035);
    auto mix = read_wav(in_wav);
    std::vector<ComplexSpectrogram> specs;
    for (const auto& ch : mix.channels) specs.push_back(stft(ch, cfg.mlenet.stft));
    fs::create_directories(o.out_dir);
    for (double look : cfg.looks.azimuths_deg) {
        auto bf = design_delay_and_sum(geo, look, cfg.mlenet.stft);
        auto wave = istft(apply_beamformer(bf, specs), cfg.mlenet.stft);
        write_wav(o.out_dir + "/beam_" + std::to_string(static_cast<int>(look)) + ".wav", wave);
    }
    info("beamform: wrote " + std::to_string(cfg.looks.size()) + " beams");
    return 0;
}

int run_train_enhance(const CommonOpts& o, const std::string& data_dir,
                      const std::string& resume_path) {
    auto cfg = load_cfg(o);
    auto data = load_data(data_dir, cfg, o.force);
    auto resume = maybe_load(resume_path, cfg.hash, o.force);
    auto result = train_mlenet(data, nullptr, cfg.mlenet, cfg.train, cfg.seed, cfg.hash, resume);
    fs::create_directories(o.out_dir);
    save_checkpoint(o.out_dir + "/mlenet.ckpt", result.checkpoint);
    write_loss_curve(o.out_dir + "/loss_curve.csv", result.curve);
    info("train-enhance: " + std::to_string(result.curve.size()) + " epochs");
    return 0;
}

KwsConfig kws_cfg_of(const RunConfig& cfg) {
    KwsConfig k;
    k.attn_dim = cfg.kws_attn_dim;
    k.dense = cfg.kws_dense;
    k.conv_kernels = cfg.kws_conv_kernels;
    return k;
}

int run_train_kws(const CommonOpts& o, const std::string& data_dir,
                  const std::string& resume_path) {
    auto cfg = load_cfg(o);
    auto data = load_data(data_dir, cfg, o.force);
    KwsTrainParams params;
    params.epochs = cfg.train.epochs;
    params.batch = cfg.train.batch;
    params.adam = cfg.train.adam;
    auto resume = maybe_load(resume_path, cfg.hash, o.force);
    auto result = train_kws(data, kws_cfg_of(cfg), params, cfg.seed, cfg.hash, resume);
    fs::create_directories(o.out_dir);
    save_checkpoint(o.out_dir + "/kws.ckpt", result.checkpoint);
    write_loss_curve(o.out_dir + "/loss_curve.csv", result.curve);
    info("train-kws: " + std::to_string(result.curve.size()) + " epochs");
    return 0;
}

int run_joint_train(const CommonOpts& o, const std::string& data_dir,
                    const std::string& enhance_init, const std::string& kws_init,
                    const std::string& resume_path, double enhance_loss_weight) {
    auto cfg = load_cfg(o);
    auto data = load_data(data_dir, cfg, o.force);
    JointTrainParams params;
    params.epochs = cfg.train.epochs;
    params.batch = cfg.train.batch;
    params.adam = cfg.train.adam;
    params.enhance_loss_weight = enhance_loss_weight;
    auto result = joint_train(data, cfg.mlenet, kws_cfg_of(cfg), params, cfg.seed, cfg.hash,
                              maybe_load(enhance_init, cfg.hash, o.force),
                              maybe_load(kws_init, cfg.hash, o.force),
                              maybe_load(resume_path, cfg.hash, o.force));
    fs::create_directories(o.out_dir);
    save_checkpoint(o.out_dir + "/joint.ckpt", result.checkpoint);
    write_loss_curve(o.out_dir + "/loss_curve.csv", result.curve);
    info("joint-train: " + std::to_string(result.curve.size()) + " epochs");
    return 0;
}

int run_enhance(const CommonOpts& o, const std::string& ckpt_path, const std::string& in_wav,
                bool dump_masks) {
    auto cfg = load_cfg(o);
    MlenetModel<float> model(cfg.mlenet, cfg.seed);
    auto ckpt = load_checkpoint(ckpt_path);
    check_hash(cfg.hash, ckpt.config_hash, ckpt_path, o.force);
    model.load(ckpt);
    auto mix = read_wav(in_wav);
    fs::create_directories(o.out_dir);
    std::vector<ComplexSpectrogram> specs;
    for (const auto& ch : mix.channels) specs.push_back(stft(ch, cfg.mlenet.stft));
    auto feats = assemble_features(specs, cfg.mlenet);
    auto masks = model.predict_masks(feats);
    for (int k = 0; k < cfg.looks.size(); ++k) {
        auto wave = nn::mask_istft(masks[k], specs[0], cfg.mlenet.stft);
        Waveform w;
        w.samples.assign(wave->value.data.begin(), wave->value.data.end());
        const std::string tag = std::to_string(static_cast<int>(cfg.looks.azimuths_deg[k]));
        write_wav(o.out_dir + "/look_" + tag + ".wav", w);
        if (dump_masks) {
            std::ofstream bin(o.out_dir + "/mask_" + tag + ".f32", std::ios::binary);
            for (float v : masks[k]->value.data)
                bin.write(reinterpret_cast<const char*>(&v), 4);
        }
    }
    info("enhance: wrote " + std::to_string(cfg.looks.size()) + " looks");
    return 0;
}

int run_evaluate_enhance(const CommonOpts& o, const std::string& data_dir,
                         const std::string& ckpt_path, const std::string& system) {
    auto cfg = load_cfg(o);
    auto data = load_data(data_dir, cfg, o.force);
    auto rows = evaluate_raw_buckets(data);
    if (!ckpt_path.empty()) {
        MlenetModel<float> model(cfg.mlenet, cfg.seed);
        auto ckpt = load_checkpoint(ckpt_path);
        check_hash(cfg.hash, ckpt.config_hash, ckpt_path, o.force);
        // Joint checkpoints carry the "mlenet." prefix; plain ones don't.
        if (ckpt.params.count("mlenet.enc.w")) {
            Checkpoint stripped = ckpt;
            stripped.params.clear();
            for (const auto& [name, t] : ckpt.params)
                if (name.rfind("mlenet.", 0) == 0) stripped.params[name.substr(7)] = t;
            model.load(stripped);
        } else {
            model.load(ckpt);
        }
        auto mrows = evaluate_si_snr_buckets(model, data, system);
        rows.insert(rows.end(), mrows.begin(), mrows.end());
    }
    fs::create_directories(o.out_dir);
    write_bucket_csv(o.out_dir + "/enhance_report.csv", rows);
    for (const auto& r : rows)
        info(r.system + " " + r.bucket + ": " + std::to_string(r.mean_si_snr_db) + " dB (n=" +
             std::to_string(r.n) + ")");
    return 0;
}

int run_evaluate_kws(const CommonOpts& o, const std::string& data_dir,
                     const std::string& ckpt_path, int fa_budget, const std::string& system) {
    auto cfg = load_cfg(o);
    auto data = load_data(data_dir, cfg, o.force);
    auto ckpt = load_checkpoint(ckpt_path);
    check_hash(cfg.hash, ckpt.config_hash, ckpt_path, o.force);
    const bool joint = ckpt.params.count("mlenet.enc.w") > 0;

    JointModel<float> model(cfg.mlenet, kws_cfg_of(cfg), cfg.seed);
    if (joint) {
        Checkpoint stripped = ckpt;
        stripped.params.clear();
        for (const auto& [name, t] : ckpt.params)
            if (name.rfind("mlenet.", 0) == 0) stripped.params[name.substr(7)] = t;
        model.mlenet.load(stripped);
    }
    for (auto& [name, p] : model.kws.store.params) {
        auto it = ckpt.params.find(name);
        if (it == ckpt.params.end())
            throw std::runtime_error("error=missing_param name=" + name);
        p->value.data = it->second.data;
    }

    std::vector<ScoredUtterance> scored;
    for (const auto& u : data.utterances) {
        ScoredUtterance s;
        s.positive = u.positive;
        s.bucket = sir_bucket(u.sirs_db);
        s.off_target = is_off_target(assign_targets(cfg.looks, u.doas_deg), 0);
        if (joint) {
            s.score = model.kws.utterance_score(model.score_graph(u));
        } else {
            auto fused = nn::const_matrix<float>(kws_features(u.ref_channel, model.kws.cfg));
            s.score = model.kws.utterance_score(fused);
        }
        scored.push_back(s);
    }
    auto report = evaluate_wakeup(scored, fa_budget, system);
    fs::create_directories(o.out_dir);
    write_wakeup_csv(o.out_dir + "/kws_report.csv", report);
    for (const auto& r : report.rows)
        info(r.system + " " + r.bucket + ": acc=" + std::to_string(r.accuracy) + " (n=" +
             std::to_string(r.n) + ")");
    return 0;
}

int run_grad_check(const CommonOpts& o);

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-look speech enhancement + keyword spotting pipeline"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string in_wav, data_dir, ckpt, resume, enh_init, kws_init, system = "mlenet";
    bool dump_masks = false;
    double aux_weight = 0.0;
    int fa_budget = 2;

    auto* sim = app.add_subcommand("simulate", "generate a simulated dataset");
    add_common(sim, o);

    auto* feat = app.add_subcommand("features", "LPS/IPD/DF features of a mixture WAV");
    add_common(feat, o);
    feat->add_option("--in", in_wav, "input multichannel WAV")->required();

    auto* beam = app.add_subcommand("beamform", "delay-and-sum beams over the look set");
    add_common(beam, o);
    beam->add_option("--in", in_wav, "input multichannel WAV")->required();

    auto* tren = app.add_subcommand("train-enhance", "train the enhancement network");
    add_common(tren, o);
    tren->add_option("--data", data_dir, "dataset directory")->required();
    tren->add_option("--resume", resume, "checkpoint to resume from");

    auto* trkw = app.add_subcommand("train-kws", "train the keyword spotter alone");
    add_common(trkw, o);
    trkw->add_option("--data", data_dir, "dataset directory")->required();
    trkw->add_option("--resume", resume, "checkpoint to resume from");

    auto* joint = app.add_subcommand("joint-train", "fine-tune enhancement + spotter jointly");
    add_common(joint, o);
    joint->add_option("--data", data_dir, "dataset directory")->required();
    joint->add_option("--init-enhance", enh_init, "enhancement checkpoint to start from");
    joint->add_option("--init-kws", kws_init, "spotter checkpoint to start from");
    joint->add_option("--resume", resume, "joint checkpoint to resume from");
    joint->add_option("--aux-si-snr-weight", aux_weight,
                      "weight of the auxiliary multi-look SI-SNR loss");

    auto* enh = app.add_subcommand("enhance", "run enhancement on a mixture WAV");
    add_common(enh, o);
    enh->add_option("--ckpt", ckpt, "model checkpoint")->required();
    enh->add_option("--in", in_wav, "input multichannel WAV")->required();
    enh->add_flag("--dump-masks", dump_masks, "also write per-look mask matrices");

    auto* evev = app.add_subcommand("evaluate-enhance", "SIR-bucketed SI-SNR report");
    add_common(evev, o);
    evev->add_option("--data", data_dir, "dataset directory")->required();
    evev->add_option("--ckpt", ckpt, "model checkpoint (omit for raw-only)");
    evev->add_option("--system", system, "row label for the model");

    auto* evkw = app.add_subcommand("evaluate-kws", "wake-up accuracy report");
    add_common(evkw, o);
    evkw->add_option("--data", data_dir, "dataset directory")->required();
    evkw->add_option("--ckpt", ckpt, "spotter or joint checkpoint")->required();
    evkw->add_option("--fa-budget", fa_budget, "allowed false alarms on the negatives");
    evkw->add_option("--system", system, "row label");

    auto* gc = app.add_subcommand("grad-check", "finite-difference gradient check");
    add_common(gc, o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate(o);
        if (feat->parsed()) return run_features(o, in_wav);
        if (beam->parsed()) return run_beamform(o, in_wav);
        if (tren->parsed()) return run_train_enhance(o, data_dir, resume);
        if (trkw->parsed()) return run_train_kws(o, data_dir, resume);
        if (joint->parsed())
            return run_joint_train(o, data_dir, enh_init, kws_init, resume, aux_weight);
        if (enh->parsed()) return run_enhance(o, ckpt, in_wav, dump_masks);
        if (evev->parsed()) return run_evaluate_enhance(o, data_dir, ckpt, system);
        if (evkw->parsed()) return run_evaluate_kws(o, data_dir, ckpt, fa_budget, system);
        if (gc->parsed()) return run_grad_check(o);
    } catch (const std::exception& e) {
        std::cerr << "error=\"" << e.what() << "\"\n";
        return 1;
    }
    return 0;
}

namespace {

// End-to-end finite-difference check in double precision on a micro example:
// 2-look model, short mixture, multi-look loss w.r.t. a handful of encoder
// weights, plus the spotter path w.r.t. attention weights.
int run_grad_check(const CommonOpts& o) {
    MlenetConfig cfg = default_mlenet_config();
    cfg.looks.azimuths_deg = {0.0, 180.0};
    cfg.repeats = 1;
    cfg.blocks = 2;
    cfg.channels = 8;
    const uint64_t seed = o.seed_set ? o.seed : 11;

    // tiny synthetic mixture: random 6-channel noise, two random references
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    const int L = cfg.stft.window_len + 2 * cfg.stft.hop;  // 3 frames
    MultiChannelWaveform mix;
    mix.channels.resize(6);
    for (auto& ch : mix.channels) {
        ch.samples.resize(L);
        for (auto& v : ch.samples) v = 0.1 * g(rng);
    }
    std::vector<Waveform> refs(2);
    for (auto& r : refs) {
        r.samples.resize(L);
        for (auto& v : r.samples) v = 0.1 * g(rng);
    }
    AssignmentMap map = assign_targets(cfg.looks, {10.0, 200.0});

    std::vector<ComplexSpectrogram> specs;
    for (const auto& ch : mix.channels) specs.push_back(stft(ch, cfg.stft));
    auto feats = assemble_features(specs, cfg);

    MlenetModel<double> model(cfg, seed);
    auto loss_fn = [&] {
        auto ests = model.enhance_graph(feats, specs[0]);
        return multi_look_loss_graph(ests, refs, map);
    };
    auto loss = loss_fn();
    model.store.zero_grads();
    nn::backward(loss);

    double max_rel = 0.0;
    auto probe = [&](const std::string& name, size_t idx) {
        auto p = model.store.params.at(name);
        const double h = 1e-5;
        const double keep = p->value.data[idx];
        p->value.data[idx] = keep + h;
        const double up = loss_fn()->value.data[0];
        p->value.data[idx] = keep - h;
        const double dn = loss_fn()->value.data[0];
        p->value.data[idx] = keep;
        const double fd = (up - dn) / (2 * h);
        const double an = p->grad.data[idx];
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
        max_rel = std::max(max_rel, rel);
        if (log_level() >= 2)
            std::cerr << "[mlook] " << name << "[" << idx << "] fd=" << fd << " an=" << an
                      << " rel=" << rel << "\n";
    };
    probe("enc.w", 0);
    probe("enc.w", 101);
    probe("enc.b", 3);
    probe("block.0.0.conv.w", 5);
    probe("block.0.1.prelu", 0);
    probe("head.w", 7);
    probe("head.b", 1);

    std::cout << "max_relative_error=" << max_rel << "\n";
    return max_rel > 1e-4 ? 1 : 0;
}

}  // namespace
