#include "mlook/config.hpp"

#include <fstream>

#include "json.hpp"

namespace mlook {

using json = nlohmann::ordered_json;

namespace {

// Pops a key from `j` if present; whatever is left at the end is unknown.
template <typename T>
void take(json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    out = it->get<T>();
    j.erase(it);
}

void take_pair(json& j, const char* key, std::pair<double, double>& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    auto v = it->get<std::vector<double>>();
    if (v.size() != 2) throw std::runtime_error(std::string("config: ") + key + " needs 2 values");
    out = {v[0], v[1]};
    j.erase(it);
}

void reject_leftovers(const json& j, const std::string& where) {
    if (j.empty()) return;
    throw std::runtime_error("config: unknown key \"" + j.begin().key() + "\" in " + where);
}

json canonical(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["looks_deg"] = c.looks.azimuths_deg;
    j["mlenet"] = {{"repeats", c.mlenet.repeats},
                   {"blocks", c.mlenet.blocks},
                   {"channels", c.mlenet.channels},
                   {"kernel", c.mlenet.kernel},
                   {"df_normalize", c.mlenet.df_normalize}};
    j["dataset"] = {{"num_utterances", c.dataset.num_utterances},
                    {"utterance_len_s", c.dataset.utterance_len_s},
                    {"positive_fraction", c.dataset.positive_fraction},
                    {"min_interferers", c.dataset.min_interferers},
                    {"max_interferers", c.dataset.max_interferers},
                    {"t60_range_s", {c.dataset.t60_range_s.first, c.dataset.t60_range_s.second}},
                    {"room_min", c.dataset.room_min},
                    {"room_max", c.dataset.room_max},
                    {"sir_range_db", {c.dataset.sir_range_db.first, c.dataset.sir_range_db.second}},
                    {"snr_range_db", {c.dataset.snr_range_db.first, c.dataset.snr_range_db.second}},
                    {"noise_enabled", c.dataset.noise_enabled},
                    {"doa_choices", c.dataset.doa_choices},
                    {"doa_jitter_deg", c.dataset.doa_jitter_deg},
                    {"source_distance_m",
                     {c.dataset.source_distance_m.first, c.dataset.source_distance_m.second}}};
    j["train"] = {{"epochs", c.train.epochs},
                  {"batch", c.train.batch},
                  {"lr", c.train.adam.lr},
                  {"si_snr_cap", c.train.si_snr_cap}};
    j["kws"] = {{"attn_dim", c.kws_attn_dim},
                {"dense", c.kws_dense},
                {"conv_kernels", c.kws_conv_kernels}};
    return j;
}

}  // namespace

RunConfig default_run_config() {
    RunConfig c;
    c.mlenet = default_mlenet_config();
    c.looks = c.mlenet.looks;
    c.hash = config_fingerprint(c);
    return c;
}

uint64_t config_fingerprint(const RunConfig& cfg) {
    const std::string s = canonical(cfg).dump();
    uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h ? h : 1;  // 0 is reserved for "no hash"
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }

    RunConfig c;
    c.mlenet = default_mlenet_config();
    take(j, "seed", c.seed);
    std::vector<double> looks = c.mlenet.looks.azimuths_deg;
    take(j, "looks_deg", looks);
    c.looks.azimuths_deg = looks;
    c.mlenet.looks = c.looks;

    if (auto it = j.find("mlenet"); it != j.end()) {
        json m = *it;
        j.erase(it);
        take(m, "repeats", c.mlenet.repeats);
        take(m, "blocks", c.mlenet.blocks);
        take(m, "channels", c.mlenet.channels);
        take(m, "kernel", c.mlenet.kernel);
        take(m, "df_normalize", c.mlenet.df_normalize);
        reject_leftovers(m, "mlenet");
    }
    if (auto it = j.find("dataset"); it != j.end()) {
        json d = *it;
        j.erase(it);
        take(d, "num_utterances", c.dataset.num_utterances);
        take(d, "utterance_len_s", c.dataset.utterance_len_s);
        take(d, "positive_fraction", c.dataset.positive_fraction);
        take(d, "min_interferers", c.dataset.min_interferers);
        take(d, "max_interferers", c.dataset.max_interferers);
        take_pair(d, "t60_range_s", c.dataset.t60_range_s);
        take(d, "room_min", c.dataset.room_min);
        take(d, "room_max", c.dataset.room_max);
        take_pair(d, "sir_range_db", c.dataset.sir_range_db);
        take_pair(d, "snr_range_db", c.dataset.snr_range_db);
        take(d, "noise_enabled", c.dataset.noise_enabled);
        take(d, "doa_choices", c.dataset.doa_choices);
        take(d, "doa_jitter_deg", c.dataset.doa_jitter_deg);
        take_pair(d, "source_distance_m", c.dataset.source_distance_m);
        reject_leftovers(d, "dataset");
    }
    if (auto it = j.find("train"); it != j.end()) {
        json t = *it;
        j.erase(it);
        take(t, "epochs", c.train.epochs);
        take(t, "batch", c.train.batch);
        take(t, "lr", c.train.adam.lr);
        take(t, "si_snr_cap", c.train.si_snr_cap);
        reject_leftovers(t, "train");
    }
    if (auto it = j.find("kws"); it != j.end()) {
        json k = *it;
        j.erase(it);
        take(k, "attn_dim", c.kws_attn_dim);
        take(k, "dense", c.kws_dense);
        take(k, "conv_kernels", c.kws_conv_kernels);
        reject_leftovers(k, "kws");
    }
    reject_leftovers(j, "top level");

    c.looks.validate();
    c.mlenet.validate();
    c.dataset.validate();
    c.hash = config_fingerprint(c);
    return c;
}

}  // namespace mlook
