#include "mlook/mlenet.hpp"

namespace mlook {

MlenetConfig default_mlenet_config() {
    MlenetConfig cfg;
    auto geo = ArrayGeometry::uniform_circular();
    cfg.pairs = default_pairs(geo);
    cfg.sound_speed = geo.sound_speed;
    return cfg;
}

std::vector<std::vector<double>> assemble_features(const std::vector<ComplexSpectrogram>& specs,
                                                   const MlenetConfig& cfg) {
    cfg.validate();
    if (specs.empty()) throw std::invalid_argument("assemble_features: no channels");
    const int C = static_cast<int>(specs.size());
    for (const auto& p : cfg.pairs)
        if (p.m1 >= C || p.m2 >= C)
            throw std::invalid_argument("assemble_features: pair index exceeds channel count");
    const int T = specs[0].num_frames(), F = specs[0].num_bins();
    if (F != cfg.num_bins())
        throw std::invalid_argument("assemble_features: bin count does not match config");
    for (const auto& s : specs)
        if (s.num_frames() != T || s.num_bins() != F)
            throw std::invalid_argument("assemble_features: channel shape mismatch");

    const auto lps = log_power_spectrum(specs[0]);
    std::vector<std::vector<std::vector<double>>> ipds;
    ipds.reserve(cfg.pairs.size());
    for (const auto& p : cfg.pairs) ipds.push_back(ipd(specs[p.m1], specs[p.m2]));

    const int M = static_cast<int>(cfg.pairs.size());
    const int K = cfg.looks.size();
    std::vector<std::vector<double>> out(T, std::vector<double>(F * (1 + M + K)));
    for (int t = 0; t < T; ++t) {
        std::copy(lps[t].begin(), lps[t].end(), out[t].begin());
        for (int m = 0; m < M; ++m)
            std::copy(ipds[m][t].begin(), ipds[m][t].end(), out[t].begin() + F * (1 + m));
    }
    for (int k = 0; k < K; ++k) {
        auto df = directional_feature(ipds, cfg.looks.azimuths_deg[k], cfg.pairs,
                                      cfg.sound_speed, cfg.stft, cfg.df_normalize);
        for (int t = 0; t < T; ++t)
            std::copy(df[t].begin(), df[t].end(), out[t].begin() + F * (1 + M + k));
    }
    return out;
}

MlenetConfig dae_config(const MlenetConfig& base, double oracle_doa_deg) {
    MlenetConfig cfg = base;
    double az = std::fmod(oracle_doa_deg, 360.0);
    if (az < 0.0) az += 360.0;
    cfg.looks.azimuths_deg = {az};
    return cfg;
}

}  // namespace mlook
