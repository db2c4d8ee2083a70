#include "mlook/beamform.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mlook {

std::complex<double> steering_element(const ArrayGeometry& geo, int mic, double theta_deg,
                                      double freq_hz) {
    const double th = theta_deg * std::numbers::pi / 180.0;
    const auto& p = geo.mic_positions[mic];
    // plane wave from azimuth theta reaches mics nearer the source first
    const double proj = std::cos(th) * p.x + std::sin(th) * p.y;
    const double phase = 2.0 * std::numbers::pi * freq_hz * proj / geo.sound_speed;
    return {std::cos(phase), std::sin(phase)};
}

FixedBeamformer design_delay_and_sum(const ArrayGeometry& geometry, double theta_deg,
                                     const StftConfig& cfg) {
    geometry.validate();
    cfg.validate();
    const int F = cfg.num_bins();
    const int C = geometry.num_mics();
    const double bin_hz = static_cast<double>(kSampleRate) / cfg.fft_size;

    FixedBeamformer bf;
    bf.look_azimuth_deg = theta_deg;
    bf.weights.assign(F, std::vector<std::complex<double>>(C));
    for (int f = 0; f < F; ++f)
        for (int c = 0; c < C; ++c)
            bf.weights[f][c] = steering_element(geometry, c, theta_deg, f * bin_hz) /
                               static_cast<double>(C);
    return bf;
}

ComplexSpectrogram apply_beamformer(const FixedBeamformer& bf,
                                    const std::vector<ComplexSpectrogram>& specs) {
    const int C = static_cast<int>(specs.size());
    if (C == 0 || C != static_cast<int>(bf.weights.empty() ? 0 : bf.weights[0].size()))
        throw std::invalid_argument("apply_beamformer: channel count mismatch");
    const int T = specs[0].num_frames(), F = specs[0].num_bins();
    if (F != static_cast<int>(bf.weights.size()))
        throw std::invalid_argument("apply_beamformer: bin count mismatch");
    for (const auto& s : specs)
        if (s.num_frames() != T || s.num_bins() != F)
            throw std::invalid_argument("apply_beamformer: spectrogram shape mismatch");

    ComplexSpectrogram out;
    out.values.assign(T, std::vector<std::complex<double>>(F));
    for (int t = 0; t < T; ++t)
        for (int f = 0; f < F; ++f) {
            std::complex<double> acc = 0.0;
            for (int c = 0; c < C; ++c)
                acc += std::conj(bf.weights[f][c]) * specs[c].values[t][f];
            out.values[t][f] = acc;
        }
    return out;
}

}  // namespace mlook
