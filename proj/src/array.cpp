#include "mlook/array.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace mlook {

namespace {
constexpr double kDeg2Rad = std::numbers::pi / 180.0;
}

ArrayGeometry ArrayGeometry::uniform_circular(int num_mics, double radius) {
    ArrayGeometry geo;
    geo.mic_positions.resize(num_mics);
    for (int i = 0; i < num_mics; ++i) {
        const double az = 2.0 * std::numbers::pi * i / num_mics;
        geo.mic_positions[i] = {radius * std::cos(az), radius * std::sin(az), 0.0};
    }
    return geo;
}

void ArrayGeometry::validate() const {
    if (num_mics() < 2) throw std::invalid_argument("array needs at least 2 mics");
    if (sound_speed <= 0) throw std::invalid_argument("sound_speed must be > 0");
    for (int i = 0; i < num_mics(); ++i)
        for (int j = i + 1; j < num_mics(); ++j) {
            const auto& a = mic_positions[i];
            const auto& b = mic_positions[j];
            if (a.x == b.x && a.y == b.y && a.z == b.z)
                throw std::invalid_argument("mic positions must be distinct");
        }
}

MicPair make_pair(const ArrayGeometry& geo, int m1, int m2) {
    if (m1 == m2) throw std::invalid_argument("pair mics must differ");
    if (m1 < 0 || m2 < 0 || m1 >= geo.num_mics() || m2 >= geo.num_mics())
        throw std::invalid_argument("mic index out of range");
    const auto& a = geo.mic_positions[m1];
    const auto& b = geo.mic_positions[m2];
    const double dx = a.x - b.x, dy = a.y - b.y;
    MicPair p;
    p.m1 = m1;
    p.m2 = m2;
    p.distance = std::sqrt(dx * dx + dy * dy);
    p.axis_azimuth = std::atan2(dy, dx) / kDeg2Rad;
    return p;
}

std::vector<MicPair> default_pairs(const ArrayGeometry& geo) {
    if (geo.num_mics() != 6)
        throw std::invalid_argument("default pair set is defined for the 6-mic array");
    // mic i sits at azimuth 60*i degrees
    const std::vector<std::pair<int, int>> idx = {{0, 3}, {1, 4}, {2, 5}, {0, 1}, {2, 3}, {4, 5}};
    std::vector<MicPair> pairs;
    pairs.reserve(idx.size());
    for (auto [a, b] : idx) pairs.push_back(make_pair(geo, a, b));
    return pairs;
}

void LookDirectionSet::validate() const {
    if (azimuths_deg.empty()) throw std::invalid_argument("look set must be non-empty");
    std::set<double> seen;
    for (double a : azimuths_deg) {
        if (a < 0.0 || a >= 360.0) throw std::invalid_argument("look azimuth outside [0,360)");
        if (!seen.insert(a).second) throw std::invalid_argument("duplicate look azimuth");
    }
}

double circular_angle_distance(double a_deg, double b_deg) {
    double d = std::fmod(std::fabs(a_deg - b_deg), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

double steering_phase(double theta_deg, double freq_hz, const MicPair& pair, double sound_speed) {
    const double angle = (theta_deg - pair.axis_azimuth) * kDeg2Rad;
    return 2.0 * std::numbers::pi * freq_hz * pair.distance * std::cos(angle) / sound_speed;
}

double wrap_phase(double phase) {
    const double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(phase, two_pi);
    if (w <= -std::numbers::pi) w += two_pi;
    if (w > std::numbers::pi) w -= two_pi;
    return w;
}

std::vector<std::vector<double>> ipd(const ComplexSpectrogram& spec_m1,
                                     const ComplexSpectrogram& spec_m2) {
    if (spec_m1.num_frames() != spec_m2.num_frames() || spec_m1.num_bins() != spec_m2.num_bins())
        throw std::invalid_argument("ipd: spectrogram shape mismatch");
    const int T = spec_m1.num_frames(), F = spec_m1.num_bins();
    std::vector<std::vector<double>> out(T, std::vector<double>(F));
    for (int t = 0; t < T; ++t)
        for (int f = 0; f < F; ++f)
            out[t][f] = wrap_phase(std::arg(spec_m1.values[t][f]) - std::arg(spec_m2.values[t][f]));
    return out;
}

std::vector<std::vector<double>> directional_feature(
    const std::vector<std::vector<std::vector<double>>>& ipds, double theta_deg,
    const std::vector<MicPair>& pairs, double sound_speed, const StftConfig& cfg,
    bool normalize) {
    const size_t M = pairs.size();
    if (M == 0) throw std::invalid_argument("directional_feature: no mic pairs");
    if (ipds.size() != M) throw std::invalid_argument("directional_feature: ipds/pairs mismatch");
    const int T = static_cast<int>(ipds[0].size());
    const int F = T > 0 ? static_cast<int>(ipds[0][0].size()) : 0;
    for (const auto& m : ipds)
        if (static_cast<int>(m.size()) != T || (T > 0 && static_cast<int>(m[0].size()) != F))
            throw std::invalid_argument("directional_feature: inconsistent ipd shapes");

    const double bin_hz = static_cast<double>(kSampleRate) / cfg.fft_size;
    std::vector<std::vector<double>> out(T, std::vector<double>(F, 0.0));
    for (size_t m = 0; m < M; ++m) {
        for (int f = 0; f < F; ++f) {
            const double steer = steering_phase(theta_deg, f * bin_hz, pairs[m], sound_speed);
            for (int t = 0; t < T; ++t) out[t][f] += std::cos(steer - ipds[m][t][f]);
        }
    }
    if (normalize) {
        for (auto& row : out)
            for (auto& v : row) v /= static_cast<double>(M);
    }
    return out;
}

double freefield_df_approx(double theta_source_deg, double theta_look_deg,
                           const std::vector<MicPair>& pairs, double freq_hz, double sound_speed,
                           bool normalize) {
    if (pairs.empty()) throw std::invalid_argument("freefield_df_approx: no mic pairs");
    double acc = 0.0;
    for (const auto& p : pairs) {
        const double a = steering_phase(theta_look_deg, freq_hz, p, sound_speed);
        const double b = steering_phase(theta_source_deg, freq_hz, p, sound_speed);
        acc += std::cos(a - b);
    }
    return normalize ? acc / static_cast<double>(pairs.size()) : acc;
}

}  // namespace mlook
