#include "mlook/roomsim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "mlook/dsp.hpp"
#include "mlook/wavio.hpp"

namespace mlook {

namespace {

constexpr double kDeg2Rad = std::numbers::pi / 180.0;
constexpr int kSincTaps = 81;  // windowed-sinc fractional delay length

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<Position> mic_world_positions(const RoomSpec& room, const ArrayGeometry& geo) {
    const double rot = room.array_rotation_deg * kDeg2Rad;
    const double cr = std::cos(rot), sr = std::sin(rot);
    std::vector<Position> out(geo.mic_positions.size());
    for (size_t i = 0; i < geo.mic_positions.size(); ++i) {
        const auto& p = geo.mic_positions[i];
        out[i] = {room.array_center.x + cr * p.x - sr * p.y,
                  room.array_center.y + sr * p.x + cr * p.y, room.array_center.z + p.z};
    }
    return out;
}

bool inside_room(const RoomSpec& room, const Position& p, double margin = 0.0) {
    return p.x >= margin && p.x <= room.length - margin && p.y >= margin &&
           p.y <= room.width - margin && p.z >= margin && p.z <= room.height - margin;
}

double signal_energy(const std::vector<double>& x, size_t lo, size_t hi) {
    double e = 0.0;
    for (size_t i = lo; i < hi && i < x.size(); ++i) e += x[i] * x[i];
    return e;
}

// [first, last) range of samples with non-negligible amplitude
std::pair<size_t, size_t> active_range(const std::vector<double>& x) {
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::fabs(v));
    if (peak <= 0.0) return {0, 0};
    const double thr = 1e-4 * peak;
    size_t lo = 0, hi = x.size();
    while (lo < hi && std::fabs(x[lo]) < thr) ++lo;
    while (hi > lo && std::fabs(x[hi - 1]) < thr) --hi;
    return {lo, hi};
}

// Schroeder T60 (T5->T25 extrapolation) of the image-lattice energy decay
// for a uniform wall coefficient beta, on a 1 ms histogram from the source to
// the array center. This is the same statistic schroeder_t60() later measures
// on the rendered RIR, minus the sinc interpolation.
double lattice_t60(const RoomSpec& room, const Position& src, double beta, double c,
                   double max_dist) {
    const double dims[3] = {room.length, room.width, room.height};
    const double spos[3] = {src.x, src.y, src.z};
    const double mpos[3] = {room.array_center.x, room.array_center.y, room.array_center.z};
    int nlim[3];
    for (int d = 0; d < 3; ++d)
        nlim[d] = static_cast<int>(std::ceil(max_dist / (2.0 * dims[d]))) + 1;
    const double bin_s = 1e-3;
    std::vector<double> hist(static_cast<size_t>(max_dist / c / bin_s) + 2, 0.0);
    for (int nx = -nlim[0]; nx <= nlim[0]; ++nx)
        for (int ny = -nlim[1]; ny <= nlim[1]; ++ny)
            for (int nz = -nlim[2]; nz <= nlim[2]; ++nz)
                for (int q = 0; q < 8; ++q) {
                    const int qb[3] = {q & 1, (q >> 1) & 1, (q >> 2) & 1};
                    const int n3[3] = {nx, ny, nz};
                    int crossings = 0;
                    double img[3];
                    for (int d = 0; d < 3; ++d) {
                        img[d] = (1 - 2 * qb[d]) * spos[d] + 2.0 * n3[d] * dims[d];
                        crossings += std::abs(2 * n3[d] - qb[d]);
                    }
                    const double dist = std::hypot(img[0] - mpos[0], img[1] - mpos[1],
                                                   img[2] - mpos[2]);
                    if (dist > max_dist) continue;
                    const double amp = std::pow(beta, crossings) /
                                       (4.0 * std::numbers::pi * std::max(dist, 1e-3));
                    hist[static_cast<size_t>(dist / c / bin_s)] += amp * amp;
                }
    std::vector<double> edc(hist.size());
    double acc = 0.0;
    for (int i = static_cast<int>(hist.size()) - 1; i >= 0; --i) {
        acc += hist[i];
        edc[i] = acc;
    }
    double t5 = -1.0, t25 = -1.0;
    for (size_t i = 0; i < edc.size(); ++i) {
        const double db = 10.0 * std::log10(edc[i] / edc[0] + 1e-300);
        if (t5 < 0.0 && db <= -5.0) t5 = static_cast<double>(i) * bin_s;
        if (t25 < 0.0 && db <= -25.0) {
            t25 = static_cast<double>(i) * bin_s;
            break;
        }
    }
    // decay range not observed within the truncated lattice: treat as "too slow"
    if (t5 < 0.0 || t25 <= t5) return 1e9;
    return 3.0 * (t25 - t5);
}

// Bisect the wall coefficient so the lattice's measured Schroeder T60 matches
// the requested value. Closed-form inversions (Sabine/Eyring) undershoot the
// image lattice's decay by up to ~35% in non-cubic rooms because the lattice
// averages exponentials across directions and crossing counts.
double calibrate_beta(const RoomSpec& room, const Position& src, double c, double max_dist) {
    double lo = 0.02, hi = 0.999;
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (lattice_t60(room, src, mid, c, max_dist) < room.t60)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

void RoomSpec::validate() const {
    if (length <= 0 || width <= 0 || height <= 0)
        throw std::invalid_argument("room dimensions must be positive");
    if (t60 < 0.0 || t60 > 0.6) throw std::invalid_argument("T60 must be in [0, 0.6] s");
    if (!inside_room(*this, array_center))
        throw std::invalid_argument("array center outside room");
}

double doa_of(const RoomSpec& room, const Position& src) {
    const double az =
        std::atan2(src.y - room.array_center.y, src.x - room.array_center.x) / kDeg2Rad;
    double doa = az - room.array_rotation_deg;
    doa = std::fmod(doa, 360.0);
    if (doa < 0.0) doa += 360.0;
    return doa;
}

std::vector<std::vector<double>> simulate_rir(const RoomSpec& room, const Position& src,
                                              const ArrayGeometry& geometry, int max_order,
                                              int sample_rate) {
    room.validate();
    geometry.validate();
    if (!inside_room(room, src)) throw std::invalid_argument("source outside room");
    const auto mics = mic_world_positions(room, geometry);
    for (const auto& m : mics) {
        if (!inside_room(room, m)) throw std::invalid_argument("microphone outside room");
        const double d = std::hypot(src.x - m.x, src.y - m.y, src.z - m.z);
        if (d < 1e-6) throw std::invalid_argument("source coincides with a microphone");
    }
    const double c = geometry.sound_speed;

    double min_direct = 1e30;
    for (const auto& m : mics)
        min_direct = std::min(min_direct, std::hypot(src.x - m.x, src.y - m.y, src.z - m.z));
    const double max_dist = min_direct + c * room.t60 + 1.0;
    const int len = static_cast<int>(std::ceil(max_dist / c * sample_rate)) + kSincTaps;

    // uniform wall reflection coefficient, calibrated so the rendered RIR's
    // Schroeder T60 matches the requested value
    double beta = 0.0;
    if (room.t60 > 0.0) beta = calibrate_beta(room, src, c, max_dist);

    const double dims[3] = {room.length, room.width, room.height};
    const double spos[3] = {src.x, src.y, src.z};
    int nlim[3];
    for (int d = 0; d < 3; ++d)
        nlim[d] = (room.t60 > 0.0 && beta > 0.0)
                      ? static_cast<int>(std::ceil(max_dist / (2.0 * dims[d]))) + 1
                      : 0;

    const int half = kSincTaps / 2;
    std::vector<double> sinc_win(kSincTaps);
    for (int i = 0; i < kSincTaps; ++i)
        sinc_win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (kSincTaps - 1));

    std::vector<std::vector<double>> rirs(mics.size(), std::vector<double>(len, 0.0));
    for (size_t mi = 0; mi < mics.size(); ++mi) {
        const double mpos[3] = {mics[mi].x, mics[mi].y, mics[mi].z};
        for (int nx = -nlim[0]; nx <= nlim[0]; ++nx)
            for (int ny = -nlim[1]; ny <= nlim[1]; ++ny)
                for (int nz = -nlim[2]; nz <= nlim[2]; ++nz)
                    for (int q = 0; q < 8; ++q) {
                        const int qb[3] = {q & 1, (q >> 1) & 1, (q >> 2) & 1};
                        const int n3[3] = {nx, ny, nz};
                        int crossings = 0;
                        double img[3];
                        for (int d = 0; d < 3; ++d) {
                            img[d] = (1 - 2 * qb[d]) * spos[d] + 2.0 * n3[d] * dims[d];
                            crossings += std::abs(2 * n3[d] - qb[d]);
                        }
                        if (crossings > 0 && beta <= 0.0) continue;
                        if (max_order >= 0 && crossings > max_order) continue;
                        const double dist = std::hypot(img[0] - mpos[0], img[1] - mpos[1],
                                                       img[2] - mpos[2]);
                        if (dist > max_dist) continue;
                        const double amp = std::pow(beta, crossings) /
                                           (4.0 * std::numbers::pi * std::max(dist, 1e-3));
                        const double delay = dist / c * sample_rate;
                        const int center = static_cast<int>(std::lround(delay));
                        for (int i = -half; i <= half; ++i) {
                            const int n = center + i;
                            if (n < 0 || n >= len) continue;
                            const double t = n - delay;
                            const double sinc =
                                (std::fabs(t) < 1e-12)
                                    ? 1.0
                                    : std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
                            rirs[mi][n] += amp * sinc * sinc_win[i + half];
                        }
                    }
    }
    if (beta > 0.0) {
        // DC-block reverberant responses (~100 Hz first-order highpass).
        // Image impulses are all positive, so dense late reflections pile up
        // coherently at DC and inflate the measured decay time; removing the
        // low-frequency buildup is the standard image-method post-filter.
        const double R = 1.0 - 2.0 * std::numbers::pi * 100.0 / sample_rate;
        for (auto& h : rirs) {
            double px = 0.0, py = 0.0;
            for (auto& v : h) {
                const double y = v - px + R * py;
                px = v;
                py = y;
                v = y;
            }
        }
    }
    return rirs;
}

double schroeder_t60(const std::vector<double>& rir, int sample_rate) {
    std::vector<double> edc(rir.size());
    double acc = 0.0;
    for (int i = static_cast<int>(rir.size()) - 1; i >= 0; --i) {
        acc += rir[i] * rir[i];
        edc[i] = acc;
    }
    if (acc <= 0.0) throw std::invalid_argument("empty impulse response");
    int t5 = -1, t25 = -1;
    for (size_t i = 0; i < edc.size(); ++i) {
        const double db = 10.0 * std::log10(edc[i] / edc[0] + 1e-300);
        if (t5 < 0 && db <= -5.0) t5 = static_cast<int>(i);
        if (t25 < 0 && db <= -25.0) {
            t25 = static_cast<int>(i);
            break;
        }
    }
    if (t5 < 0 || t25 < 0 || t25 <= t5) throw std::runtime_error("decay range not observed");
    return 60.0 * (t25 - t5) / (20.0 * sample_rate);
}

std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& h) {
    if (x.empty() || h.empty()) return {};
    const size_t out_len = x.size() + h.size() - 1;
    size_t n = 1;
    while (n < out_len) n <<= 1;
    std::vector<std::complex<double>> X(n), H(n);
    for (size_t i = 0; i < x.size(); ++i) X[i] = x[i];
    for (size_t i = 0; i < h.size(); ++i) H[i] = h[i];
    fft(X, false);
    fft(H, false);
    for (size_t i = 0; i < n; ++i) X[i] *= H[i];
    fft(X, true);
    std::vector<double> out(out_len);
    for (size_t i = 0; i < out_len; ++i) out[i] = X[i].real();
    return out;
}

MixtureRecord render_and_mix(const RoomSpec& room, const ArrayGeometry& geometry,
                             const std::vector<SourcePlacement>& placements,
                             std::pair<double, double> sir_range_db,
                             std::pair<double, double> snr_range_db, uint64_t seed) {
    room.validate();
    const int C = geometry.num_mics();
    int num_targets = 0;
    for (const auto& p : placements) num_targets += (p.role == SourceRole::kTarget);
    if (num_targets < 1) throw std::invalid_argument("need at least one target source");

    std::mt19937_64 rng(splitmix64(seed));
    std::uniform_real_distribution<double> sir_dist(sir_range_db.first, sir_range_db.second);
    std::uniform_real_distribution<double> snr_dist(snr_range_db.first, snr_range_db.second);

    // render every source at every mic
    std::vector<std::vector<std::vector<double>>> renders(placements.size());
    size_t mix_len = 0;
    for (size_t s = 0; s < placements.size(); ++s) {
        const auto& pl = placements[s];
        if (signal_energy(pl.dry_signal.samples, 0, pl.dry_signal.size()) <= 0.0)
            throw std::invalid_argument("zero-energy dry signal");
        const auto rirs = simulate_rir(room, pl.position, geometry);
        renders[s].resize(C);
        for (int c = 0; c < C; ++c) {
            renders[s][c] = convolve(pl.dry_signal.samples, rirs[c]);
            mix_len = std::max(mix_len, renders[s][c].size());
        }
    }
    for (auto& src : renders)
        for (auto& ch : src) ch.resize(mix_len, 0.0);

    // scale interferers to sampled SIR against the first target (overlap region)
    size_t target_idx = 0;
    while (placements[target_idx].role != SourceRole::kTarget) ++target_idx;
    const auto tgt_act = active_range(renders[target_idx][0]);
    const double tgt_energy =
        signal_energy(renders[target_idx][0], tgt_act.first, tgt_act.second);

    std::vector<double> scales(placements.size(), 1.0), sirs;
    double snr_db = 999.0;  // sentinel: no noise source present
    for (size_t s = 0; s < placements.size(); ++s) {
        if (s == target_idx) continue;
        const auto& pl = placements[s];
        const auto act = active_range(renders[s][0]);
        const size_t lo = std::max(act.first, tgt_act.first);
        const size_t hi = std::min(act.second, tgt_act.second);
        const bool overlapped = hi > lo;
        const double et = overlapped ? signal_energy(renders[target_idx][0], lo, hi) : tgt_energy;
        const double es = overlapped ? signal_energy(renders[s][0], lo, hi)
                                     : signal_energy(renders[s][0], act.first, act.second);
        if (es <= 0.0) throw std::invalid_argument("zero-energy rendered source");
        if (pl.role == SourceRole::kInterferer || pl.role == SourceRole::kTarget) {
            const double sir = sir_dist(rng);
            scales[s] = std::sqrt(et / es * std::pow(10.0, -sir / 10.0));
            if (pl.role == SourceRole::kInterferer) sirs.push_back(sir);
        } else {  // noise
            snr_db = snr_dist(rng);
            scales[s] = std::sqrt(tgt_energy / es * std::pow(10.0, -snr_db / 10.0));
        }
    }

    MixtureRecord rec;
    std::vector<Waveform> mix_ch(C);
    for (int c = 0; c < C; ++c) {
        mix_ch[c].samples.assign(mix_len, 0.0);
        for (size_t s = 0; s < placements.size(); ++s)
            for (size_t i = 0; i < mix_len; ++i)
                mix_ch[c].samples[i] += scales[s] * renders[s][c][i];
    }
    rec.mixture = MultiChannelWaveform(std::move(mix_ch));
    for (size_t s = 0; s < placements.size(); ++s) {
        if (placements[s].role == SourceRole::kNoise) continue;
        std::vector<double> ref(mix_len);
        for (size_t i = 0; i < mix_len; ++i) ref[i] = scales[s] * renders[s][0][i];
        rec.references.emplace_back(std::move(ref));
        rec.doas_deg.push_back(doa_of(room, placements[s].position));
    }
    rec.sirs_db = std::move(sirs);
    rec.snr_db = snr_db;
    rec.t60_s = room.t60;
    rec.room_dims_m = {room.length, room.width, room.height};
    return rec;
}

// ---- synthetic signals ----------------------------------------------------

Waveform speech_shaped_signal(int num_samples, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> x(num_samples);
    double lp = 0.0, lp2 = 0.0, dc = 0.0;
    for (int i = 0; i < num_samples; ++i) {
        lp = 0.85 * lp + gauss(rng);
        lp2 = 0.6 * lp2 + lp;
        dc = 0.995 * dc + 0.005 * lp2;
        x[i] = lp2 - dc;
    }
    // syllabic amplitude modulation, 2..5 Hz
    const double mod_hz = 2.0 + 3.0 * uni(rng);
    const double phase = 2.0 * std::numbers::pi * uni(rng);
    for (int i = 0; i < num_samples; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const double env =
            0.15 + 0.85 * 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * mod_hz * t + phase));
        x[i] *= env;
    }
    double rms = std::sqrt(signal_energy(x, 0, x.size()) / num_samples);
    for (auto& v : x) v *= 0.1 / std::max(rms, 1e-12);
    return Waveform(std::move(x));
}

Waveform keyword_signal(int num_samples, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double f0_base[3] = {220.0, 330.0, 270.0};
    const double seg_s = 0.16, ramp_s = 0.01;
    const int seg_len = static_cast<int>(seg_s * kSampleRate);
    const int ramp = static_cast<int>(ramp_s * kSampleRate);
    const int total = 3 * seg_len;
    if (num_samples < total) throw std::invalid_argument("keyword buffer too short");

    const double jitter = 0.97 + 0.06 * uni(rng);
    std::vector<double> kw(total, 0.0);
    double phase_acc[5] = {};
    for (int seg = 0; seg < 3; ++seg) {
        const double f0 = f0_base[seg] * jitter;
        for (int i = 0; i < seg_len; ++i) {
            double env = 1.0;
            if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
            if (i >= seg_len - ramp)
                env = 0.5 - 0.5 * std::cos(std::numbers::pi * (seg_len - 1 - i) / ramp);
            double v = 0.0;
            for (int h = 0; h < 5; ++h) {
                phase_acc[h] += 2.0 * std::numbers::pi * f0 * (h + 1) / kSampleRate;
                v += std::sin(phase_acc[h]) / (h + 1);
            }
            kw[seg * seg_len + i] = env * v;
        }
    }
    double rms = std::sqrt(signal_energy(kw, 0, kw.size()) / total);
    for (auto& v : kw) v *= 0.1 / std::max(rms, 1e-12);

    const int offset = static_cast<int>(uni(rng) * (num_samples - total));
    std::vector<double> out(num_samples, 0.0);
    std::copy(kw.begin(), kw.end(), out.begin() + offset);
    return Waveform(std::move(out));
}

// ---- dataset generation ---------------------------------------------------

void DatasetRecipe::validate() const {
    if (num_utterances <= 0) throw std::invalid_argument("num_utterances must be > 0");
    if (utterance_len_s <= 0.1) throw std::invalid_argument("utterance too short");
    if (positive_fraction < 0.0 || positive_fraction > 1.0)
        throw std::invalid_argument("positive_fraction outside [0,1]");
    if (min_interferers < 0 || max_interferers < min_interferers || max_interferers > 2)
        throw std::invalid_argument("interferer count must satisfy 0 <= min <= max <= 2");
    if (t60_range_s.first < 0.0 || t60_range_s.second > 0.6 ||
        t60_range_s.first > t60_range_s.second)
        throw std::invalid_argument("t60 range must lie in [0, 0.6]");
    if (room_min.size() != 3 || room_max.size() != 3)
        throw std::invalid_argument("room dims need 3 values");
    for (int d = 0; d < 3; ++d)
        if (room_min[d] <= 0 || room_max[d] < room_min[d])
            throw std::invalid_argument("invalid room dimension range");
}

namespace {

ManifestEntry generate_one(const DatasetRecipe& recipe, const ArrayGeometry& geometry,
                           const std::string& out_dir, uint64_t seed, int index) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<uint64_t>(index) + 1)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    RoomSpec room;
    room.length = recipe.room_min[0] + uni(rng) * (recipe.room_max[0] - recipe.room_min[0]);
    room.width = recipe.room_min[1] + uni(rng) * (recipe.room_max[1] - recipe.room_min[1]);
    room.height = recipe.room_min[2] + uni(rng) * (recipe.room_max[2] - recipe.room_min[2]);
    room.t60 = recipe.t60_range_s.first +
               uni(rng) * (recipe.t60_range_s.second - recipe.t60_range_s.first);
    room.array_center = {room.length / 2.0 + (uni(rng) - 0.5) * (room.length - 2.0) * 0.5,
                         room.width / 2.0 + (uni(rng) - 0.5) * (room.width - 2.0) * 0.5,
                         std::min(1.2, room.height / 2.0)};
    room.array_rotation_deg = 0.0;

    const bool positive = uni(rng) < recipe.positive_fraction;
    const int num_intf = recipe.min_interferers +
                         static_cast<int>(uni(rng) * (recipe.max_interferers -
                                                      recipe.min_interferers + 1)) %
                             (recipe.max_interferers - recipe.min_interferers + 1);
    const int num_samples = static_cast<int>(recipe.utterance_len_s * kSampleRate);

    auto place_at = [&](double doa_deg) {
        std::uniform_real_distribution<double> dd(recipe.source_distance_m.first,
                                                  recipe.source_distance_m.second);
        double dist = dd(rng);
        const double az = (doa_deg + room.array_rotation_deg) * kDeg2Rad;
        Position p;
        for (; dist > 0.3; dist *= 0.8) {
            p = {room.array_center.x + dist * std::cos(az),
                 room.array_center.y + dist * std::sin(az), room.array_center.z};
            if (inside_room(room, p, 0.1)) break;
        }
        return p;
    };
    auto draw_doa = [&](int slot) {
        double base = recipe.doa_choices.empty()
                          ? 360.0 * uni(rng)
                          : recipe.doa_choices[slot % recipe.doa_choices.size()];
        double jit = recipe.doa_choices.empty() ? 0.0
                                                : (uni(rng) * 2.0 - 1.0) * recipe.doa_jitter_deg;
        double d = std::fmod(base + jit, 360.0);
        return d < 0.0 ? d + 360.0 : d;
    };

    std::vector<SourcePlacement> placements;
    {
        SourcePlacement tgt;
        tgt.role = SourceRole::kTarget;
        tgt.position = place_at(draw_doa(0));
        tgt.dry_signal =
            positive ? keyword_signal(num_samples, rng) : speech_shaped_signal(num_samples, rng);
        placements.push_back(std::move(tgt));
    }
    for (int j = 0; j < num_intf; ++j) {
        SourcePlacement in;
        in.role = SourceRole::kInterferer;
        in.position = place_at(draw_doa(j + 1));
        in.dry_signal = speech_shaped_signal(num_samples, rng);
        placements.push_back(std::move(in));
    }
    if (recipe.noise_enabled) {
        SourcePlacement nz;
        nz.role = SourceRole::kNoise;
        nz.position = place_at(360.0 * uni(rng));
        nz.dry_signal = speech_shaped_signal(num_samples, rng);
        placements.push_back(std::move(nz));
    }

    const uint64_t mix_seed = splitmix64(seed ^ 0xabcdef) ^ static_cast<uint64_t>(index);
    auto rec = render_and_mix(room, geometry, placements, recipe.sir_range_db,
                              recipe.snr_range_db, mix_seed);
    rec.positive = positive;

    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "utt_%05d", index);
    ManifestEntry e;
    e.id = idbuf;
    e.path = std::string("wavs/") + idbuf + ".wav";
    e.label = positive ? "positive" : "negative";
    e.doas_deg = rec.doas_deg;
    e.sirs_db = rec.sirs_db;
    e.snr_db = rec.snr_db;
    e.t60_s = rec.t60_s;
    e.room_dims_m = rec.room_dims_m;
    e.num_sources = static_cast<int>(rec.references.size());
    write_wav(out_dir + "/" + e.path, rec.mixture);
    for (size_t s = 0; s < rec.references.size(); ++s) {
        std::string rp = std::string("refs/") + idbuf + "_src" + std::to_string(s) + ".wav";
        write_wav(out_dir + "/" + rp, rec.references[s]);
        e.ref_paths.push_back(rp);
    }
    return e;
}

nlohmann::ordered_json entry_to_json(const ManifestEntry& e) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["path"] = e.path;
    j["label"] = e.label;
    j["doas_deg"] = e.doas_deg;
    j["sirs_db"] = e.sirs_db;
    j["snr_db"] = e.snr_db;
    j["t60_s"] = e.t60_s;
    j["room_dims_m"] = e.room_dims_m;
    j["num_sources"] = e.num_sources;
    j["ref_paths"] = e.ref_paths;
    return j;
}

}  // namespace

std::vector<ManifestEntry> generate_dataset(const DatasetRecipe& recipe,
                                            const ArrayGeometry& geometry,
                                            const std::string& out_dir, uint64_t seed,
                                            uint64_t config_hash, int jobs) {
    recipe.validate();
    geometry.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir + "/wavs");
    fs::create_directories(out_dir + "/refs");

    std::vector<ManifestEntry> entries(recipe.num_utterances);
    const int nthreads = std::max(1, jobs);
    std::vector<std::thread> workers;
    std::exception_ptr first_error;
    std::mutex err_mu;
    for (int w = 0; w < nthreads; ++w) {
        workers.emplace_back([&, w] {
            for (int i = w; i < recipe.num_utterances; i += nthreads) {
                try {
                    entries[i] = generate_one(recipe, geometry, out_dir, seed, i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);

    std::ofstream mf(out_dir + "/manifest.jsonl");
    if (!mf) throw std::runtime_error("cannot write manifest");
    for (const auto& e : entries) {
        auto j = entry_to_json(e);
        if (config_hash) j["config_hash"] = config_hash;
        mf << j.dump() << "\n";
    }
    return entries;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        ManifestEntry e;
        e.id = j.at("id");
        e.path = j.at("path");
        e.label = j.at("label");
        e.doas_deg = j.at("doas_deg").get<std::vector<double>>();
        e.sirs_db = j.at("sirs_db").get<std::vector<double>>();
        e.snr_db = j.at("snr_db");
        e.t60_s = j.at("t60_s");
        e.room_dims_m = j.at("room_dims_m").get<std::vector<double>>();
        e.num_sources = j.at("num_sources");
        e.ref_paths = j.at("ref_paths").get<std::vector<std::string>>();
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace mlook
