#include "mlook/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mlook {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void fft(std::vector<std::complex<double>>& data, bool inverse) {
    const int n = static_cast<int>(data.size());
    if (!is_pow2(n)) throw std::invalid_argument("fft size must be a power of two");
    // bit reversal
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / len;
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                std::complex<double> u = data[i + k];
                std::complex<double> v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (auto& x : data) x /= static_cast<double>(n);
    }
}

std::vector<std::complex<double>> rfft(const std::vector<double>& x, int n) {
    std::vector<std::complex<double>> buf(n);
    const int m = std::min<int>(n, static_cast<int>(x.size()));
    for (int i = 0; i < m; ++i) buf[i] = x[i];
    fft(buf, false);
    buf.resize(n / 2 + 1);
    return buf;
}

std::vector<double> irfft(const std::vector<std::complex<double>>& spec, int n) {
    if (static_cast<int>(spec.size()) != n / 2 + 1)
        throw std::invalid_argument("irfft: spectrum size mismatch");
    std::vector<std::complex<double>> buf(n);
    for (int f = 0; f <= n / 2; ++f) buf[f] = spec[f];
    for (int f = n / 2 + 1; f < n; ++f) buf[f] = std::conj(spec[n - f]);
    fft(buf, true);
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = buf[i].real();
    return out;
}

void StftConfig::validate() const {
    if (!(hop > 0 && hop <= window_len && window_len <= fft_size))
        throw std::invalid_argument("StftConfig requires 0 < hop <= window_len <= fft_size");
    if (!is_pow2(fft_size)) throw std::invalid_argument("fft_size must be a power of two");
    if (window != "hann" && window != "rect")
        throw std::invalid_argument("unknown window: " + window);
}

std::vector<double> StftConfig::make_window() const {
    std::vector<double> w(window_len, 1.0);
    if (window == "hann") {
        // periodic Hann
        for (int i = 0; i < window_len; ++i)
            w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / window_len);
    }
    return w;
}

ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg) {
    cfg.validate();
    const int len = static_cast<int>(wave.size());
    if (len < cfg.window_len) throw std::invalid_argument("input too short");
    const int T = 1 + (len - cfg.window_len) / cfg.hop;
    const auto win = cfg.make_window();

    ComplexSpectrogram spec;
    spec.values.resize(T);
    std::vector<double> frame(cfg.window_len);
    for (int t = 0; t < T; ++t) {
        const int off = t * cfg.hop;
        for (int i = 0; i < cfg.window_len; ++i) frame[i] = wave.samples[off + i] * win[i];
        spec.values[t] = rfft(frame, cfg.fft_size);
    }
    return spec;
}

Waveform istft(const ComplexSpectrogram& spec, const StftConfig& cfg) {
    cfg.validate();
    const int T = spec.num_frames();
    if (T == 0) throw std::invalid_argument("empty spectrogram");
    if (spec.num_bins() != cfg.num_bins())
        throw std::invalid_argument("spectrogram bins do not match config");

    const int out_len = cfg.window_len + (T - 1) * cfg.hop;
    const auto win = cfg.make_window();
    std::vector<double> acc(out_len, 0.0), norm(out_len, 0.0);
    for (int t = 0; t < T; ++t) {
        const auto frame = irfft(spec.values[t], cfg.fft_size);
        const int off = t * cfg.hop;
        for (int i = 0; i < cfg.window_len; ++i) {
            acc[off + i] += frame[i] * win[i];
            norm[off + i] += win[i] * win[i];
        }
    }
    // Floor the overlap-add envelope: at the unpaired first/last hop the
    // squared-window sum decays toward zero, and dividing by it would blow up
    // edge samples by orders of magnitude. The interior envelope is ~1, so a
    // 1e-2 floor only touches the edge taper and bounds amplification.
    for (int i = 0; i < out_len; ++i) {
        acc[i] /= std::max(norm[i], kColaNormFloor);
    }
    return Waveform(std::move(acc));
}

std::vector<std::vector<double>> log_power_spectrum(const ComplexSpectrogram& spec) {
    std::vector<std::vector<double>> lps(spec.num_frames());
    for (int t = 0; t < spec.num_frames(); ++t) {
        lps[t].resize(spec.values[t].size());
        for (size_t f = 0; f < spec.values[t].size(); ++f)
            lps[t][f] = std::log(std::norm(spec.values[t][f]) + kLogEps);
    }
    return lps;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

std::vector<std::vector<double>> mel_filterbank(int n_mels, int fft_size, int sample_rate) {
    const int n_bins = fft_size / 2 + 1;
    const double mel_lo = hz_to_mel(0.0);
    const double mel_hi = hz_to_mel(sample_rate / 2.0);
    std::vector<double> centers(n_mels + 2);
    for (int i = 0; i < n_mels + 2; ++i)
        centers[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

    std::vector<std::vector<double>> fb(n_mels, std::vector<double>(n_bins, 0.0));
    for (int m = 0; m < n_mels; ++m) {
        const double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
        for (int f = 0; f < n_bins; ++f) {
            const double hz = static_cast<double>(f) * sample_rate / fft_size;
            if (hz > lo && hz < mid)
                fb[m][f] = (hz - lo) / (mid - lo);
            else if (hz >= mid && hz < hi)
                fb[m][f] = (hi - hz) / (hi - mid);
        }
    }
    return fb;
}

std::vector<std::vector<double>> logmel_fbank(const Waveform& wave, const FbankConfig& cfg) {
    const int len = static_cast<int>(wave.size());
    if (len < cfg.frame_len) throw std::invalid_argument("input shorter than one frame");
    const int T = 1 + (len - cfg.frame_len) / cfg.frame_shift;
    const auto fb = mel_filterbank(cfg.n_mels, cfg.fft_size, wave.sample_rate);
    const int n_bins = cfg.fft_size / 2 + 1;

    std::vector<double> win(cfg.frame_len);
    for (int i = 0; i < cfg.frame_len; ++i)
        win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.frame_len);

    std::vector<std::vector<double>> out(T, std::vector<double>(cfg.n_mels));
    std::vector<double> frame(cfg.frame_len);
    for (int t = 0; t < T; ++t) {
        const int off = t * cfg.frame_shift;
        for (int i = 0; i < cfg.frame_len; ++i) frame[i] = wave.samples[off + i] * win[i];
        const auto spec = rfft(frame, cfg.fft_size);
        std::vector<double> power(n_bins);
        for (int f = 0; f < n_bins; ++f) power[f] = std::norm(spec[f]);
        for (int m = 0; m < cfg.n_mels; ++m) {
            double e = 0.0;
            for (int f = 0; f < n_bins; ++f) e += fb[m][f] * power[f];
            out[t][m] = std::log(e + kLogEps);
        }
    }
    return out;
}

std::vector<std::vector<double>> add_deltas_and_stack(
    const std::vector<std::vector<double>>& fbank, int left, int right) {
    const int T = static_cast<int>(fbank.size());
    if (T == 0) throw std::invalid_argument("empty fbank");
    const int B = static_cast<int>(fbank[0].size());

    auto clamp_t = [T](int t) { return std::clamp(t, 0, T - 1); };
    // +/-2 frame regression deltas with edge replication
    auto deltas = [&](const std::vector<std::vector<double>>& x) {
        std::vector<std::vector<double>> d(T, std::vector<double>(B));
        for (int t = 0; t < T; ++t)
            for (int b = 0; b < B; ++b) {
                double num = 0.0;
                for (int n = 1; n <= 2; ++n)
                    num += n * (x[clamp_t(t + n)][b] - x[clamp_t(t - n)][b]);
                d[t][b] = num / 10.0;  // 2 * (1^2 + 2^2)
            }
        return d;
    };
    const auto d1 = deltas(fbank);
    const auto d2 = deltas(d1);

    const int ctx = left + 1 + right;
    std::vector<std::vector<double>> out(T, std::vector<double>(B * 3 * ctx));
    for (int t = 0; t < T; ++t) {
        int idx = 0;
        for (int c = -left; c <= right; ++c) {
            const int tc = clamp_t(t + c);
            for (int b = 0; b < B; ++b) out[t][idx++] = fbank[tc][b];
            for (int b = 0; b < B; ++b) out[t][idx++] = d1[tc][b];
            for (int b = 0; b < B; ++b) out[t][idx++] = d2[tc][b];
        }
    }
    return out;
}

}  // namespace mlook
