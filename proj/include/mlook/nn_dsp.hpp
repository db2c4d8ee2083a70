#ifndef MLOOK_NN_DSP_HPP
#define MLOOK_NN_DSP_HPP

// Differentiable signal-path ops bridging the autodiff graph and dsp-core:
// masked iSTFT synthesis, log-mel front end, delta/context stacking, the
// limited-weight-sharing region convolution, and the SI-SNR objective.
// Internals compute in double regardless of the graph scalar type.

#include <algorithm>
#include <complex>

#include "mlook/dsp.hpp"
#include "mlook/nn.hpp"

namespace mlook::nn {

template <typename T>
Var<T> const_matrix(const std::vector<std::vector<double>>& m) {
    const int R = static_cast<int>(m.size());
    const int C = R ? static_cast<int>(m[0].size()) : 0;
    Tensor<T> t({R, C});
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) t.at(r, c) = static_cast<T>(m[r][c]);
    return constant(std::move(t));
}

template <typename T>
Var<T> const_col(const std::vector<double>& v) {
    Tensor<T> t({static_cast<int>(v.size()), 1});
    for (size_t i = 0; i < v.size(); ++i) t.data[i] = static_cast<T>(v[i]);
    return constant(std::move(t));
}

template <typename T>
Var<T> const_from_tensor(const Tensor<float>& t) {
    Tensor<T> out(t.shape);
    for (size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<T>(t.data[i]);
    return constant(std::move(out));
}

// mask [T x F] applied to the reference-channel complex spectrogram, followed
// by overlap-add iSTFT. Output is a column vector [L x 1].
template <typename T>
Var<T> mask_istft(Var<T> mask, const ComplexSpectrogram& ref, const StftConfig& cfg) {
    cfg.validate();
    const int Tn = ref.num_frames(), F = ref.num_bins();
    if (mask->value.rows() != Tn || mask->value.cols() != F)
        throw std::invalid_argument("mask_istft: mask/spectrogram shape mismatch");
    const int N = cfg.fft_size, W = cfg.window_len, H = cfg.hop;
    const int L = W + (Tn - 1) * H;
    const auto win = cfg.make_window();

    std::vector<double> norm(L, 0.0);
    for (int t = 0; t < Tn; ++t)
        for (int i = 0; i < W; ++i) norm[t * H + i] += win[i] * win[i];
    // Same envelope floor as istft(), so a unity mask reproduces it exactly.
    for (auto& v : norm) v = std::max(v, kColaNormFloor);

    std::vector<double> out(L, 0.0);
    for (int t = 0; t < Tn; ++t) {
        std::vector<std::complex<double>> spec(F);
        for (int f = 0; f < F; ++f)
            spec[f] = static_cast<double>(mask->value.at(t, f)) * ref.values[t][f];
        const auto frame = irfft(spec, N);
        for (int i = 0; i < W; ++i) out[t * H + i] += frame[i] * win[i];
    }
    for (int i = 0; i < L; ++i) out[i] /= norm[i];

    Tensor<T> val({L, 1});
    for (int i = 0; i < L; ++i) val.data[i] = static_cast<T>(out[i]);
    auto n = detail::make_op(std::move(val), {mask});
    n->backward_fn = [n_raw = n.get(), mask, ref, win, norm, Tn, F, N, W, H] {
        if (!mask->requires_grad) return;
        for (int t = 0; t < Tn; ++t) {
            std::vector<double> gframe(N, 0.0);
            for (int i = 0; i < W; ++i)
                gframe[i] = static_cast<double>(n_raw->grad.data[t * H + i]) / norm[t * H + i] *
                            win[i];
            auto gspec = rfft(gframe, N);
            for (int f = 0; f < F; ++f) {
                const double cf = (f == 0 || f == N / 2) ? 1.0 : 2.0;
                const std::complex<double> gs = gspec[f] * (cf / N);
                mask->grad.at(t, f) += static_cast<T>(gs.real() * ref.values[t][f].real() +
                                                      gs.imag() * ref.values[t][f].imag());
            }
        }
    };
    return n;
}

// Log-mel filterbank of a waveform column vector [L x 1] -> [T' x n_mels].
template <typename T>
Var<T> fbank_graph(Var<T> wave, const FbankConfig& cfg) {
    const int L = wave->value.rows();
    if (L < cfg.frame_len) throw std::invalid_argument("fbank_graph: input too short");
    const int Tn = 1 + (L - cfg.frame_len) / cfg.frame_shift;
    const int N = cfg.fft_size, FL = cfg.frame_len, FS = cfg.frame_shift;
    const int n_bins = N / 2 + 1;
    const auto fb = mel_filterbank(cfg.n_mels, N, kSampleRate);

    std::vector<double> win(FL);
    for (int i = 0; i < FL; ++i)
        win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / FL);

    // forward, keeping per-frame spectra and mel energies for the backward pass
    auto spectra = std::make_shared<std::vector<std::vector<std::complex<double>>>>(Tn);
    auto energies = std::make_shared<std::vector<std::vector<double>>>(
        Tn, std::vector<double>(cfg.n_mels));
    Tensor<T> val({Tn, cfg.n_mels});
    std::vector<double> frame(FL);
    for (int t = 0; t < Tn; ++t) {
        for (int i = 0; i < FL; ++i)
            frame[i] = static_cast<double>(wave->value.data[t * FS + i]) * win[i];
        (*spectra)[t] = rfft(frame, N);
        for (int m = 0; m < cfg.n_mels; ++m) {
            double e = 0.0;
            for (int f = 0; f < n_bins; ++f) e += fb[m][f] * std::norm((*spectra)[t][f]);
            (*energies)[t][m] = e;
            val.at(t, m) = static_cast<T>(std::log(e + kLogEps));
        }
    }
    auto n = detail::make_op(std::move(val), {wave});
    n->backward_fn = [n_raw = n.get(), wave, fb, win, spectra, energies, Tn, N, FL, FS, n_bins,
                      n_mels = cfg.n_mels] {
        if (!wave->requires_grad) return;
        for (int t = 0; t < Tn; ++t) {
            std::vector<double> dpow(n_bins, 0.0);
            for (int m = 0; m < n_mels; ++m) {
                const double dlog =
                    static_cast<double>(n_raw->grad.at(t, m)) / ((*energies)[t][m] + kLogEps);
                for (int f = 0; f < n_bins; ++f) dpow[f] += fb[m][f] * dlog;
            }
            // d|X_f|^2 -> windowed frame samples: with Z_f = dpow_f * X_f,
            // dL/dframe[n] = N*irfft(Z)[n] + Re(Z_0) + (-1)^n Re(Z_{N/2})
            std::vector<std::complex<double>> z(n_bins);
            for (int f = 0; f < n_bins; ++f) z[f] = dpow[f] * (*spectra)[t][f];
            const auto base = irfft(z, N);
            const double z0 = z[0].real(), zn = z[N / 2].real();
            for (int i = 0; i < FL; ++i) {
                const double gframe = N * base[i] + z0 + ((i & 1) ? -zn : zn);
                wave->grad.data[t * FS + i] += static_cast<T>(gframe * win[i]);
            }
        }
    };
    return n;
}

// Delta, delta-delta, and context stacking on [T x B]; matches
// dsp::add_deltas_and_stack (edge replication, +/-2 regression window).
template <typename T>
Var<T> deltas_and_stack_graph(Var<T> fbank, int left = 10, int right = 5) {
    auto deltas = [](Var<T> x) {
        auto d = add(scale(sub(shift_rows(x, 1), shift_rows(x, -1)), T(0.1)),
                     scale(sub(shift_rows(x, 2), shift_rows(x, -2)), T(0.2)));
        return d;
    };
    auto d1 = deltas(fbank);
    auto d2 = deltas(d1);
    auto full = concat_cols<T>({fbank, d1, d2});
    std::vector<Var<T>> slots;
    for (int c = -left; c <= right; ++c) slots.push_back(shift_rows(full, c));
    return concat_cols(slots);
}

// Limited-weight-sharing region convolution: input [T x 40] static mel
// features; 8 non-overlapping 5-bin frequency regions, each with its own
// num_kernels 4-tap kernels evaluated at 2 positions and max-pooled.
// weights [8 x num_kernels x 4], bias [8*num_kernels]; output [T x 8*nk].
template <typename T>
Var<T> region_conv(Var<T> x, Var<T> weights, Var<T> bias) {
    constexpr int kRegions = 8, kTaps = 4, kRegionWidth = 5;
    constexpr int kPositions = kRegionWidth - kTaps + 1;
    if (x->value.cols() != kRegions * kRegionWidth)
        throw std::invalid_argument("region_conv: expected 40 input columns");
    if (weights->value.shape.size() != 3 || weights->value.shape[0] != kRegions ||
        weights->value.shape[2] != kTaps)
        throw std::invalid_argument("region_conv: weights must be [8 x nk x 4]");
    const int nk = weights->value.shape[1];
    if (static_cast<int>(bias->value.size()) != kRegions * nk)
        throw std::invalid_argument("region_conv: bias size mismatch");
    const int Tn = x->value.rows();

    Tensor<T> out({Tn, kRegions * nk});
    auto argp = std::make_shared<std::vector<uint8_t>>(
        static_cast<size_t>(Tn) * kRegions * nk);
    for (int t = 0; t < Tn; ++t)
        for (int r = 0; r < kRegions; ++r)
            for (int j = 0; j < nk; ++j) {
                T best = T(0);
                int bestp = 0;
                for (int p = 0; p < kPositions; ++p) {
                    T acc = bias->value.data[r * nk + j];
                    for (int tap = 0; tap < kTaps; ++tap)
                        acc += weights->value.data[(r * nk + j) * kTaps + tap] *
                               x->value.at(t, r * kRegionWidth + p + tap);
                    if (p == 0 || acc > best) {
                        best = acc;
                        bestp = p;
                    }
                }
                out.at(t, r * nk + j) = best;
                (*argp)[(static_cast<size_t>(t) * kRegions + r) * nk + j] =
                    static_cast<uint8_t>(bestp);
            }
    auto n = detail::make_op(std::move(out), {x, weights, bias});
    n->backward_fn = [n_raw = n.get(), x, weights, bias, argp, Tn, nk] {
        for (int t = 0; t < Tn; ++t)
            for (int r = 0; r < kRegions; ++r)
                for (int j = 0; j < nk; ++j) {
                    const T g = n_raw->grad.at(t, r * nk + j);
                    if (g == T(0)) continue;
                    const int p = (*argp)[(static_cast<size_t>(t) * kRegions + r) * nk + j];
                    if (bias->requires_grad) bias->grad.data[r * nk + j] += g;
                    for (int tap = 0; tap < kTaps; ++tap) {
                        const int col = r * kRegionWidth + p + tap;
                        if (weights->requires_grad)
                            weights->grad.data[(r * nk + j) * kTaps + tap] +=
                                g * x->value.at(t, col);
                        if (x->requires_grad)
                            x->grad.at(t, col) +=
                                g * weights->value.data[(r * nk + j) * kTaps + tap];
                    }
                }
    };
    return n;
}

// SI-SNR in dB between an estimate column vector [L x 1] and a fixed
// reference, clamped to +/- cap. Differentiable w.r.t. the estimate.
template <typename T>
Var<T> si_snr_graph(Var<T> est, const std::vector<double>& ref, double cap = 60.0) {
    const int L = est->value.rows();
    if (static_cast<int>(ref.size()) != L)
        throw std::invalid_argument("si_snr_graph: length mismatch");
    double ref_mean = 0.0;
    for (double v : ref) ref_mean += v;
    ref_mean /= L;
    std::vector<double> ref0(L);
    double ref_pow = 0.0;
    for (int i = 0; i < L; ++i) {
        ref0[i] = ref[i] - ref_mean;
        ref_pow += ref0[i] * ref0[i];
    }
    if (ref_pow <= 0.0) throw std::invalid_argument("si_snr_graph: zero reference");

    auto ref_c = const_col<T>(ref0);
    Tensor<T> ones_t({L, 1}, T(1));
    auto ones = constant(std::move(ones_t));

    auto est0 = sub(est, matmul(ones, mean_all(est)));
    auto dot = matmul(transpose(est0), ref_c);                   // [1x1]
    auto proj = scale(dot, static_cast<T>(1.0 / ref_pow));       // <e,r>/||r||^2
    auto x_target = matmul(ref_c, proj);                         // [Lx1]
    auto e_noise = sub(est0, x_target);
    auto num = add_scalar(sum_all(mul(x_target, x_target)), static_cast<T>(1e-30));
    auto den = add_scalar(sum_all(mul(e_noise, e_noise)), static_cast<T>(1e-30));
    auto si = scale(sub(log_op(num), log_op(den)), static_cast<T>(10.0 / std::log(10.0)));
    return clamp(si, static_cast<T>(-cap), static_cast<T>(cap));
}

}  // namespace mlook::nn

#endif
