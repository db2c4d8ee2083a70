#ifndef MLOOK_DSP_HPP
#define MLOOK_DSP_HPP

#include <complex>
#include <string>
#include <vector>

#include "mlook/wave.hpp"

namespace mlook {

// Epsilon floor for all log operations on power quantities.
constexpr double kLogEps = 1e-10;

// Lower bound on the squared-window overlap-add envelope used when
// normalizing iSTFT output. See istft() in dsp.cpp.
constexpr double kColaNormFloor = 1e-2;

// In-place iterative radix-2 FFT. n must be a power of two.
// Forward is unnormalized; inverse applies 1/n.
void fft(std::vector<std::complex<double>>& data, bool inverse);

// One-sided real FFT: input length n (power of two), output n/2+1 bins.
std::vector<std::complex<double>> rfft(const std::vector<double>& x, int n);

// Inverse of rfft: n/2+1 bins back to n real samples (1/n normalized).
std::vector<double> irfft(const std::vector<std::complex<double>>& spec, int n);

struct StftConfig {
    int window_len = 512;  // 32 ms @ 16 kHz
    int hop = 256;         // 16 ms
    int fft_size = 512;
    std::string window = "hann";

    int num_bins() const { return fft_size / 2 + 1; }
    void validate() const;
    std::vector<double> make_window() const;
};

struct ComplexSpectrogram {
    // values[t][f], T frames by F = fft_size/2+1 bins
    std::vector<std::vector<std::complex<double>>> values;

    int num_frames() const { return static_cast<int>(values.size()); }
    int num_bins() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }
};

ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg);
Waveform istft(const ComplexSpectrogram& spec, const StftConfig& cfg);

// log(|Y|^2 + eps), T x F
std::vector<std::vector<double>> log_power_spectrum(const ComplexSpectrogram& spec);

struct FbankConfig {
    int n_mels = 40;
    int frame_len = 400;    // 25 ms @ 16 kHz
    int frame_shift = 160;  // 10 ms
    int fft_size = 512;
};

// Triangular mel filterbank, n_mels rows by fft_size/2+1 columns, 0..Nyquist.
std::vector<std::vector<double>> mel_filterbank(int n_mels, int fft_size, int sample_rate);

// T' x n_mels log-mel filterbank energies.
std::vector<std::vector<double>> logmel_fbank(const Waveform& wave, const FbankConfig& cfg = {});

// Appends delta and delta-delta, then stacks context frames.
// Output is T' x (n_mels*3*(left+1+right)); defaults give 40*3*16 = 1920.
std::vector<std::vector<double>> add_deltas_and_stack(
    const std::vector<std::vector<double>>& fbank, int left = 10, int right = 5);

}  // namespace mlook

#endif
