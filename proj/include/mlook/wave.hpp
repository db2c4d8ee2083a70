#ifndef MLOOK_WAVE_HPP
#define MLOOK_WAVE_HPP

#include <stdexcept>
#include <vector>

namespace mlook {

constexpr int kSampleRate = 16000;

struct Waveform {
    std::vector<double> samples;
    int sample_rate = kSampleRate;

    Waveform() = default;
    Waveform(std::vector<double> s, int rate = kSampleRate)
        : samples(std::move(s)), sample_rate(rate) {
        if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be > 0");
    }

    size_t size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct MultiChannelWaveform {
    std::vector<Waveform> channels;

    MultiChannelWaveform() = default;
    explicit MultiChannelWaveform(std::vector<Waveform> chans) : channels(std::move(chans)) {
        validate();
    }

    void validate() const {
        if (channels.empty()) throw std::invalid_argument("need at least one channel");
        for (const auto& ch : channels) {
            if (ch.size() != channels[0].size() || ch.sample_rate != channels[0].sample_rate)
                throw std::invalid_argument("channels must share length and sample rate");
        }
    }

    size_t num_channels() const { return channels.size(); }
    size_t length() const { return channels.empty() ? 0 : channels[0].size(); }
    int sample_rate() const { return channels.empty() ? kSampleRate : channels[0].sample_rate; }
};

}  // namespace mlook

#endif
