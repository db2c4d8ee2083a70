#ifndef MLOOK_WAVIO_HPP
#define MLOOK_WAVIO_HPP

#include <string>

#include "mlook/wave.hpp"

namespace mlook {

// RIFF WAV, PCM16 or IEEE float32, any channel count. No resampling: a rate
// other than expected_rate (when > 0) is an error.
MultiChannelWaveform read_wav(const std::string& path, int expected_rate = kSampleRate);

// Writes IEEE float32 WAV. Doubles are narrowed to float; a float32 round trip
// is bit-exact.
void write_wav(const std::string& path, const MultiChannelWaveform& wave);
void write_wav(const std::string& path, const Waveform& wave);

}  // namespace mlook

#endif
