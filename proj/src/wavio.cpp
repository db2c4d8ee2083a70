#include "mlook/wavio.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace mlook {

namespace {

struct Reader {
    std::ifstream in;
    explicit Reader(const std::string& path) : in(path, std::ios::binary) {
        if (!in) throw std::runtime_error("cannot open " + path);
    }
    void bytes(void* dst, size_t n) {
        in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in.gcount()) != n) throw std::runtime_error("truncated wav file");
    }
    uint32_t u32() {
        uint32_t v;
        bytes(&v, 4);
        return v;
    }
    uint16_t u16() {
        uint16_t v;
        bytes(&v, 2);
        return v;
    }
};

void put_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); }
void put_u16(std::ofstream& out, uint16_t v) { out.write(reinterpret_cast<char*>(&v), 2); }

}  // namespace

MultiChannelWaveform read_wav(const std::string& path, int expected_rate) {
    Reader r(path);
    char tag[4];
    r.bytes(tag, 4);
    if (std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error(path + ": not a RIFF file");
    r.u32();  // riff size
    r.bytes(tag, 4);
    if (std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error(path + ": not a WAVE file");

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    std::vector<char> data;
    bool have_fmt = false, have_data = false;
    while (!have_data) {
        if (!r.in.read(tag, 4)) break;
        const uint32_t size = r.u32();
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = r.u16();
            channels = r.u16();
            rate = r.u32();
            r.u32();  // byte rate
            r.u16();  // block align
            bits = r.u16();
            if (size > 16) r.in.seekg(size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data.resize(size);
            r.bytes(data.data(), size);
            have_data = true;
        } else {
            r.in.seekg(size + (size & 1), std::ios::cur);
        }
    }
    if (!have_fmt || !have_data) throw std::runtime_error(path + ": missing fmt/data chunk");
    if (expected_rate > 0 && static_cast<int>(rate) != expected_rate)
        throw std::runtime_error(path + ": unsupported sample rate " + std::to_string(rate));
    if (channels == 0) throw std::runtime_error(path + ": zero channels");

    const bool is_float = (format == 3 && bits == 32);
    const bool is_pcm16 = (format == 1 && bits == 16);
    if (!is_float && !is_pcm16)
        throw std::runtime_error(path + ": unsupported format (need PCM16 or float32)");

    const size_t bytes_per = bits / 8;
    const size_t frames = data.size() / (bytes_per * channels);
    std::vector<Waveform> chans(channels);
    for (auto& c : chans) {
        c.samples.resize(frames);
        c.sample_rate = static_cast<int>(rate);
    }
    const char* p = data.data();
    for (size_t i = 0; i < frames; ++i)
        for (int c = 0; c < channels; ++c) {
            if (is_float) {
                float v;
                std::memcpy(&v, p, 4);
                chans[c].samples[i] = v;
            } else {
                int16_t v;
                std::memcpy(&v, p, 2);
                chans[c].samples[i] = v / 32768.0;
            }
            p += bytes_per;
        }
    return MultiChannelWaveform(std::move(chans));
}

void write_wav(const std::string& path, const MultiChannelWaveform& wave) {
    wave.validate();
    const uint16_t channels = static_cast<uint16_t>(wave.num_channels());
    const uint32_t rate = static_cast<uint32_t>(wave.sample_rate());
    const uint32_t frames = static_cast<uint32_t>(wave.length());
    const uint32_t data_size = frames * channels * 4;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write("RIFF", 4);
    put_u32(out, 36 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(out, 16);
    put_u16(out, 3);  // IEEE float
    put_u16(out, channels);
    put_u32(out, rate);
    put_u32(out, rate * channels * 4);
    put_u16(out, channels * 4);
    put_u16(out, 32);
    out.write("data", 4);
    put_u32(out, data_size);
    for (uint32_t i = 0; i < frames; ++i)
        for (int c = 0; c < channels; ++c) {
            const float v = static_cast<float>(wave.channels[c].samples[i]);
            out.write(reinterpret_cast<const char*>(&v), 4);
        }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_wav(const std::string& path, const Waveform& wave) {
    write_wav(path, MultiChannelWaveform({wave}));
}

}  // namespace mlook
