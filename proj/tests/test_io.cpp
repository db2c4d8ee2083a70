#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "mlook/config.hpp"
#include "mlook/wavio.hpp"

using namespace mlook;

TEST_CASE("float32 wav round trip is bit-exact") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    std::vector<Waveform> chans(6);
    for (auto& c : chans) {
        c.samples.resize(1000);
        for (auto& v : c.samples) v = static_cast<float>(g(rng));  // float-representable
    }
    MultiChannelWaveform mc(chans);
    const std::string path = "/tmp/mlook_test_io.wav";
    write_wav(path, mc);
    auto back = read_wav(path);
    REQUIRE(back.num_channels() == 6);
    REQUIRE(back.length() == 1000);
    for (int c = 0; c < 6; ++c)
        for (size_t i = 0; i < 1000; ++i)
            CHECK(back.channels[c].samples[i] == mc.channels[c].samples[i]);
    std::remove(path.c_str());
}

TEST_CASE("pcm16 scaling convention") {
    // hand-build a 1-channel PCM16 wav with values {-32768, 0, 32767}
    const std::string path = "/tmp/mlook_test_pcm16.wav";
    std::ofstream out(path, std::ios::binary);
    auto u32 = [&](uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
    auto u16 = [&](uint16_t v) { out.write(reinterpret_cast<char*>(&v), 2); };
    out.write("RIFF", 4);
    u32(36 + 6);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    u32(16);
    u16(1);
    u16(1);
    u32(16000);
    u32(32000);
    u16(2);
    u16(16);
    out.write("data", 4);
    u32(6);
    int16_t vals[3] = {-32768, 0, 32767};
    out.write(reinterpret_cast<char*>(vals), 6);
    out.close();

    auto wav = read_wav(path);
    CHECK(wav.channels[0].samples[0] == doctest::Approx(-1.0));
    CHECK(wav.channels[0].samples[1] == 0.0);
    CHECK(wav.channels[0].samples[2] == doctest::Approx(32767.0 / 32768.0));
    std::remove(path.c_str());
}

TEST_CASE("wrong sample rate is an explicit error") {
    const std::string path = "/tmp/mlook_test_rate.wav";
    Waveform w(std::vector<double>(100, 0.0), 8000);
    write_wav(path, w);
    CHECK_THROWS_WITH(read_wav(path, 16000), doctest::Contains("sample rate"));
    std::remove(path.c_str());
}

TEST_CASE("run config parses, hashes, and rejects unknown keys") {
    const std::string path = "/tmp/mlook_test_cfg.json";
    {
        std::ofstream out(path);
        out << R"({"seed": 5, "looks_deg": [0, 90, 180, 270],
                   "dataset": {"num_utterances": 8, "utterance_len_s": 0.5}})";
    }
    auto cfg = load_run_config(path);
    CHECK(cfg.seed == 5);
    CHECK(cfg.looks.azimuths_deg.size() == 4);
    CHECK(cfg.dataset.num_utterances == 8);
    CHECK(cfg.hash != 0);

    auto cfg2 = load_run_config(path);
    CHECK(cfg.hash == cfg2.hash);

    {
        std::ofstream out(path);
        out << R"({"seed": 5, "no_such_key": 1})";
    }
    CHECK_THROWS_WITH(load_run_config(path), doctest::Contains("no_such_key"));
    std::remove(path.c_str());
}
