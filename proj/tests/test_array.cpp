#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "mlook/array.hpp"

using namespace mlook;

TEST_CASE("circular angle distance") {
    CHECK(circular_angle_distance(0, 0) == 0.0);
    CHECK(circular_angle_distance(350, 10) == doctest::Approx(20.0));
    CHECK(circular_angle_distance(10, 350) == doctest::Approx(20.0));
    CHECK(circular_angle_distance(270, 10) == doctest::Approx(100.0));
    CHECK(circular_angle_distance(-10, 10) == doctest::Approx(20.0));
    CHECK(circular_angle_distance(720, 180) == doctest::Approx(180.0));
}

TEST_CASE("default circular array geometry and pairs") {
    auto geo = ArrayGeometry::uniform_circular();
    REQUIRE(geo.num_mics() == 6);
    auto pairs = default_pairs(geo);
    REQUIRE(pairs.size() == 6);
    // diameter pairs: distance 0.07, axis along the first mic's azimuth
    CHECK(pairs[0].distance == doctest::Approx(0.07));
    CHECK(pairs[0].axis_azimuth == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(pairs[1].distance == doctest::Approx(0.07));
    CHECK(pairs[1].axis_azimuth == doctest::Approx(60.0));
    // adjacent pair distance = radius (unit hexagon side)
    CHECK(pairs[3].distance == doctest::Approx(0.035));
}

TEST_CASE("steering phase hand values") {
    MicPair p;
    p.distance = 0.07;
    p.axis_azimuth = 0.0;
    CHECK(steering_phase(0.0, 1000.0, p, 343.0) ==
          doctest::Approx(2.0 * M_PI * 1000.0 * 0.07 / 343.0).epsilon(1e-12));
    CHECK(steering_phase(0.0, 1000.0, p, 343.0) == doctest::Approx(1.2824).epsilon(1e-4));
    CHECK(steering_phase(90.0, 4000.0, p, 343.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(steering_phase(123.0, 0.0, p, 343.0) == 0.0);
}

TEST_CASE("ipd of identical channels is zero; antisymmetry; scale invariance") {
    StftConfig cfg;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    std::vector<double> x(4096);
    for (auto& v : x) v = g(rng);
    auto a = stft(Waveform(x), cfg);
    for (auto& v : x) v *= 2.5;  // positive per-channel scaling
    auto b = stft(Waveform(x), cfg);

    auto self = ipd(a, a);
    for (const auto& row : self)
        for (double v : row) CHECK(v == 0.0);

    auto scaled = ipd(a, b);
    for (const auto& row : scaled)
        for (double v : row) CHECK(std::fabs(v) < 1e-9);

    // antisymmetry modulo wrapping
    std::vector<double> y(4096);
    for (auto& v : y) v = g(rng);
    auto c = stft(Waveform(y), cfg);
    auto ab = ipd(a, c), ba = ipd(c, a);
    for (size_t t = 0; t < ab.size(); ++t)
        for (size_t f = 0; f < ab[t].size(); ++f)
            CHECK(std::fabs(wrap_phase(ab[t][f] + ba[t][f])) < 1e-12);
}

TEST_CASE("ipd shape mismatch") {
    ComplexSpectrogram a, b;
    a.values.assign(2, std::vector<std::complex<double>>(257, 1.0));
    b.values.assign(3, std::vector<std::complex<double>>(257, 1.0));
    CHECK_THROWS(ipd(a, b));
}

TEST_CASE("ipd of a pure delay at 1 kHz bin") {
    // channel 2 = channel 1 delayed by 0.25 ms = 4 samples; at 1 kHz this is
    // a phase lead of 2*pi*1000*0.00025 = pi/2 for channel 1
    StftConfig cfg;
    const int d = 4;
    std::vector<double> x1(4096), x2(4096);
    for (int i = 0; i < 4096; ++i)
        x1[i] = std::sin(2.0 * M_PI * 1000.0 * i / kSampleRate);
    for (int i = d; i < 4096; ++i) x2[i] = x1[i - d];
    auto s1 = stft(Waveform(x1), cfg);
    auto s2 = stft(Waveform(x2), cfg);
    auto phi = ipd(s1, s2);
    // interior frame, bin 32 = 1 kHz
    CHECK(phi[4][32] == doctest::Approx(M_PI / 2.0).epsilon(1e-3));
}

TEST_CASE("directional feature equals scalar oracle and is bounded") {
    auto geo = ArrayGeometry::uniform_circular();
    auto pairs = default_pairs(geo);
    StftConfig cfg;
    const int T = 3, F = cfg.num_bins();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-M_PI, M_PI);
    std::vector<std::vector<std::vector<double>>> ipds(
        pairs.size(), std::vector<std::vector<double>>(T, std::vector<double>(F)));
    for (auto& m : ipds)
        for (auto& row : m)
            for (auto& v : row) v = u(rng);

    const double theta = 37.0;
    auto df = directional_feature(ipds, theta, pairs, geo.sound_speed, cfg);
    for (int t = 0; t < T; ++t)
        for (int f = 0; f < F; ++f) {
            double acc = 0.0;
            for (size_t m = 0; m < pairs.size(); ++m) {
                const double steer = steering_phase(theta, f * 16000.0 / 512.0, pairs[m], 343.0);
                acc += std::cos(steer - ipds[m][t][f]);
            }
            acc /= static_cast<double>(pairs.size());
            CHECK(df[t][f] == doctest::Approx(acc).epsilon(1e-12));
            CHECK(df[t][f] <= 1.0 + 1e-12);
            CHECK(df[t][f] >= -1.0 - 1e-12);
        }
}

TEST_CASE("df is 1 when ipd equals the steering phase") {
    auto geo = ArrayGeometry::uniform_circular();
    auto pairs = default_pairs(geo);
    StftConfig cfg;
    const int T = 2, F = cfg.num_bins();
    const double theta = 123.0;
    std::vector<std::vector<std::vector<double>>> ipds(
        pairs.size(), std::vector<std::vector<double>>(T, std::vector<double>(F)));
    for (size_t m = 0; m < pairs.size(); ++m)
        for (int t = 0; t < T; ++t)
            for (int f = 0; f < F; ++f)
                ipds[m][t][f] =
                    wrap_phase(steering_phase(theta, f * 16000.0 / 512.0, pairs[m], 343.0));
    auto df = directional_feature(ipds, theta, pairs, geo.sound_speed, cfg);
    for (const auto& row : df)
        for (double v : row) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("freefield approximation: symmetry, identity, argmax") {
    auto geo = ArrayGeometry::uniform_circular();
    auto pairs = default_pairs(geo);
    CHECK(freefield_df_approx(42.0, 42.0, pairs, 2000.0, 343.0) == doctest::Approx(1.0));
    CHECK(freefield_df_approx(10.0, 250.0, pairs, 1500.0, 343.0) ==
          doctest::Approx(freefield_df_approx(250.0, 10.0, pairs, 1500.0, 343.0)));

    // source at 10 deg: averaged over 100..4000 Hz, look 0 scores highest
    const double looks[4] = {0.0, 90.0, 180.0, 270.0};
    double score[4] = {};
    for (int k = 0; k < 4; ++k)
        for (double f = 100.0; f <= 4000.0; f += 50.0)
            score[k] += freefield_df_approx(10.0, looks[k], pairs, f, 343.0);
    for (int k = 1; k < 4; ++k) CHECK(score[0] > score[k]);
}

TEST_CASE("look set validation") {
    LookDirectionSet looks;
    looks.validate();
    looks.azimuths_deg = {0.0, 0.0};
    CHECK_THROWS(looks.validate());
    looks.azimuths_deg = {370.0};
    CHECK_THROWS(looks.validate());
}
