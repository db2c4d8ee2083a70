#ifndef MLOOK_ARRAY_HPP
#define MLOOK_ARRAY_HPP

#include <vector>

#include "mlook/dsp.hpp"

namespace mlook {

struct Position {
    double x = 0.0, y = 0.0, z = 0.0;
};

struct ArrayGeometry {
    std::vector<Position> mic_positions;  // meters, array-local frame
    double sound_speed = 343.0;

    // 6-element uniform circular array, radius 0.035 m, mics at 0,60,...,300 deg.
    static ArrayGeometry uniform_circular(int num_mics = 6, double radius = 0.035);

    int num_mics() const { return static_cast<int>(mic_positions.size()); }
    void validate() const;
};

struct MicPair {
    int m1 = 0, m2 = 0;
    double distance = 0.0;      // meters
    double axis_azimuth = 0.0;  // degrees, direction from m2 towards m1
};

MicPair make_pair(const ArrayGeometry& geo, int m1, int m2);

// The six pairs used by default with the 6-mic circular array, indexed by the
// mic azimuth labels (0,180),(60,240),(120,300),(0,60),(120,180),(240,300).
std::vector<MicPair> default_pairs(const ArrayGeometry& geo);

struct LookDirectionSet {
    std::vector<double> azimuths_deg{0.0, 90.0, 180.0, 270.0};

    int size() const { return static_cast<int>(azimuths_deg.size()); }
    void validate() const;
};

// Minimal angular distance on the circle, result in [0, 180].
double circular_angle_distance(double a_deg, double b_deg);

// Phase of the steering vector for a far-field source at azimuth theta:
// 2*pi*f*distance*cos(theta - axis_azimuth)/c, in radians.
double steering_phase(double theta_deg, double freq_hz, const MicPair& pair, double sound_speed);

// Per-bin phase difference angle(Y_m1) - angle(Y_m2), wrapped to (-pi, pi].
std::vector<std::vector<double>> ipd(const ComplexSpectrogram& spec_m1,
                                     const ComplexSpectrogram& spec_m2);

// Wrap an angle in radians to (-pi, pi].
double wrap_phase(double phase);

// Mean over pairs of cos(steering_phase - IPD); values in [-1, 1].
// When normalize is false the plain sum over pairs is returned.
std::vector<std::vector<double>> directional_feature(
    const std::vector<std::vector<std::vector<double>>>& ipds,  // [pair][t][f]
    double theta_deg, const std::vector<MicPair>& pairs, double sound_speed,
    const StftConfig& cfg, bool normalize = true);

// Free-field closed form of the directional feature: the value it takes when
// the observed IPDs equal the steering phases of a source at theta_source.
double freefield_df_approx(double theta_source_deg, double theta_look_deg,
                           const std::vector<MicPair>& pairs, double freq_hz,
                           double sound_speed, bool normalize = true);

}  // namespace mlook

#endif
