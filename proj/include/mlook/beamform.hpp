#ifndef MLOOK_BEAMFORM_HPP
#define MLOOK_BEAMFORM_HPP

#include <complex>
#include <vector>

#include "mlook/array.hpp"
#include "mlook/dsp.hpp"

namespace mlook {

struct FixedBeamformer {
    // weights[f][c]; output bin = sum_c conj(weights[f][c]) * y_c
    std::vector<std::vector<std::complex<double>>> weights;
    double look_azimuth_deg = 0.0;
};

// Per-mic far-field steering element exp(-i*2*pi*f*tau) with tau the plane
// wave delay relative to the array center.
std::complex<double> steering_element(const ArrayGeometry& geo, int mic, double theta_deg,
                                      double freq_hz);

// Delay-and-sum weights w(f) = v(f, theta)/C; distortionless at the steer
// direction by construction.
FixedBeamformer design_delay_and_sum(const ArrayGeometry& geometry, double theta_deg,
                                     const StftConfig& cfg);

ComplexSpectrogram apply_beamformer(const FixedBeamformer& bf,
                                    const std::vector<ComplexSpectrogram>& specs);

}  // namespace mlook

#endif
