// beamform.hpp
// Mask-weighted second-order statistics, steering-vector extraction and the
// multi-channel Wiener filter: an MVDR front emphasising the steering
// direction cascaded with a per-bin square-root Wiener gain.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "maskbeam/cgmm.hpp"
#include "maskbeam/roomsim.hpp"

namespace maskbeam {

struct SecondOrderStats {
    CovarianceSet Phi_n;  // noise-weighted covariance
    CovarianceSet Phi_y;  // speech-weighted covariance of the noisy signal
    CovarianceSet Phi_s;  // Phi_y - Phi_n, may be indefinite
};

struct BeamformerBank {
    std::size_t bins = 0;
    std::size_t channels = 0;
    std::size_t reference_channel = 0;
    std::vector<cdouble> steering;  // (f, m), reference entry exactly 1
    std::vector<cdouble> w_mvdr;    // (f, m), time-invariant MVDR weights
    RealMask gain;                  // (t, f) post-filter in [0, 1]

    cdouble* steer(std::size_t f) { return steering.data() + f * channels; }
    const cdouble* steer(std::size_t f) const { return steering.data() + f * channels; }
    cdouble* weights(std::size_t f) { return w_mvdr.data() + f * channels; }
    const cdouble* weights(std::size_t f) const { return w_mvdr.data() + f * channels; }
};

// Phi_n = sum_t lambda_n y y^H / sum_t lambda_n, Phi_y likewise with
// lambda_s, Phi_s = Phi_y - Phi_n. Errors when a frequency has zero mask
// mass.
SecondOrderStats compute_sos(const MultichannelSpectrogram& y, const RealMask& lambda_s,
                             const RealMask& lambda_n);

// Principal eigenvector of Phi_s (largest signed eigenvalue), normalized to
// 1 at the reference channel.
std::vector<cdouble> steering_vector(const CovarianceSet& Phi_s, std::size_t reference_channel);

struct MwfConfig {
    std::size_t reference_channel = 0;
    double loading_eps = 1e-6;  // diagonal loading of Phi_n before inversion
    double gain_floor = 0.0;
};

// w(t,f) = [Phi_n^{-1} r / (r^H Phi_n^{-1} r)] * sqrt(lambda_s / (lambda_s + lambda_n))
BeamformerBank mwf_weights(const SecondOrderStats& stats, std::span<const cdouble> steering,
                           const RealMask& lambda_s, const RealMask& lambda_n,
                           const MwfConfig& config = MwfConfig{});

// s_hat(t,f) = w(t,f)^H y(t,f); returns a single-channel spectrogram
MultichannelSpectrogram apply_filter(const MultichannelSpectrogram& y,
                                     const BeamformerBank& bank);

// Runs `pipeline_fn` independently on the two declared sub-arrays and stitches
// the outputs: bins with centre frequency below band_split_hz come from the
// small sub-array, the rest from the large one.
using SubarrayPipeline =
    std::function<MultichannelSpectrogram(const MultichannelSpectrogram& sub_y,
                                          std::size_t sub_reference_channel)>;

MultichannelSpectrogram subarray_fuse(const MultichannelSpectrogram& y_full,
                                      const ArrayGeometry& geometry, double band_split_hz,
                                      std::size_t reference_channel,
                                      const SubarrayPipeline& pipeline_fn);

}  // namespace maskbeam
