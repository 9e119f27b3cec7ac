// mask.hpp
// Complex-ratio-mask ingestion, conversion to energetically constrained
// real masks, channel pooling, oracle/corrupted mask synthesis and the
// MCMF mask file format.

#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "maskbeam/signal.hpp"

namespace maskbeam {

// Complex mask values indexed (t, f, m), m innermost; channels == 1 holds a
// pooled (t, f) mask.
struct ComplexMask {
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::size_t channels = 0;
    std::vector<cdouble> values;

    ComplexMask() = default;
    ComplexMask(std::size_t frames_, std::size_t bins_, std::size_t channels_)
        : frames(frames_), bins(bins_), channels(channels_),
          values(frames_ * bins_ * channels_, cdouble(0.0, 0.0)) {}

    cdouble& at(std::size_t t, std::size_t f, std::size_t m = 0) {
        return values[(t * bins + f) * channels + m];
    }
    const cdouble& at(std::size_t t, std::size_t f, std::size_t m = 0) const {
        return values[(t * bins + f) * channels + m];
    }
};

// Real mask in [0, 1], same indexing convention.
struct RealMask {
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::size_t channels = 0;
    std::vector<double> values;

    RealMask() = default;
    RealMask(std::size_t frames_, std::size_t bins_, std::size_t channels_)
        : frames(frames_), bins(bins_), channels(channels_),
          values(frames_ * bins_ * channels_, 0.0) {}

    double& at(std::size_t t, std::size_t f, std::size_t m = 0) {
        return values[(t * bins + f) * channels + m];
    }
    const double& at(std::size_t t, std::size_t f, std::size_t m = 0) const {
        return values[(t * bins + f) * channels + m];
    }
    bool pooled() const { return channels == 1; }
};

// xi = H .* y, full complex multiplication per (t, f, m)
MultichannelSpectrogram apply_complex_mask(const MultichannelSpectrogram& y,
                                           const ComplexMask& H);

// gamma = |xi|^2 / (|y - xi|^2 + |xi|^2); 0/0 bins give 0
RealMask energetic_mask(const MultichannelSpectrogram& y, const MultichannelSpectrogram& xi);

// per-(t,f) median across channels; even channel counts use the midpoint of
// the two central order statistics
RealMask median_pool(const RealMask& gammas);

// alpha_n = 1 - alpha_s
RealMask complement_mask(const RealMask& alpha_s);

// gamma = |s|^2 / (|s|^2 + |n|^2) per (t, f, m); DNN surrogate for tests
RealMask oracle_mask(const MultichannelSpectrogram& s, const MultichannelSpectrogram& n);

// Additive Gaussian noise in the logit domain, values first clipped into
// [1e-6, 1 - 1e-6]. noise_level == 0 returns the clipped input unchanged.
RealMask corrupt_mask(const RealMask& gamma, double noise_level, std::uint64_t seed);

// MCMF file format (little-endian):
//   bytes 0-3  magic "MCMF"
//   byte  4    version = 1
//   byte  5    dtype: 0 = real float32, 1 = complex float32 (re, im)
//   bytes 6-7  reserved, zero
//   bytes 8-19 uint32 T, F, M
//   payload    row-major float32, t outer, f middle, m inner
using AnyMask = std::variant<RealMask, ComplexMask>;

AnyMask read_mask_file(const std::string& path);
void write_mask_file(const std::string& path, const RealMask& mask);
void write_mask_file(const std::string& path, const ComplexMask& mask);

}  // namespace maskbeam
