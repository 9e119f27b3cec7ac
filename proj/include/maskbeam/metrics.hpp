// metrics.hpp
// Mask accuracy (ROC / AUC) and waveform quality (scale-invariant SNR).

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maskbeam/mask.hpp"

namespace maskbeam {

// Speech-dominance labels per (t, f).
struct BinaryMask {
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::vector<std::uint8_t> values;

    BinaryMask() = default;
    BinaryMask(std::size_t frames_, std::size_t bins_)
        : frames(frames_), bins(bins_), values(frames_ * bins_, 0) {}

    std::uint8_t& at(std::size_t t, std::size_t f) { return values[t * bins + f]; }
    std::uint8_t at(std::size_t t, std::size_t f) const { return values[t * bins + f]; }
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

// Points ordered by non-decreasing FPR from (0,0) to (1,1); thresholds[i] is
// the decision threshold (predict positive iff value >= threshold) that
// produced points[i].
struct RocCurve {
    std::vector<RocPoint> points;
    std::vector<double> thresholds;
};

// label 1 where the local SNR 10*log10(|s|^2/|n|^2) exceeds the threshold
// (strict), at the given channel
BinaryMask ideal_binary_mask(const MultichannelSpectrogram& s,
                             const MultichannelSpectrogram& n,
                             std::size_t channel = 0,
                             double local_snr_threshold_db = 0.0);

RocCurve roc(std::span<const double> scores, std::span<const std::uint8_t> labels);
RocCurve roc(const RealMask& mask, const BinaryMask& labels);

// trapezoidal area over FPR
double auc(const RocCurve& curve);

// vertical averaging on a common 1001-point FPR grid
RocCurve averaged_roc(const std::vector<RocCurve>& curves);

// Scale-invariant SNR: project the estimate onto the reference, report
// 10*log10(|target|^2/|residual|^2) clamped to [-100, 100] dB.
double si_snr(std::span<const double> estimate, std::span<const double> reference);

}  // namespace maskbeam
