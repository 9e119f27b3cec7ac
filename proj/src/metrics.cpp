// metrics.cpp

#include "maskbeam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace maskbeam {

BinaryMask ideal_binary_mask(const MultichannelSpectrogram& s,
                             const MultichannelSpectrogram& n, std::size_t channel,
                             double local_snr_threshold_db) {
    if (s.frames != n.frames || s.bins != n.bins || s.channels != n.channels)
        throw DataError("ideal_binary_mask: shape mismatch");
    if (channel >= s.channels) throw DataError("ideal_binary_mask: channel out of range");
    BinaryMask labels(s.frames, s.bins);
    const double ratio_floor = std::pow(10.0, local_snr_threshold_db / 10.0);
    for (std::size_t t = 0; t < s.frames; ++t) {
        for (std::size_t f = 0; f < s.bins; ++f) {
            const double ps = std::norm(s.at(t, f, channel));
            const double pn = std::norm(n.at(t, f, channel));
            // strict inequality; ps == pn at threshold 0 dB stays label 0
            labels.at(t, f) = (ps > pn * ratio_floor) ? 1 : 0;
        }
    }
    return labels;
}

RocCurve roc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw DataError("roc: shape mismatch");
    if (scores.empty()) throw DataError("roc: empty input");
    std::size_t pos = 0;
    for (std::uint8_t l : labels) pos += l ? 1 : 0;
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0)
        throw DataError("roc: labels must contain both positives and negatives");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0});
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());

    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double value = scores[order[i]];
        // consume the whole tie group so each distinct value yields one point
        while (i < order.size() && scores[order[i]] == value) {
            if (labels[order[i]]) ++tp; else ++fp;
            ++i;
        }
        const RocPoint pt{double(fp) / double(neg), double(tp) / double(pos)};
        if (pt.fpr != curve.points.back().fpr || pt.tpr != curve.points.back().tpr) {
            curve.points.push_back(pt);
            curve.thresholds.push_back(value);
        }
    }
    if (curve.points.back().fpr != 1.0 || curve.points.back().tpr != 1.0) {
        curve.points.push_back({1.0, 1.0});
        curve.thresholds.push_back(-std::numeric_limits<double>::infinity());
    }
    return curve;
}

RocCurve roc(const RealMask& mask, const BinaryMask& labels) {
    if (mask.channels != 1 || mask.frames != labels.frames || mask.bins != labels.bins)
        throw DataError("roc: mask/label shape mismatch");
    return roc(std::span<const double>(mask.values),
               std::span<const std::uint8_t>(labels.values));
}

double auc(const RocCurve& curve) {
    if (curve.points.size() < 2) throw DataError("auc: degenerate curve");
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const RocPoint& a = curve.points[i - 1];
        const RocPoint& b = curve.points[i];
        area += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
    }
    return area;
}

namespace {

// TPR at the given FPR, linearly interpolated along the curve; vertical
// segments at exactly x contribute their upper end.
double tpr_at(const RocCurve& c, double x) {
    double result = 0.0;
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        const RocPoint& a = c.points[i - 1];
        const RocPoint& b = c.points[i];
        if (x < a.fpr || x > b.fpr) continue;
        if (b.fpr == a.fpr) {
            result = std::max(result, std::max(a.tpr, b.tpr));
        } else {
            const double w = (x - a.fpr) / (b.fpr - a.fpr);
            result = std::max(result, a.tpr + w * (b.tpr - a.tpr));
        }
    }
    return result;
}

}  // namespace

RocCurve averaged_roc(const std::vector<RocCurve>& curves) {
    if (curves.empty()) throw DataError("averaged_roc: no curves");
    constexpr std::size_t kGrid = 1001;
    RocCurve avg;
    avg.points.resize(kGrid);
    avg.thresholds.assign(kGrid, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < kGrid; ++i) {
        const double x = double(i) / double(kGrid - 1);
        double sum = 0.0;
        for (const RocCurve& c : curves) sum += tpr_at(c, x);
        avg.points[i] = {x, sum / double(curves.size())};
    }
    return avg;
}

double si_snr(std::span<const double> estimate, std::span<const double> reference) {
    if (estimate.size() != reference.size()) throw DataError("si_snr: length mismatch");
    if (estimate.empty()) throw DataError("si_snr: empty input");
    double rr = 0.0, er = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        rr += reference[i] * reference[i];
        er += estimate[i] * reference[i];
    }
    if (rr <= 0.0) throw DataError("si_snr: zero reference");
    const double a = er / rr;          // projection coefficient
    const double target = a * a * rr;  // |a * ref|^2
    double residual = 0.0;
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        const double d = estimate[i] - a * reference[i];
        residual += d * d;
    }
    if (residual <= 0.0) return 100.0;
    if (target <= 0.0) return -100.0;
    return std::clamp(10.0 * std::log10(target / residual), -100.0, 100.0);
}

}  // namespace maskbeam
