// beamform.cpp

#include "maskbeam/beamform.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "maskbeam/kernels.hpp"

namespace maskbeam {

namespace {

using MatrixXcdR =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void symmetrize(cdouble* R, std::size_t m) {
    for (std::size_t j = 0; j < m; ++j) {
        R[j * m + j] = cdouble(R[j * m + j].real(), 0.0);
        for (std::size_t k = j + 1; k < m; ++k) {
            const cdouble v = 0.5 * (R[j * m + k] + std::conj(R[k * m + j]));
            R[j * m + k] = v;
            R[k * m + j] = std::conj(v);
        }
    }
}

void check_pooled(const MultichannelSpectrogram& y, const RealMask& mask, const char* what) {
    if (mask.channels != 1 || mask.frames != y.frames || mask.bins != y.bins)
        throw DataError(std::string(what) + ": mask shape mismatch");
}

}  // namespace

SecondOrderStats compute_sos(const MultichannelSpectrogram& y, const RealMask& lambda_s,
                             const RealMask& lambda_n) {
    check_pooled(y, lambda_s, "compute_sos");
    check_pooled(y, lambda_n, "compute_sos");
    const FrequencySlabs slabs(y);
    const std::size_t m = y.channels;

    SecondOrderStats stats;
    stats.Phi_n = CovarianceSet(y.bins, m);
    stats.Phi_y = CovarianceSet(y.bins, m);
    stats.Phi_s = CovarianceSet(y.bins, m);

    std::vector<double> w(y.frames);
    for (std::size_t f = 0; f < y.bins; ++f) {
        for (int v = 0; v < 2; ++v) {
            const RealMask& lambda = v == 0 ? lambda_n : lambda_s;
            cdouble* Phi = (v == 0 ? stats.Phi_n : stats.Phi_y).matrix(f);
            double sum = 0.0;
            for (std::size_t t = 0; t < y.frames; ++t) {
                w[t] = lambda.at(t, f);
                sum += w[t];
            }
            if (sum <= 0.0)
                throw DataError(std::string("compute_sos: all-zero ") +
                                (v == 0 ? "noise" : "speech") + " mask at frequency bin " +
                                std::to_string(f));
            kernels::weighted_outer_accum(slabs.slab(f).data(), w.data(), y.frames, m, Phi);
            for (std::size_t i = 0; i < m * m; ++i) Phi[i] /= sum;
            symmetrize(Phi, m);
        }
        const cdouble* py = stats.Phi_y.matrix(f);
        const cdouble* pn = stats.Phi_n.matrix(f);
        cdouble* ps = stats.Phi_s.matrix(f);
        for (std::size_t i = 0; i < m * m; ++i) ps[i] = py[i] - pn[i];
    }
    return stats;
}

std::vector<cdouble> steering_vector(const CovarianceSet& Phi_s,
                                     std::size_t reference_channel) {
    const std::size_t m = Phi_s.channels;
    if (reference_channel >= m) throw DataError("steering_vector: reference out of range");
    std::vector<cdouble> steering(Phi_s.bins * m);

    Eigen::SelfAdjointEigenSolver<MatrixXcdR> es;
    for (std::size_t f = 0; f < Phi_s.bins; ++f) {
        es.compute(Eigen::Map<const MatrixXcdR>(Phi_s.matrix(f), Eigen::Index(m),
                                                Eigen::Index(m)));
        const Eigen::VectorXcd u = es.eigenvectors().col(Eigen::Index(m - 1));
        const cdouble ref = u(Eigen::Index(reference_channel));
        if (std::abs(ref) < 1e-12 * u.norm())
            throw NumericalError("steering vector undefined at reference (frequency bin " +
                                 std::to_string(f) + ")");
        cdouble* r = steering.data() + f * m;
        for (std::size_t j = 0; j < m; ++j) r[j] = u(Eigen::Index(j)) / ref;
        r[reference_channel] = cdouble(1.0, 0.0);
    }
    return steering;
}

BeamformerBank mwf_weights(const SecondOrderStats& stats, std::span<const cdouble> steering,
                           const RealMask& lambda_s, const RealMask& lambda_n,
                           const MwfConfig& config) {
    const std::size_t m = stats.Phi_n.channels;
    const std::size_t bins = stats.Phi_n.bins;
    if (steering.size() != bins * m) throw DataError("mwf_weights: steering shape mismatch");
    if (lambda_s.channels != 1 || lambda_n.channels != 1 || lambda_s.bins != bins ||
        lambda_n.bins != bins || lambda_s.frames != lambda_n.frames)
        throw DataError("mwf_weights: mask shape mismatch");
    if (config.reference_channel >= m) throw DataError("mwf_weights: reference out of range");
    if (config.gain_floor < 0.0 || config.gain_floor > 1.0)
        throw DataError("mwf_weights: gain floor outside [0, 1]");

    BeamformerBank bank;
    bank.bins = bins;
    bank.channels = m;
    bank.reference_channel = config.reference_channel;
    bank.steering.assign(steering.begin(), steering.end());
    bank.w_mvdr.assign(bins * m, cdouble(0.0, 0.0));
    bank.gain = RealMask(lambda_s.frames, bins, 1);

    MatrixXcdR phi(m, m);
    for (std::size_t f = 0; f < bins; ++f) {
        phi = Eigen::Map<const MatrixXcdR>(stats.Phi_n.matrix(f), Eigen::Index(m),
                                           Eigen::Index(m));
        const double load = config.loading_eps * phi.real().trace() / double(m);
        for (std::size_t j = 0; j < m; ++j) phi(Eigen::Index(j), Eigen::Index(j)) += load;
        Eigen::LLT<MatrixXcdR> llt(phi);
        if (llt.info() != Eigen::Success)
            throw NumericalError("mwf_weights: noise covariance not positive definite at "
                                 "frequency bin " + std::to_string(f));
        const Eigen::Map<const Eigen::VectorXcd> r(steering.data() + f * m, Eigen::Index(m));
        const Eigen::VectorXcd u = llt.solve(r);
        const cdouble denom_c = r.dot(u);  // r^H Phi^{-1} r
        const double denom = denom_c.real();
        if (!(denom > 0.0) || !std::isfinite(denom))
            throw NumericalError("mwf_weights: nonpositive r^H Phi_n^{-1} r at frequency bin " +
                                 std::to_string(f));
        cdouble* w = bank.weights(f);
        for (std::size_t j = 0; j < m; ++j) w[j] = u(Eigen::Index(j)) / denom;
    }

    for (std::size_t t = 0; t < lambda_s.frames; ++t) {
        for (std::size_t f = 0; f < bins; ++f) {
            const double ls = lambda_s.at(t, f);
            const double ln = lambda_n.at(t, f);
            const double total = ls + ln;
            double g = total > 0.0 ? std::sqrt(ls / total) : 0.0;
            bank.gain.at(t, f) = std::max(g, config.gain_floor);
        }
    }
    return bank;
}

MultichannelSpectrogram apply_filter(const MultichannelSpectrogram& y,
                                     const BeamformerBank& bank) {
    if (bank.bins != y.bins || bank.channels != y.channels)
        throw DataError("apply_filter: bank shape mismatch");
    if (bank.gain.frames != y.frames) throw DataError("apply_filter: gain shape mismatch");

    const FrequencySlabs slabs(y);
    MultichannelSpectrogram out(y.frames, y.bins, 1);
    out.frame_shift = y.frame_shift;
    out.fft_size = y.fft_size;
    out.window_length = y.window_length;
    out.sample_rate = y.sample_rate;

    std::vector<cdouble> beamformed(y.frames);
    for (std::size_t f = 0; f < y.bins; ++f) {
        kernels::beamform_apply(slabs.slab(f).data(), bank.weights(f), y.frames, y.channels,
                                beamformed.data());
        for (std::size_t t = 0; t < y.frames; ++t) {
            out.at(t, f, 0) = bank.gain.at(t, f) * beamformed[t];
        }
    }
    return out;
}

MultichannelSpectrogram subarray_fuse(const MultichannelSpectrogram& y_full,
                                      const ArrayGeometry& geometry, double band_split_hz,
                                      std::size_t reference_channel,
                                      const SubarrayPipeline& pipeline_fn) {
    if (!geometry.has_subarrays())
        throw DataError("subarray_fuse: geometry does not declare sub-arrays");
    if (geometry.channels() != y_full.channels)
        throw DataError("subarray_fuse: geometry/spectrogram channel mismatch");

    auto run = [&](const std::vector<std::size_t>& idx) {
        const auto ref_it = std::find(idx.begin(), idx.end(), reference_channel);
        if (ref_it == idx.end())
            throw DataError("subarray_fuse: reference channel not part of a sub-array");
        MultichannelSpectrogram sub =
            y_full.select_channels(std::span<const std::size_t>(idx));
        MultichannelSpectrogram result =
            pipeline_fn(sub, std::size_t(ref_it - idx.begin()));
        if (result.frames != y_full.frames || result.bins != y_full.bins ||
            result.channels != 1)
            throw DataError("subarray_fuse: pipeline returned an unexpected shape");
        return result;
    };

    const MultichannelSpectrogram low = run(geometry.small_subarray);
    const MultichannelSpectrogram high = run(geometry.large_subarray);

    MultichannelSpectrogram fused = low;
    for (std::size_t f = 0; f < fused.bins; ++f) {
        if (fused.bin_hz(f) < band_split_hz) continue;
        for (std::size_t t = 0; t < fused.frames; ++t) {
            fused.at(t, f, 0) = high.at(t, f, 0);
        }
    }
    return fused;
}

}  // namespace maskbeam
