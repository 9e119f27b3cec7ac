// cgmm.hpp
// Fixed-prior two-component complex Gaussian mixture refinement of pooled
// time-frequency masks. The model per (t, f) is
//   y ~ sum_v alpha_v(t,f) N_c(0, phi_v(t,f) R_v(f)),   v in {speech, noise},
// with the mixture weights held fixed at the pooled mask values; EM updates
// the posteriors lambda, the bin variances phi and the spatial covariances R.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "maskbeam/mask.hpp"
#include "maskbeam/signal.hpp"

namespace maskbeam {

// Per-frequency pair of M x M complex Hermitian matrices, row-major.
struct CovarianceSet {
    std::size_t bins = 0;
    std::size_t channels = 0;
    std::vector<cdouble> values;  // indexed (f, j, k)

    CovarianceSet() = default;
    CovarianceSet(std::size_t bins_, std::size_t channels_)
        : bins(bins_), channels(channels_),
          values(bins_ * channels_ * channels_, cdouble(0.0, 0.0)) {}

    cdouble* matrix(std::size_t f) { return values.data() + f * channels * channels; }
    const cdouble* matrix(std::size_t f) const {
        return values.data() + f * channels * channels;
    }
};

struct CgmmState {
    RealMask lambda_s, lambda_n;  // posteriors, (t, f)
    RealMask phi_s, phi_n;        // bin variances, (t, f)
    CovarianceSet R_s, R_n;       // spatial covariances per frequency
    RealMask alpha_s, alpha_n;    // the fixed priors, copied from the input
    std::vector<double> loglik;   // data log-likelihood, entry per iteration (0 = initial)
    std::vector<std::string> warnings;
};

struct CgmmConfig {
    unsigned iterations = 20;
    bool rank1_source = true;
    double loading_eps = 1e-6;        // diagonal loading relative to tr(R)/M
    double phi_floor_factor = 1e-10;  // relative to mean per-frequency signal power
    unsigned threads = 1;             // frequencies processed in parallel
    // invoked after every EM iteration (1-based) with the current state
    std::function<void(unsigned iteration, const CgmmState&)> iteration_callback;
};

// Eq.-style covariance initialization: R_v = sum_t alpha_v y y^H / sum_t
// alpha_v, normalized by tr(R)/M, diagonally loaded. A frequency with zero
// prior mass (or zero energy) falls back to identity and records a warning.
void init_covariances(const MultichannelSpectrogram& y, const RealMask& alpha_s,
                      const RealMask& alpha_n, double loading_eps, CovarianceSet& R_s,
                      CovarianceSet& R_n, std::vector<std::string>* warnings = nullptr);

// Posteriors under the current state, log-domain with log-sum-exp. Bins with
// a zero prior force the matching posterior to zero.
void e_step(const MultichannelSpectrogram& y, CgmmState& state);

// phi_v(t,f) = y^H R_v^{-1} y / M, floored.
void m_step_phi(const MultichannelSpectrogram& y, const CovarianceSet& R, RealMask& phi,
                double phi_floor_factor = 1e-10);

// R_v(f) = sum_t lambda_v/phi_v y y^H / sum_t lambda_v, symmetrized. A
// frequency with zero posterior mass keeps the previous R and records a
// warning.
void m_step_R(const MultichannelSpectrogram& y, const RealMask& lambda, const RealMask& phi,
              CovarianceSet& R, double loading_eps = 1e-6,
              std::vector<std::string>* warnings = nullptr);

// Principal-eigenpair projection R' = sigma_1 u_1 u_1^H.
void rank1_source_approx(CovarianceSet& R_s);

// Full refinement: initialization followed by `iterations` rounds of
// e_step -> m_step_phi -> m_step_R (+ optional rank-1 projection of R_s).
// iterations == 0 returns lambda = alpha with only the initial state set.
CgmmState refine(const MultichannelSpectrogram& y, const RealMask& alpha_s,
                 const RealMask& alpha_n, const CgmmConfig& config = CgmmConfig{});

void write_loglik_csv(const std::string& path, const std::vector<double>& loglik);

}  // namespace maskbeam
