// cgmm.cpp
// EM refinement. Frequencies are independent given y and the priors, so all
// per-frequency phases run through parallel_for; every output slot is owned
// by exactly one frequency, which keeps results identical for any thread
// count.

#include "maskbeam/cgmm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "maskbeam/kernels.hpp"

namespace maskbeam {

namespace {

using MatrixXcdR =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

MatrixXcdR to_eigen(const cdouble* m, std::size_t dim) {
    return Eigen::Map<const MatrixXcdR>(m, Eigen::Index(dim), Eigen::Index(dim));
}

void from_eigen(const MatrixXcdR& src, cdouble* dst) {
    Eigen::Map<MatrixXcdR>(dst, src.rows(), src.cols()) = src;
}

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

double trace_real(const cdouble* R, std::size_t m) {
    double tr = 0.0;
    for (std::size_t j = 0; j < m; ++j) tr += R[j * m + j].real();
    return tr;
}

void add_loading(cdouble* R, std::size_t m, double eps) {
    const double load = eps * trace_real(R, m) / double(m);
    for (std::size_t j = 0; j < m; ++j) R[j * m + j] += load;
}

void set_identity(cdouble* R, std::size_t m) {
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < m; ++k) R[j * m + k] = cdouble(j == k ? 1.0 : 0.0, 0.0);
    }
}

// Hermitian Cholesky factorization of R: inverse (row-major) plus log det.
// Throws NumericalError naming the frequency bin when R is not positive
// definite.
void factor_covariance(const cdouble* R, std::size_t m, std::size_t f,
                       std::vector<cdouble>& inv, double& logdet) {
    const MatrixXcdR A = to_eigen(R, m);
    Eigen::LLT<MatrixXcdR> llt(A);
    if (llt.info() != Eigen::Success)
        throw NumericalError("cgmm: covariance not positive definite at frequency bin " +
                             std::to_string(f));
    logdet = 0.0;
    for (Eigen::Index j = 0; j < A.rows(); ++j) {
        logdet += 2.0 * std::log(llt.matrixLLT()(j, j).real());
    }
    const MatrixXcdR id = MatrixXcdR::Identity(A.rows(), A.cols());
    const MatrixXcdR ainv = llt.solve(id);
    inv.resize(m * m);
    from_eigen(ainv, inv.data());
    if (!std::isfinite(logdet))
        throw NumericalError("cgmm: non-finite determinant at frequency bin " +
                             std::to_string(f));
}

double logsumexp2(double a, double b) {
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

double sigmoid(double d) {
    if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
    const double e = std::exp(d);
    return e / (1.0 + e);
}

// mean per-frequency signal power, the reference for the phi floor
double mean_power(std::span<const cdouble> slab) {
    double acc = 0.0;
    for (const cdouble& v : slab) acc += std::norm(v);
    return slab.empty() ? 0.0 : acc / double(slab.size());
}

double phi_floor_for(double mean_pow, double factor) {
    const double floor = factor * mean_pow;
    return floor > 0.0 ? floor : std::numeric_limits<double>::min();
}

void validate_priors(const MultichannelSpectrogram& y, const RealMask& alpha_s,
                     const RealMask& alpha_n) {
    if (alpha_s.channels != 1 || alpha_n.channels != 1)
        throw DataError("cgmm: priors must be pooled (t, f) masks");
    if (alpha_s.frames != y.frames || alpha_s.bins != y.bins ||
        alpha_n.frames != y.frames || alpha_n.bins != y.bins)
        throw DataError("cgmm: prior shape does not match the spectrogram");
    for (std::size_t i = 0; i < alpha_s.values.size(); ++i) {
        const double s = alpha_s.values[i], n = alpha_n.values[i];
        if (!(s >= 0.0 && s <= 1.0 && n >= 0.0 && n <= 1.0))
            throw DataError("cgmm: prior value outside [0, 1]");
        if (s + n <= 0.0) throw DataError("cgmm: both priors zero at a bin");
    }
}

}  // namespace

void init_covariances(const MultichannelSpectrogram& y, const RealMask& alpha_s,
                      const RealMask& alpha_n, double loading_eps, CovarianceSet& R_s,
                      CovarianceSet& R_n, std::vector<std::string>* warnings) {
    validate_priors(y, alpha_s, alpha_n);
    const FrequencySlabs slabs(y);
    const std::size_t m = y.channels;
    R_s = CovarianceSet(y.bins, m);
    R_n = CovarianceSet(y.bins, m);

    std::vector<double> w(y.frames);
    for (std::size_t f = 0; f < y.bins; ++f) {
        const std::span<const cdouble> slab = slabs.slab(f);
        for (int v = 0; v < 2; ++v) {
            const RealMask& alpha = v == 0 ? alpha_s : alpha_n;
            cdouble* R = (v == 0 ? R_s : R_n).matrix(f);
            double sum = 0.0;
            for (std::size_t t = 0; t < y.frames; ++t) {
                w[t] = alpha.at(t, f);
                sum += w[t];
            }
            bool fallback = sum <= 0.0;
            if (!fallback) {
                kernels::weighted_outer_accum(slab.data(), w.data(), y.frames, m, R);
                const double tr = trace_real(R, m);
                if (tr > 0.0) {
                    const double scale = double(m) / tr;  // 1/sum and tr/m folded together
                    for (std::size_t i = 0; i < m * m; ++i) R[i] *= scale;
                    symmetrize(R, m);
                } else {
                    fallback = true;
                }
            }
            if (fallback) {
                set_identity(R, m);
                if (warnings)
                    warnings->push_back("init_covariances: identity fallback for component " +
                                        std::string(v == 0 ? "s" : "n") + " at frequency bin " +
                                        std::to_string(f));
            }
            add_loading(R, m, loading_eps);
        }
    }
}

void m_step_phi(const MultichannelSpectrogram& y, const CovarianceSet& R, RealMask& phi,
                double phi_floor_factor) {
    if (R.bins != y.bins || R.channels != y.channels)
        throw DataError("m_step_phi: covariance shape mismatch");
    const FrequencySlabs slabs(y);
    phi = RealMask(y.frames, y.bins, 1);
    std::vector<cdouble> inv;
    std::vector<double> q(y.frames);
    for (std::size_t f = 0; f < y.bins; ++f) {
        double logdet = 0.0;
        factor_covariance(R.matrix(f), y.channels, f, inv, logdet);
        const std::span<const cdouble> slab = slabs.slab(f);
        kernels::quad_form(slab.data(), inv.data(), y.frames, y.channels, q.data());
        const double floor = phi_floor_for(mean_power(slab), phi_floor_factor);
        for (std::size_t t = 0; t < y.frames; ++t) {
            phi.at(t, f) = std::max(q[t] / double(y.channels), floor);
        }
    }
}

void e_step(const MultichannelSpectrogram& y, CgmmState& state) {
    const FrequencySlabs slabs(y);
    const std::size_t m = y.channels;
    state.lambda_s = RealMask(y.frames, y.bins, 1);
    state.lambda_n = RealMask(y.frames, y.bins, 1);

    std::vector<cdouble> inv_s, inv_n;
    std::vector<double> q_s(y.frames), q_n(y.frames);
    for (std::size_t f = 0; f < y.bins; ++f) {
        double logdet_s = 0.0, logdet_n = 0.0;
        factor_covariance(state.R_s.matrix(f), m, f, inv_s, logdet_s);
        factor_covariance(state.R_n.matrix(f), m, f, inv_n, logdet_n);
        const std::span<const cdouble> slab = slabs.slab(f);
        kernels::quad_form(slab.data(), inv_s.data(), y.frames, m, q_s.data());
        kernels::quad_form(slab.data(), inv_n.data(), y.frames, m, q_n.data());
        for (std::size_t t = 0; t < y.frames; ++t) {
            const double as = state.alpha_s.at(t, f);
            const double an = state.alpha_n.at(t, f);
            double ls = 0.0, ln = 0.0;
            if (as > 0.0) {
                const double phi = state.phi_s.at(t, f);
                ls = std::log(as) - double(m) * (kLogPi + std::log(phi)) - logdet_s -
                     q_s[t] / phi;
            }
            if (an > 0.0) {
                const double phi = state.phi_n.at(t, f);
                ln = std::log(an) - double(m) * (kLogPi + std::log(phi)) - logdet_n -
                     q_n[t] / phi;
            }
            if (!std::isfinite(ls) || !std::isfinite(ln))
                throw NumericalError("cgmm: non-finite density at frequency bin " +
                                     std::to_string(f));
            double lam_s;
            if (as <= 0.0)
                lam_s = 0.0;
            else if (an <= 0.0)
                lam_s = 1.0;
            else
                lam_s = sigmoid(ls - ln);
            state.lambda_s.at(t, f) = lam_s;
            state.lambda_n.at(t, f) = 1.0 - lam_s;
        }
    }
}

void m_step_R(const MultichannelSpectrogram& y, const RealMask& lambda, const RealMask& phi,
              CovarianceSet& R, double loading_eps, std::vector<std::string>* warnings) {
    if (lambda.channels != 1 || phi.channels != 1 || lambda.frames != y.frames ||
        lambda.bins != y.bins || phi.frames != y.frames || phi.bins != y.bins)
        throw DataError("m_step_R: shape mismatch");
    if (R.bins != y.bins || R.channels != y.channels)
        throw DataError("m_step_R: covariance shape mismatch");
    const FrequencySlabs slabs(y);
    const std::size_t m = y.channels;

    std::vector<double> w(y.frames);
    std::vector<cdouble> acc(m * m);
    for (std::size_t f = 0; f < y.bins; ++f) {
        double sum = 0.0;
        for (std::size_t t = 0; t < y.frames; ++t) {
            const double l = lambda.at(t, f);
            w[t] = l / phi.at(t, f);
            sum += l;
        }
        if (sum <= 0.0) {
            if (warnings)
                warnings->push_back("m_step_R: zero posterior mass at frequency bin " +
                                    std::to_string(f) + ", keeping previous covariance");
            continue;
        }
        std::fill(acc.begin(), acc.end(), cdouble(0.0, 0.0));
        kernels::weighted_outer_accum(slabs.slab(f).data(), w.data(), y.frames, m, acc.data());
        for (cdouble& v : acc) v /= sum;
        symmetrize(acc.data(), m);
        if (trace_real(acc.data(), m) <= 0.0) {
            if (warnings)
                warnings->push_back("m_step_R: zero energy at frequency bin " +
                                    std::to_string(f) + ", keeping previous covariance");
            continue;
        }
        std::copy(acc.begin(), acc.end(), R.matrix(f));
        add_loading(R.matrix(f), m, loading_eps);
    }
}

void rank1_source_approx(CovarianceSet& R_s) {
    const std::size_t m = R_s.channels;
    Eigen::SelfAdjointEigenSolver<MatrixXcdR> es;
    for (std::size_t f = 0; f < R_s.bins; ++f) {
        es.compute(to_eigen(R_s.matrix(f), m));
        const double sigma = es.eigenvalues()(Eigen::Index(m - 1));
        const Eigen::VectorXcd u = es.eigenvectors().col(Eigen::Index(m - 1));
        const MatrixXcdR proj = sigma * (u * u.adjoint());
        from_eigen(proj, R_s.matrix(f));
    }
}

CgmmState refine(const MultichannelSpectrogram& y, const RealMask& alpha_s,
                 const RealMask& alpha_n, const CgmmConfig& config) {
    validate_priors(y, alpha_s, alpha_n);
    const FrequencySlabs slabs(y);
    const std::size_t m = y.channels;
    const std::size_t frames = y.frames;
    const std::size_t bins = y.bins;

    CgmmState state;
    state.alpha_s = alpha_s;
    state.alpha_n = alpha_n;
    state.lambda_s = alpha_s;
    state.lambda_n = alpha_n;
    state.phi_s = RealMask(frames, bins, 1);
    state.phi_n = RealMask(frames, bins, 1);
    state.R_s = CovarianceSet(bins, m);
    state.R_n = CovarianceSet(bins, m);

    // per-frequency factorizations of the current covariances
    CovarianceSet inv_s(bins, m), inv_n(bins, m);
    std::vector<double> logdet_s(bins, 0.0), logdet_n(bins, 0.0);
    std::vector<double> floor_f(bins, 0.0);
    const std::size_t rows = std::size_t(config.iterations) + 1;
    std::vector<double> loglik_by_f(bins * rows, 0.0);
    std::vector<std::vector<std::string>> warn_by_f(bins);

    // initialization: R via the update rule with lambda = alpha and the
    // variance excluded, trace-normalized; phi from the initial R
    parallel_for(0, bins, [&](std::size_t f) {
        const std::span<const cdouble> slab = slabs.slab(f);
        floor_f[f] = phi_floor_for(mean_power(slab), config.phi_floor_factor);
        std::vector<double> w(frames);
        for (int v = 0; v < 2; ++v) {
            const RealMask& alpha = v == 0 ? alpha_s : alpha_n;
            cdouble* R = (v == 0 ? state.R_s : state.R_n).matrix(f);
            double sum = 0.0;
            for (std::size_t t = 0; t < frames; ++t) {
                w[t] = alpha.at(t, f);
                sum += w[t];
            }
            bool fallback = sum <= 0.0;
            if (!fallback) {
                kernels::weighted_outer_accum(slab.data(), w.data(), frames, m, R);
                const double tr = trace_real(R, m);
                if (tr > 0.0) {
                    const double scale = double(m) / tr;
                    for (std::size_t i = 0; i < m * m; ++i) R[i] *= scale;
                    symmetrize(R, m);
                } else {
                    fallback = true;
                }
            }
            if (fallback) {
                set_identity(R, m);
                warn_by_f[f].push_back("init_covariances: identity fallback for component " +
                                       std::string(v == 0 ? "s" : "n") + " at frequency bin " +
                                       std::to_string(f));
            }
            add_loading(R, m, config.loading_eps);

            std::vector<cdouble> inv;
            double logdet = 0.0;
            factor_covariance(R, m, f, inv, logdet);
            std::copy(inv.begin(), inv.end(), (v == 0 ? inv_s : inv_n).matrix(f));
            (v == 0 ? logdet_s : logdet_n)[f] = logdet;

            std::vector<double> q(frames);
            kernels::quad_form(slab.data(), inv.data(), frames, m, q.data());
            RealMask& phi = v == 0 ? state.phi_s : state.phi_n;
            for (std::size_t t = 0; t < frames; ++t) {
                phi.at(t, f) = std::max(q[t] / double(m), floor_f[f]);
            }
        }
    }, config.threads);

    auto em_round = [&](std::size_t f, unsigned iteration) {
        const std::span<const cdouble> slab = slabs.slab(f);
        std::vector<double> q_s(frames), q_n(frames);
        kernels::quad_form(slab.data(), inv_s.matrix(f), frames, m, q_s.data());
        kernels::quad_form(slab.data(), inv_n.matrix(f), frames, m, q_n.data());

        // E-step under the previous parameters; the same quadratic forms feed
        // the phi update below. Also accumulates the data log-likelihood of
        // the previous parameter set.
        double loglik = 0.0;
        for (std::size_t t = 0; t < frames; ++t) {
            const double as = alpha_s.at(t, f);
            const double an = alpha_n.at(t, f);
            double ls = 0.0, ln = 0.0;
            if (as > 0.0) {
                const double phi = state.phi_s.at(t, f);
                ls = std::log(as) - double(m) * (kLogPi + std::log(phi)) - logdet_s[f] -
                     q_s[t] / phi;
            }
            if (an > 0.0) {
                const double phi = state.phi_n.at(t, f);
                ln = std::log(an) - double(m) * (kLogPi + std::log(phi)) - logdet_n[f] -
                     q_n[t] / phi;
            }
            if (!std::isfinite(ls) || !std::isfinite(ln))
                throw NumericalError("cgmm: non-finite density at frequency bin " +
                                     std::to_string(f));
            double lam_s;
            double lse;
            if (as <= 0.0) {
                lam_s = 0.0;
                lse = ln;
            } else if (an <= 0.0) {
                lam_s = 1.0;
                lse = ls;
            } else {
                lam_s = sigmoid(ls - ln);
                lse = logsumexp2(ls, ln);
            }
            state.lambda_s.at(t, f) = lam_s;
            state.lambda_n.at(t, f) = 1.0 - lam_s;
            loglik += lse;
        }
        loglik_by_f[f * rows + iteration - 1] = loglik;

        // M-step: phi from the previous covariances, then the covariances
        // from the fresh posteriors and variances.
        for (int v = 0; v < 2; ++v) {
            const std::vector<double>& q = v == 0 ? q_s : q_n;
            RealMask& phi = v == 0 ? state.phi_s : state.phi_n;
            for (std::size_t t = 0; t < frames; ++t) {
                phi.at(t, f) = std::max(q[t] / double(m), floor_f[f]);
            }
        }
        std::vector<double> w(frames);
        std::vector<cdouble> acc(m * m);
        for (int v = 0; v < 2; ++v) {
            const RealMask& lambda = v == 0 ? state.lambda_s : state.lambda_n;
            const RealMask& phi = v == 0 ? state.phi_s : state.phi_n;
            cdouble* R = (v == 0 ? state.R_s : state.R_n).matrix(f);
            double sum = 0.0;
            for (std::size_t t = 0; t < frames; ++t) {
                const double l = lambda.at(t, f);
                w[t] = l / phi.at(t, f);
                sum += l;
            }
            bool keep_previous = sum <= 0.0;
            if (!keep_previous) {
                std::fill(acc.begin(), acc.end(), cdouble(0.0, 0.0));
                kernels::weighted_outer_accum(slab.data(), w.data(), frames, m, acc.data());
                for (cdouble& x : acc) x /= sum;
                symmetrize(acc.data(), m);
                keep_previous = trace_real(acc.data(), m) <= 0.0;
            }
            if (keep_previous) {
                warn_by_f[f].push_back("m_step_R: zero posterior mass at frequency bin " +
                                       std::to_string(f) + " (iteration " +
                                       std::to_string(iteration) +
                                       "), keeping previous covariance");
                continue;  // inverse and determinant stay valid
            }
            if (v == 0 && config.rank1_source) {
                Eigen::SelfAdjointEigenSolver<MatrixXcdR> solver(
                    to_eigen(acc.data(), m));
                const double sigma = solver.eigenvalues()(Eigen::Index(m - 1));
                const Eigen::VectorXcd u = solver.eigenvectors().col(Eigen::Index(m - 1));
                const MatrixXcdR proj = sigma * (u * u.adjoint());
                from_eigen(proj, acc.data());
            }
            std::copy(acc.begin(), acc.end(), R);
            add_loading(R, m, config.loading_eps);

            std::vector<cdouble> inv;
            double logdet = 0.0;
            factor_covariance(R, m, f, inv, logdet);
            std::copy(inv.begin(), inv.end(), (v == 0 ? inv_s : inv_n).matrix(f));
            (v == 0 ? logdet_s : logdet_n)[f] = logdet;
        }
    };

    for (unsigned k = 1; k <= config.iterations; ++k) {
        parallel_for(0, bins, [&](std::size_t f) { em_round(f, k); }, config.threads);
        if (config.iteration_callback) config.iteration_callback(k, state);
    }

    // likelihood of the final parameter set
    parallel_for(0, bins, [&](std::size_t f) {
        const std::span<const cdouble> slab = slabs.slab(f);
        std::vector<double> q_s(frames), q_n(frames);
        kernels::quad_form(slab.data(), inv_s.matrix(f), frames, m, q_s.data());
        kernels::quad_form(slab.data(), inv_n.matrix(f), frames, m, q_n.data());
        double loglik = 0.0;
        for (std::size_t t = 0; t < frames; ++t) {
            const double as = alpha_s.at(t, f);
            const double an = alpha_n.at(t, f);
            double ls = 0.0, ln = 0.0;
            if (as > 0.0) {
                const double phi = state.phi_s.at(t, f);
                ls = std::log(as) - double(m) * (kLogPi + std::log(phi)) - logdet_s[f] -
                     q_s[t] / phi;
            }
            if (an > 0.0) {
                const double phi = state.phi_n.at(t, f);
                ln = std::log(an) - double(m) * (kLogPi + std::log(phi)) - logdet_n[f] -
                     q_n[t] / phi;
            }
            if (as <= 0.0)
                loglik += ln;
            else if (an <= 0.0)
                loglik += ls;
            else
                loglik += logsumexp2(ls, ln);
        }
        loglik_by_f[f * rows + config.iterations] = loglik;
    }, config.threads);

    state.loglik.assign(rows, 0.0);
    for (std::size_t k = 0; k < rows; ++k) {
        double sum = 0.0;
        for (std::size_t f = 0; f < bins; ++f) sum += loglik_by_f[f * rows + k];
        state.loglik[k] = sum;
    }
    for (std::size_t f = 0; f < bins; ++f) {
        for (std::string& msg : warn_by_f[f]) state.warnings.push_back(std::move(msg));
    }
    return state;
}

void write_loglik_csv(const std::string& path, const std::vector<double>& loglik) {
    std::string out = "iteration,loglik\n";
    char buf[64];
    for (std::size_t i = 0; i < loglik.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.12g\n", i, loglik[i]);
        out += buf;
    }
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << out;
    if (!os) throw DataError("failed writing log-likelihood CSV: " + path);
}

}  // namespace maskbeam
