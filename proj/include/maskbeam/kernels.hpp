// kernels.hpp
// Arithmetic inner loops shared by the signal, mask, CGMM and beamforming
// code. Every kernel has a scalar reference implementation and, on x86-64,
// an AVX2+FMA variant; the active set is chosen once at runtime from CPU
// features. The two implementations are equivalence-tested against each
// other, and MASKBEAM_ISA=scalar|avx2 in the environment forces a choice.

#pragma once

#include <complex>
#include <cstddef>

#include "maskbeam/common.hpp"

namespace maskbeam::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
    // z[i] = a[i] * b[i], real
    void (*mul_real)(const double* a, const double* b, double* z, std::size_t n);
    // acc[i] += a[i] * b[i], real
    void (*fma_real)(const double* a, const double* b, double* acc, std::size_t n);
    // z[i] = a[i] * b[i], complex
    void (*cmul)(const cdouble* a, const cdouble* b, cdouble* z, std::size_t n);
    // g[i] = |xi|^2 / (|y - xi|^2 + |xi|^2), 0 where the denominator is 0
    void (*energetic_mask)(const cdouble* y, const cdouble* xi, double* g, std::size_t n);
    // R (m x m, row-major) += sum_t w[t] * y_t y_t^H, y is frames x m row-major
    void (*weighted_outer_accum)(const cdouble* y, const double* w, std::size_t frames,
                                 std::size_t m, cdouble* R);
    // q[t] = Re(y_t^H A y_t), A Hermitian m x m row-major
    void (*quad_form)(const cdouble* y, const cdouble* A, std::size_t frames,
                      std::size_t m, double* q);
    // out[t] = w^H y_t
    void (*beamform_apply)(const cdouble* y, const cdouble* w, std::size_t frames,
                           std::size_t m, cdouble* out);
};

const KernelTable& scalar_table();
bool cpu_has_avx2();
// nullptr when this build carries no AVX2 variants
const KernelTable* avx2_table();

// Active table; resolved on first use (env override, then CPU detection).
const KernelTable& active();
Isa active_isa();
const char* isa_name(Isa isa);
// Force a specific implementation (tests/benchmarks). Throws DataError if the
// requested ISA is unavailable on this machine.
void force_isa(Isa isa);

inline void mul_real(const double* a, const double* b, double* z, std::size_t n) {
    active().mul_real(a, b, z, n);
}
inline void fma_real(const double* a, const double* b, double* acc, std::size_t n) {
    active().fma_real(a, b, acc, n);
}
inline void cmul(const cdouble* a, const cdouble* b, cdouble* z, std::size_t n) {
    active().cmul(a, b, z, n);
}
inline void energetic_mask(const cdouble* y, const cdouble* xi, double* g, std::size_t n) {
    active().energetic_mask(y, xi, g, n);
}
inline void weighted_outer_accum(const cdouble* y, const double* w, std::size_t frames,
                                 std::size_t m, cdouble* R) {
    active().weighted_outer_accum(y, w, frames, m, R);
}
inline void quad_form(const cdouble* y, const cdouble* A, std::size_t frames,
                      std::size_t m, double* q) {
    active().quad_form(y, A, frames, m, q);
}
inline void beamform_apply(const cdouble* y, const cdouble* w, std::size_t frames,
                           std::size_t m, cdouble* out) {
    active().beamform_apply(y, w, frames, m, out);
}

}  // namespace maskbeam::kernels
