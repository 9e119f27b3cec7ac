// kernels_scalar.cpp
// Reference implementations. These define the semantics; the SIMD variants
// must match them within floating-point reassociation tolerance.

#include "maskbeam/kernels.hpp"

namespace maskbeam::kernels {
namespace {

void mul_real_scalar(const double* a, const double* b, double* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = a[i] * b[i];
}

void fma_real_scalar(const double* a, const double* b, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += a[i] * b[i];
}

void cmul_scalar(const cdouble* a, const cdouble* b, cdouble* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double ar = a[i].real(), ai = a[i].imag();
        const double br = b[i].real(), bi = b[i].imag();
        z[i] = cdouble(ar * br - ai * bi, ar * bi + ai * br);
    }
}

void energetic_mask_scalar(const cdouble* y, const cdouble* xi, double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double xr = xi[i].real(), xim = xi[i].imag();
        const double dr = y[i].real() - xr, di = y[i].imag() - xim;
        const double num = xr * xr + xim * xim;
        const double den = dr * dr + di * di + num;
        g[i] = den > 0.0 ? num / den : 0.0;
    }
}

void weighted_outer_accum_scalar(const cdouble* y, const double* w, std::size_t frames,
                                 std::size_t m, cdouble* R) {
    for (std::size_t t = 0; t < frames; ++t) {
        const cdouble* yt = y + t * m;
        const double wt = w[t];
        if (wt == 0.0) continue;
        for (std::size_t j = 0; j < m; ++j) {
            const double ar = wt * yt[j].real(), ai = wt * yt[j].imag();
            cdouble* row = R + j * m;
            for (std::size_t k = 0; k < m; ++k) {
                // (w * y_j) * conj(y_k)
                const double br = yt[k].real(), bi = yt[k].imag();
                row[k] += cdouble(ar * br + ai * bi, ai * br - ar * bi);
            }
        }
    }
}

void quad_form_scalar(const cdouble* y, const cdouble* A, std::size_t frames,
                      std::size_t m, double* q) {
    for (std::size_t t = 0; t < frames; ++t) {
        const cdouble* yt = y + t * m;
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const cdouble* row = A + j * m;
            // v_j = sum_k A[j][k] * y_k
            double vr = 0.0, vi = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                const double ar = row[k].real(), ai = row[k].imag();
                const double br = yt[k].real(), bi = yt[k].imag();
                vr += ar * br - ai * bi;
                vi += ar * bi + ai * br;
            }
            // acc += Re(conj(y_j) * v_j)
            acc += yt[j].real() * vr + yt[j].imag() * vi;
        }
        q[t] = acc;
    }
}

void beamform_apply_scalar(const cdouble* y, const cdouble* w, std::size_t frames,
                           std::size_t m, cdouble* out) {
    for (std::size_t t = 0; t < frames; ++t) {
        const cdouble* yt = y + t * m;
        double zr = 0.0, zi = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            // conj(w_k) * y_k
            const double ar = w[k].real(), ai = w[k].imag();
            const double br = yt[k].real(), bi = yt[k].imag();
            zr += ar * br + ai * bi;
            zi += ar * bi - ai * br;
        }
        out[t] = cdouble(zr, zi);
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{
        mul_real_scalar,   fma_real_scalar,           cmul_scalar,          energetic_mask_scalar,
        weighted_outer_accum_scalar, quad_form_scalar, beamform_apply_scalar,
    };
    return table;
}

}  // namespace maskbeam::kernels
