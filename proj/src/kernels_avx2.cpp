// kernels_avx2.cpp
// AVX2+FMA variants. Compiled with -mavx2 -mfma on x86-64 only; dispatch
// guarantees these run only on CPUs that support both.
//
// Complex doubles are interleaved (re, im), so one __m256d holds two values.
// Product identities used below, with ar/ai = lane-duplicated parts of a and
// bswap = b with re/im swapped:
//   a * b       = fmaddsub(ar, b, ai * bswap)
//   a * conj(b) = fmsubadd(ai, bswap, ar * b)
//   conj(a) * b = fmsubadd(ar, b, ai * bswap)

#include "maskbeam/kernels.hpp"

#include <immintrin.h>

namespace maskbeam::kernels {
namespace {

inline __m256d re_dup(__m256d a) { return _mm256_movedup_pd(a); }
inline __m256d im_dup(__m256d a) { return _mm256_permute_pd(a, 0xF); }
inline __m256d swap_ri(__m256d a) { return _mm256_permute_pd(a, 0x5); }

inline __m256d cmul2(__m256d a, __m256d b) {
    return _mm256_fmaddsub_pd(re_dup(a), b, _mm256_mul_pd(im_dup(a), swap_ri(b)));
}
inline __m256d cmul_conj_b2(__m256d a, __m256d b) {
    return _mm256_fmsubadd_pd(im_dup(a), swap_ri(b), _mm256_mul_pd(re_dup(a), b));
}
inline __m256d cmul_conj_a2(__m256d a, __m256d b) {
    return _mm256_fmsubadd_pd(re_dup(a), b, _mm256_mul_pd(im_dup(a), swap_ri(b)));
}

inline cdouble hsum_c(__m256d acc) {
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    __m128d s = _mm_add_pd(lo, hi);
    alignas(16) double v[2];
    _mm_store_pd(v, s);
    return cdouble(v[0], v[1]);
}

void mul_real_avx2(const double* a, const double* b, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(z + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) z[i] = a[i] * b[i];
}

void fma_real_avx2(const double* a, const double* b, double* acc, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                                    _mm256_loadu_pd(acc + i));
        _mm256_storeu_pd(acc + i, v);
    }
    for (; i < n; ++i) acc[i] += a[i] * b[i];
}

void cmul_avx2(const cdouble* a, const cdouble* b, cdouble* z, std::size_t n) {
    const double* ap = reinterpret_cast<const double*>(a);
    const double* bp = reinterpret_cast<const double*>(b);
    double* zp = reinterpret_cast<double*>(z);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d va = _mm256_loadu_pd(ap + 2 * i);
        __m256d vb = _mm256_loadu_pd(bp + 2 * i);
        _mm256_storeu_pd(zp + 2 * i, cmul2(va, vb));
    }
    for (; i < n; ++i) {
        const double ar = a[i].real(), ai = a[i].imag();
        const double br = b[i].real(), bi = b[i].imag();
        z[i] = cdouble(ar * br - ai * bi, ar * bi + ai * br);
    }
}

void energetic_mask_avx2(const cdouble* y, const cdouble* xi, double* g, std::size_t n) {
    const double* yp = reinterpret_cast<const double*>(y);
    const double* xp = reinterpret_cast<const double*>(xi);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d x01 = _mm256_loadu_pd(xp + 2 * i);
        __m256d x23 = _mm256_loadu_pd(xp + 2 * i + 4);
        __m256d d01 = _mm256_sub_pd(_mm256_loadu_pd(yp + 2 * i), x01);
        __m256d d23 = _mm256_sub_pd(_mm256_loadu_pd(yp + 2 * i + 4), x23);
        // hadd yields |.|^2 in lane order (0, 2, 1, 3)
        __m256d num = _mm256_hadd_pd(_mm256_mul_pd(x01, x01), _mm256_mul_pd(x23, x23));
        __m256d dd = _mm256_hadd_pd(_mm256_mul_pd(d01, d01), _mm256_mul_pd(d23, d23));
        __m256d den = _mm256_add_pd(dd, num);
        __m256d quot = _mm256_and_pd(_mm256_cmp_pd(den, zero, _CMP_GT_OQ),
                                     _mm256_div_pd(num, den));
        _mm256_storeu_pd(g + i, _mm256_permute4x64_pd(quot, _MM_SHUFFLE(3, 1, 2, 0)));
    }
    for (; i < n; ++i) {
        const double xr = xi[i].real(), xim = xi[i].imag();
        const double dr = y[i].real() - xr, di = y[i].imag() - xim;
        const double num = xr * xr + xim * xim;
        const double den = dr * dr + di * di + num;
        g[i] = den > 0.0 ? num / den : 0.0;
    }
}

void weighted_outer_accum_avx2(const cdouble* y, const double* w, std::size_t frames,
                               std::size_t m, cdouble* R) {
    const std::size_t m2 = m & ~std::size_t(1);
    for (std::size_t t = 0; t < frames; ++t) {
        const cdouble* yt = y + t * m;
        const double wt = w[t];
        if (wt == 0.0) continue;
        const double* ytp = reinterpret_cast<const double*>(yt);
        const __m256d vw = _mm256_set1_pd(wt);
        for (std::size_t j = 0; j < m; ++j) {
            __m256d a = _mm256_mul_pd(vw, _mm256_broadcast_pd(
                                              reinterpret_cast<const __m128d*>(ytp + 2 * j)));
            double* rowp = reinterpret_cast<double*>(R + j * m);
            std::size_t k = 0;
            for (; k < m2; k += 2) {
                __m256d b = _mm256_loadu_pd(ytp + 2 * k);
                __m256d acc = _mm256_loadu_pd(rowp + 2 * k);
                _mm256_storeu_pd(rowp + 2 * k, _mm256_add_pd(acc, cmul_conj_b2(a, b)));
            }
            if (k < m) {
                const double ar = wt * yt[j].real(), ai = wt * yt[j].imag();
                const double br = yt[k].real(), bi = yt[k].imag();
                R[j * m + k] += cdouble(ar * br + ai * bi, ai * br - ar * bi);
            }
        }
    }
}

void quad_form_avx2(const cdouble* y, const cdouble* A, std::size_t frames,
                    std::size_t m, double* q) {
    const std::size_t m2 = m & ~std::size_t(1);
    for (std::size_t t = 0; t < frames; ++t) {
        const cdouble* yt = y + t * m;
        const double* ytp = reinterpret_cast<const double*>(yt);
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double* rowp = reinterpret_cast<const double*>(A + j * m);
            __m256d accv = _mm256_setzero_pd();
            std::size_t k = 0;
            for (; k < m2; k += 2) {
                __m256d va = _mm256_loadu_pd(rowp + 2 * k);
                __m256d vb = _mm256_loadu_pd(ytp + 2 * k);
                accv = _mm256_add_pd(accv, cmul2(va, vb));
            }
            cdouble v = hsum_c(accv);
            double vr = v.real(), vi = v.imag();
            if (k < m) {
                const cdouble& a = A[j * m + k];
                const cdouble& b = yt[k];
                vr += a.real() * b.real() - a.imag() * b.imag();
                vi += a.real() * b.imag() + a.imag() * b.real();
            }
            acc += yt[j].real() * vr + yt[j].imag() * vi;
        }
        q[t] = acc;
    }
}

void beamform_apply_avx2(const cdouble* y, const cdouble* w, std::size_t frames,
                         std::size_t m, cdouble* out) {
    const std::size_t m2 = m & ~std::size_t(1);
    const double* wp = reinterpret_cast<const double*>(w);
    for (std::size_t t = 0; t < frames; ++t) {
        const cdouble* yt = y + t * m;
        const double* ytp = reinterpret_cast<const double*>(yt);
        __m256d accv = _mm256_setzero_pd();
        std::size_t k = 0;
        for (; k < m2; k += 2) {
            __m256d va = _mm256_loadu_pd(wp + 2 * k);
            __m256d vb = _mm256_loadu_pd(ytp + 2 * k);
            accv = _mm256_add_pd(accv, cmul_conj_a2(va, vb));
        }
        cdouble z = hsum_c(accv);
        if (k < m) {
            const double ar = w[k].real(), ai = w[k].imag();
            const double br = yt[k].real(), bi = yt[k].imag();
            z += cdouble(ar * br + ai * bi, ar * bi - ai * br);
        }
        out[t] = z;
    }
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable table{
        mul_real_avx2,   fma_real_avx2,           cmul_avx2,          energetic_mask_avx2,
        weighted_outer_accum_avx2, quad_form_avx2, beamform_apply_avx2,
    };
    return &table;
}

}  // namespace maskbeam::kernels
