// signal.cpp
// STFT analysis/synthesis on top of FFTW, plus the slab repacking used by
// the covariance code.

#include "maskbeam/signal.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>

#include "maskbeam/kernels.hpp"

namespace maskbeam {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface
// is. Plans are cached per size and never destroyed.
class PlanCache {
  public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    struct Plans {
        fftw_plan fwd = nullptr;  // r2c
        fftw_plan inv = nullptr;  // c2r
    };

    Plans get(std::size_t n) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = plans_.find(n);
        if (it != plans_.end()) return it->second;
        double* re = fftw_alloc_real(n);
        fftw_complex* cx = fftw_alloc_complex(n / 2 + 1);
        Plans p;
        p.fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), re, cx,
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
        p.inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), cx, re,
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(cx);
        fftw_free(re);
        plans_.emplace(n, p);
        return p;
    }

  private:
    std::mutex mu_;
    std::map<std::size_t, Plans> plans_;
};

fftw_complex* as_fftw(cdouble* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

std::vector<double> hann_window(std::size_t length) {
    std::vector<double> w(length);
    for (std::size_t i = 0; i < length; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * double(i) / double(length));
    }
    return w;
}

MultichannelSpectrogram stft(const Waveform& w, std::size_t fft_size,
                             std::size_t window_length, std::size_t hop) {
    if (w.channels == 0 || w.sample_rate <= 0.0) throw DataError("stft: empty waveform");
    if (window_length == 0 || window_length % 2 != 0)
        throw DataError("stft: window length must be even and nonzero");
    if (window_length > fft_size) throw DataError("stft: window length exceeds fft size");
    if (hop != window_length / 2) throw DataError("stft: hop must be half the window length");
    if (w.samples < window_length) throw DataError("input too short");

    const std::size_t frames = (w.samples - window_length) / hop + 1;
    const std::size_t bins = fft_size / 2 + 1;
    MultichannelSpectrogram spec(frames, bins, w.channels);
    spec.frame_shift = hop;
    spec.fft_size = fft_size;
    spec.window_length = window_length;
    spec.sample_rate = w.sample_rate;

    const std::vector<double> win = hann_window(window_length);
    const PlanCache::Plans plans = PlanCache::instance().get(fft_size);

    std::vector<double> frame(fft_size, 0.0);
    std::vector<cdouble> out(bins);
    for (std::size_t m = 0; m < w.channels; ++m) {
        std::span<const double> x = w.channel(m);
        for (std::size_t t = 0; t < frames; ++t) {
            kernels::mul_real(x.data() + t * hop, win.data(), frame.data(), window_length);
            fftw_execute_dft_r2c(plans.fwd, frame.data(), as_fftw(out.data()));
            for (std::size_t f = 0; f < bins; ++f) spec.at(t, f, m) = out[f];
        }
    }
    return spec;
}

Waveform istft(const MultichannelSpectrogram& spec) {
    const std::size_t win_len = spec.window_length;
    if (spec.frames == 0 || spec.channels == 0) throw DataError("istft: empty spectrogram");
    if (win_len == 0 || spec.frame_shift != win_len / 2 || win_len > spec.fft_size ||
        spec.bins != spec.fft_size / 2 + 1 || spec.sample_rate <= 0.0)
        throw DataError("istft: inconsistent spectrogram parameters");

    const std::size_t hop = spec.frame_shift;
    const std::size_t total = hop * (spec.frames - 1) + win_len;
    Waveform w(spec.channels, total, spec.sample_rate);

    const std::vector<double> win = hann_window(win_len);
    std::vector<double> wsum(total, 0.0);
    for (std::size_t t = 0; t < spec.frames; ++t) {
        kernels::fma_real(win.data(), win.data(), wsum.data() + t * hop, win_len);
    }

    const PlanCache::Plans plans = PlanCache::instance().get(spec.fft_size);
    std::vector<cdouble> in(spec.bins);
    std::vector<double> frame(spec.fft_size);
    std::vector<double> synth(win_len);
    const double scale = 1.0 / double(spec.fft_size);

    for (std::size_t m = 0; m < spec.channels; ++m) {
        std::span<double> x = w.channel(m);
        for (std::size_t t = 0; t < spec.frames; ++t) {
            for (std::size_t f = 0; f < spec.bins; ++f) in[f] = spec.at(t, f, m);
            fftw_execute_dft_c2r(plans.inv, as_fftw(in.data()), frame.data());
            for (std::size_t i = 0; i < win_len; ++i) synth[i] = frame[i] * scale;
            kernels::fma_real(win.data(), synth.data(), x.data() + t * hop, win_len);
        }
        for (std::size_t i = 0; i < total; ++i) {
            x[i] = wsum[i] > 1e-12 ? x[i] / wsum[i] : 0.0;
        }
    }
    return w;
}

MultichannelSpectrogram MultichannelSpectrogram::select_channels(
    std::span<const std::size_t> idx) const {
    MultichannelSpectrogram out(frames, bins, idx.size());
    out.frame_shift = frame_shift;
    out.fft_size = fft_size;
    out.window_length = window_length;
    out.sample_rate = sample_rate;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= channels) throw DataError("select_channels: channel index out of range");
    }
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t f = 0; f < bins; ++f) {
            const cdouble* src = &data[(t * bins + f) * channels];
            cdouble* dst = &out.data[(t * out.bins + f) * out.channels];
            for (std::size_t i = 0; i < idx.size(); ++i) dst[i] = src[idx[i]];
        }
    }
    return out;
}

std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) return {};
    const std::size_t out_len = a.size() + b.size() - 1;
    std::size_t n = 1;
    while (n < out_len) n <<= 1;
    const PlanCache::Plans plans = PlanCache::instance().get(n);

    std::vector<double> pa(n, 0.0), pb(n, 0.0);
    std::copy(a.begin(), a.end(), pa.begin());
    std::copy(b.begin(), b.end(), pb.begin());
    std::vector<cdouble> fa(n / 2 + 1), fb(n / 2 + 1);
    fftw_execute_dft_r2c(plans.fwd, pa.data(), as_fftw(fa.data()));
    fftw_execute_dft_r2c(plans.fwd, pb.data(), as_fftw(fb.data()));
    kernels::cmul(fa.data(), fb.data(), fa.data(), fa.size());
    fftw_execute_dft_c2r(plans.inv, as_fftw(fa.data()), pa.data());

    std::vector<double> out(out_len);
    const double scale = 1.0 / double(n);
    for (std::size_t i = 0; i < out_len; ++i) out[i] = pa[i] * scale;
    return out;
}

FrequencySlabs::FrequencySlabs(const MultichannelSpectrogram& spec)
    : frames(spec.frames), bins(spec.bins), channels(spec.channels),
      data(spec.frames * spec.bins * spec.channels) {
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t f = 0; f < bins; ++f) {
            const cdouble* src = &spec.data[(t * bins + f) * channels];
            cdouble* dst = &data[(f * frames + t) * channels];
            std::memcpy(dst, src, channels * sizeof(cdouble));
        }
    }
}

}  // namespace maskbeam
