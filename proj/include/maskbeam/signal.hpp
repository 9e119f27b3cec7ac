// signal.hpp
// Time/frequency conversion, windowing and audio buffers shared by all
// other modules. Samples and spectra are double precision internally; WAV
// I/O converts at the boundary.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "maskbeam/common.hpp"

namespace maskbeam {

// Planar multichannel audio: channel m occupies samples [m*n, (m+1)*n).
struct Waveform {
    std::size_t channels = 0;
    std::size_t samples = 0;
    double sample_rate = 0.0;
    std::vector<double> data;

    Waveform() = default;
    Waveform(std::size_t channels_, std::size_t samples_, double rate)
        : channels(channels_), samples(samples_), sample_rate(rate),
          data(channels_ * samples_, 0.0) {}

    std::span<double> channel(std::size_t m) { return {data.data() + m * samples, samples}; }
    std::span<const double> channel(std::size_t m) const {
        return {data.data() + m * samples, samples};
    }
};

// One-sided complex STFT tensor, indexed (t, f, m) with m innermost.
struct MultichannelSpectrogram {
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::size_t channels = 0;
    std::size_t frame_shift = 0;
    std::size_t fft_size = 0;
    std::size_t window_length = 0;
    double sample_rate = 0.0;
    std::vector<cdouble> data;

    MultichannelSpectrogram() = default;
    MultichannelSpectrogram(std::size_t frames_, std::size_t bins_, std::size_t channels_)
        : frames(frames_), bins(bins_), channels(channels_),
          data(frames_ * bins_ * channels_, cdouble(0.0, 0.0)) {}

    cdouble& at(std::size_t t, std::size_t f, std::size_t m) {
        return data[(t * bins + f) * channels + m];
    }
    const cdouble& at(std::size_t t, std::size_t f, std::size_t m) const {
        return data[(t * bins + f) * channels + m];
    }
    // frequency of bin f in Hz
    double bin_hz(std::size_t f) const { return double(f) * sample_rate / double(fft_size); }

    MultichannelSpectrogram select_channels(std::span<const std::size_t> idx) const;
};

// Per-frequency view used by the covariance-heavy modules: for each f a
// contiguous frames x channels block, so the per-frame inner loops run on
// unit-stride data.
struct FrequencySlabs {
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::size_t channels = 0;
    std::vector<cdouble> data;

    explicit FrequencySlabs(const MultichannelSpectrogram& spec);
    std::span<const cdouble> slab(std::size_t f) const {
        return {data.data() + f * frames * channels, frames * channels};
    }
};

// periodic (DFT-even) Hann window
std::vector<double> hann_window(std::size_t length);

// Analysis: frames are left-aligned, hop must equal window_length/2, frame
// count T = floor((N - window_length)/hop) + 1. fft_size must be a power of
// two and >= window_length.
MultichannelSpectrogram stft(const Waveform& w, std::size_t fft_size,
                             std::size_t window_length, std::size_t hop);

// Weighted overlap-add synthesis with the same Hann window; exact
// reconstruction wherever the summed squared window is nonzero.
Waveform istft(const MultichannelSpectrogram& spec);

// Full linear convolution (length a + b - 1) via zero-padded FFTs.
std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b);

struct WavFormat {
    enum class Codec { pcm16, float32 };
    Codec codec = Codec::float32;
};

Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w,
               WavFormat format = WavFormat{});

}  // namespace maskbeam
