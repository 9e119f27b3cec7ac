// roomsim.hpp
// Synthetic multichannel scenarios: image-source room impulse responses for
// a nested linear array, SNR-controlled mixing, and seeded source signals.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "maskbeam/signal.hpp"

namespace maskbeam {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

// Linear array described by per-element offsets along x (meters, relative to
// the first element) plus the channel index sets of the two sub-arrays.
// Element positions centre the span on the array centre.
struct ArrayGeometry {
    std::vector<double> offsets;
    std::vector<std::size_t> small_subarray;
    std::vector<std::size_t> large_subarray;

    std::size_t channels() const { return offsets.size(); }
    bool has_subarrays() const { return !small_subarray.empty() && !large_subarray.empty(); }
};

// The 6-element nested layout: two 4-element sub-arrays with 0.05 m and
// 0.15 m spacing sharing the elements at 0 and 0.15 m.
ArrayGeometry nested_array_geometry();

struct Scenario {
    Vec3 room_dims{7.5, 5.5, 3.5};
    double rt60 = 0.3;
    Vec3 array_center{3.75, 2.75, 1.5};
    double source_azimuth_deg = 0.0;
    Vec3 source_pos{4.75, 2.75, 1.5};
    Vec3 noise_pos{2.0, 4.0, 1.5};
    ArrayGeometry geometry = nested_array_geometry();
    double snr_db = 0.0;
    std::uint64_t seed = 0;
    double sample_rate = 16000.0;
    double duration_s = 2.0;

    std::vector<Vec3> mic_positions() const;
};

struct ScenarioRanges {
    double room_lo[3] = {7.0, 5.0, 3.0};
    double room_hi[3] = {8.0, 6.0, 4.0};
    double rt60_lo = 0.2;
    double rt60_hi = 0.5;
    double snr_db = 0.0;
    double sample_rate = 16000.0;
    double duration_s = 2.0;
};

// Uniform draws within the ranges; the source sits exactly 1 m from the
// array centre at a random azimuth, the noise source at least 1 m away from
// the centre and 0.5 m from every wall.
Scenario sample_scenario(const ScenarioRanges& ranges, std::uint64_t seed);

// One impulse response per microphone, all of equal length.
struct RirSet {
    std::size_t mics = 0;
    std::size_t length = 0;
    double sample_rate = 0.0;
    std::vector<double> taps;

    std::span<double> rir(std::size_t m) { return {taps.data() + m * length, length}; }
    std::span<const double> rir(std::size_t m) const {
        return {taps.data() + m * length, length};
    }
};

// Image-source RIR with uniform wall reflectivity beta and image horizon
// t_max seconds. Fractional delays use a +/-8 tap windowed sinc.
RirSet image_source_rir_beta(const Vec3& room, const Vec3& source,
                             std::span<const Vec3> mics, double sample_rate, double beta,
                             double t_max);

// Wall reflectivity solved from RT60 via Eyring's formula; rt60 <= 0 gives
// the anechoic (direct path only) response.
RirSet image_source_rir(const Scenario& scenario, const Vec3& source_pos);

struct MixResult {
    Waveform mixture;       // y = s_img + n_img
    Waveform speech_image;  // reverberant speech at the mics
    Waveform noise_image;   // reverberant, SNR-scaled noise at the mics
};

// Convolves both sources with their RIRs and scales the noise so the
// speech-to-noise power ratio at the reference microphone is snr_db over the
// full utterance.
MixResult mix_at_snr(const Waveform& speech, const Waveform& noise, const RirSet& speech_rirs,
                     const RirSet& noise_rirs, double snr_db, std::size_t reference_channel = 0);

// Bundled source material for DNN-free experiments: an amplitude-modulated
// harmonic complex with syllabic gaps, and lowpass-coloured Gaussian noise.
Waveform synth_speech(std::uint64_t seed, std::size_t samples, double sample_rate);
Waveform synth_noise(std::uint64_t seed, std::size_t samples, double sample_rate);

void write_scenario_file(const std::string& path, const Scenario& scenario);
Scenario read_scenario_file(const std::string& path);

}  // namespace maskbeam
