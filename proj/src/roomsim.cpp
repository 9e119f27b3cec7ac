// roomsim.cpp

#include "maskbeam/roomsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "maskbeam/kv.hpp"

namespace maskbeam {

namespace {

constexpr int kSincHalf = 8;  // +/- taps of the fractional-delay kernel

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = kPi * x;
    return std::sin(px) / px;
}

}  // namespace

ArrayGeometry nested_array_geometry() {
    ArrayGeometry g;
    g.offsets = {0.0, 0.05, 0.10, 0.15, 0.30, 0.45};
    g.small_subarray = {0, 1, 2, 3};
    g.large_subarray = {0, 3, 4, 5};
    return g;
}

std::vector<Vec3> Scenario::mic_positions() const {
    if (geometry.offsets.empty()) throw DataError("scenario: empty array geometry");
    const auto [lo, hi] = std::minmax_element(geometry.offsets.begin(), geometry.offsets.end());
    const double mid = 0.5 * (*lo + *hi);
    std::vector<Vec3> pos;
    pos.reserve(geometry.offsets.size());
    for (double off : geometry.offsets) {
        pos.push_back({array_center.x + off - mid, array_center.y, array_center.z});
    }
    return pos;
}

Scenario sample_scenario(const ScenarioRanges& ranges, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };

    Scenario sc;
    sc.seed = seed;
    sc.snr_db = ranges.snr_db;
    sc.sample_rate = ranges.sample_rate;
    sc.duration_s = ranges.duration_s;
    sc.room_dims = {uniform(ranges.room_lo[0], ranges.room_hi[0]),
                    uniform(ranges.room_lo[1], ranges.room_hi[1]),
                    uniform(ranges.room_lo[2], ranges.room_hi[2])};
    sc.rt60 = uniform(ranges.rt60_lo, ranges.rt60_hi);
    sc.array_center = {sc.room_dims.x / 2.0, sc.room_dims.y / 2.0, 1.5};
    sc.geometry = nested_array_geometry();

    sc.source_azimuth_deg = uniform(0.0, 360.0);
    const double az = sc.source_azimuth_deg * kPi / 180.0;
    sc.source_pos = {sc.array_center.x + std::cos(az), sc.array_center.y + std::sin(az),
                     sc.array_center.z};

    const double margin = 0.5;
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        Vec3 p{uniform(margin, sc.room_dims.x - margin), uniform(margin, sc.room_dims.y - margin),
               uniform(margin, sc.room_dims.z - margin)};
        if (norm(p - sc.array_center) >= 1.0) {
            sc.noise_pos = p;
            placed = true;
        }
    }
    if (!placed) throw DataError("sample_scenario: could not place the noise source");

    auto inside = [&](const Vec3& p) {
        return p.x > 0.0 && p.x < sc.room_dims.x && p.y > 0.0 && p.y < sc.room_dims.y &&
               p.z > 0.0 && p.z < sc.room_dims.z;
    };
    if (!inside(sc.source_pos) || !inside(sc.noise_pos))
        throw DataError("sample_scenario: source placement outside the room");
    for (const Vec3& p : sc.mic_positions()) {
        if (!inside(p)) throw DataError("sample_scenario: microphone outside the room");
    }
    return sc;
}

RirSet image_source_rir_beta(const Vec3& room, const Vec3& source, std::span<const Vec3> mics,
                             double sample_rate, double beta, double t_max) {
    if (mics.empty()) throw DataError("image_source_rir: no microphones");
    if (beta < 0.0 || beta >= 1.0) throw DataError("image_source_rir: beta must be in [0, 1)");
    if (t_max <= 0.0) throw DataError("image_source_rir: nonpositive horizon");

    RirSet rirs;
    rirs.mics = mics.size();
    rirs.sample_rate = sample_rate;
    rirs.length = std::size_t(std::ceil(t_max * sample_rate)) + kSincHalf + 2;
    rirs.taps.assign(rirs.mics * rirs.length, 0.0);

    const double reach = kSpeedOfSound * t_max;
    const int nx = int(std::ceil(reach / (2.0 * room.x))) + 1;
    const int ny = int(std::ceil(reach / (2.0 * room.y))) + 1;
    const int nz = int(std::ceil(reach / (2.0 * room.z))) + 1;

    // reflection powers, beta^0 .. beta^max
    std::vector<double> bpow(std::size_t(2 * (nx + ny + nz) + 7), 0.0);
    bpow[0] = 1.0;
    for (std::size_t k = 1; k < bpow.size(); ++k) bpow[k] = bpow[k - 1] * beta;

    for (int px = 0; px <= 1; ++px) {
        for (int py = 0; py <= 1; ++py) {
            for (int pz = 0; pz <= 1; ++pz) {
                for (int rx = -nx; rx <= nx; ++rx) {
                    const double ix = (1 - 2 * px) * source.x + 2.0 * rx * room.x;
                    const int ex = std::abs(rx - px) + std::abs(rx);
                    for (int ry = -ny; ry <= ny; ++ry) {
                        const double iy = (1 - 2 * py) * source.y + 2.0 * ry * room.y;
                        const int exy = ex + std::abs(ry - py) + std::abs(ry);
                        for (int rz = -nz; rz <= nz; ++rz) {
                            const double iz = (1 - 2 * pz) * source.z + 2.0 * rz * room.z;
                            const int expo = exy + std::abs(rz - pz) + std::abs(rz);
                            const double refl = bpow[std::size_t(expo)];
                            if (refl == 0.0 && expo != 0) continue;
                            for (std::size_t m = 0; m < mics.size(); ++m) {
                                const double dx = ix - mics[m].x;
                                const double dy = iy - mics[m].y;
                                const double dz = iz - mics[m].z;
                                double d = std::sqrt(dx * dx + dy * dy + dz * dz);
                                if (d / kSpeedOfSound >= t_max) continue;
                                d = std::max(d, 1e-6);
                                const double tau = d / kSpeedOfSound * sample_rate;
                                const double amp = refl / (4.0 * kPi * d);
                                const int lo = std::max(0, int(std::ceil(tau)) - kSincHalf);
                                const int hi = std::min(int(rirs.length) - 1,
                                                        int(std::floor(tau)) + kSincHalf);
                                double* h = rirs.taps.data() + m * rirs.length;
                                for (int n = lo; n <= hi; ++n) {
                                    const double x = double(n) - tau;
                                    const double w =
                                        0.5 * (1.0 + std::cos(kPi * x / double(kSincHalf)));
                                    h[n] += amp * sinc(x) * w;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return rirs;
}

RirSet image_source_rir(const Scenario& scenario, const Vec3& source_pos) {
    const std::vector<Vec3> mics = scenario.mic_positions();
    double max_dist = 0.0;
    for (const Vec3& m : mics) max_dist = std::max(max_dist, norm(source_pos - m));

    double beta = 0.0;
    double tail = 0.01;
    if (scenario.rt60 > 0.0) {
        const Vec3& r = scenario.room_dims;
        const double volume = r.x * r.y * r.z;
        const double surface = 2.0 * (r.x * r.y + r.x * r.z + r.y * r.z);
        // Eyring: RT60 = 0.1611 V / (-S ln(1 - alpha))
        const double alpha = 1.0 - std::exp(-0.1611 * volume / (surface * scenario.rt60));
        beta = std::sqrt(1.0 - alpha);
        tail = scenario.rt60;
    }
    const double t_max = tail + max_dist / kSpeedOfSound + 0.02;
    return image_source_rir_beta(scenario.room_dims, source_pos, mics, scenario.sample_rate,
                                 beta, t_max);
}

MixResult mix_at_snr(const Waveform& speech, const Waveform& noise, const RirSet& speech_rirs,
                     const RirSet& noise_rirs, double snr_db, std::size_t reference_channel) {
    if (speech.channels != 1 || noise.channels != 1)
        throw DataError("mix_at_snr: sources must be mono");
    if (speech.sample_rate != noise.sample_rate)
        throw DataError("mix_at_snr: sample rate mismatch");
    if (speech_rirs.mics != noise_rirs.mics || speech_rirs.mics == 0)
        throw DataError("mix_at_snr: RIR channel mismatch");
    if (!std::isfinite(snr_db)) throw DataError("mix_at_snr: snr_db must be finite");
    const std::size_t mics = speech_rirs.mics;
    if (reference_channel >= mics) throw DataError("mix_at_snr: reference channel out of range");

    const std::size_t len = std::max(speech.samples + speech_rirs.length,
                                     noise.samples + noise_rirs.length) - 1;
    MixResult out;
    out.speech_image = Waveform(mics, len, speech.sample_rate);
    out.noise_image = Waveform(mics, len, speech.sample_rate);
    for (std::size_t m = 0; m < mics; ++m) {
        const std::vector<double> s = fft_convolve(speech.channel(0), speech_rirs.rir(m));
        const std::vector<double> n = fft_convolve(noise.channel(0), noise_rirs.rir(m));
        std::copy(s.begin(), s.end(), out.speech_image.channel(m).begin());
        std::copy(n.begin(), n.end(), out.noise_image.channel(m).begin());
    }

    auto power = [len](std::span<const double> x) {
        double acc = 0.0;
        for (double v : x) acc += v * v;
        return acc / double(len);
    };
    const double ps = power(out.speech_image.channel(reference_channel));
    const double pn = power(out.noise_image.channel(reference_channel));
    if (ps <= 0.0) throw DataError("mix_at_snr: silent speech source");
    if (pn <= 0.0) throw DataError("mix_at_snr: silent noise source");

    const double gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
    for (double& v : out.noise_image.data) v *= gain;

    out.mixture = Waveform(mics, len, speech.sample_rate);
    for (std::size_t i = 0; i < out.mixture.data.size(); ++i) {
        out.mixture.data[i] = out.speech_image.data[i] + out.noise_image.data[i];
    }
    return out;
}

Waveform synth_speech(std::uint64_t seed, std::size_t samples, double sample_rate) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };

    Waveform w(1, samples, sample_rate);
    std::span<double> x = w.channel(0);

    const double f0 = uniform(110.0, 200.0);
    const double vibrato_rate = uniform(0.5, 1.5);
    const double vibrato_phase = uniform(0.0, 2.0 * kPi);
    const int harmonics = std::max(4, int(4000.0 / f0));

    // fixed two-formant spectral envelope
    auto envelope = [](double hz) {
        const double r1 = (hz - 500.0) / 300.0;
        const double r2 = (hz - 1500.0) / 400.0;
        return 1.0 / (1.0 + r1 * r1) + 0.5 / (1.0 + r2 * r2) + 0.05;
    };
    const std::size_t nh = std::size_t(harmonics);
    std::vector<double> amp(nh);
    std::vector<double> phase(nh);
    for (std::size_t k = 0; k < nh; ++k) {
        amp[k] = envelope(f0 * double(k + 1)) / double(k + 1);
        phase[k] = uniform(0.0, 2.0 * kPi);
    }

    // syllabic on/off gating with raised-cosine ramps
    std::vector<double> gate(samples, 0.0);
    const std::size_t ramp = std::size_t(0.02 * sample_rate);
    std::size_t pos = std::size_t(uniform(0.0, 0.05) * sample_rate);
    while (pos < samples) {
        const std::size_t on = std::size_t(uniform(0.15, 0.35) * sample_rate);
        const std::size_t off = std::size_t(uniform(0.06, 0.20) * sample_rate);
        const double level = uniform(0.6, 1.0);
        for (std::size_t i = 0; i < on && pos + i < samples; ++i) {
            double g = 1.0;
            if (i < ramp) g = 0.5 * (1.0 - std::cos(kPi * double(i) / double(ramp)));
            if (on - i <= ramp) g = std::min(g, 0.5 * (1.0 - std::cos(kPi * double(on - i) / double(ramp))));
            gate[pos + i] = level * g;
        }
        pos += on + off;
    }

    double theta = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double t = double(i) / sample_rate;
        const double f = f0 * (1.0 + 0.08 * std::sin(2.0 * kPi * vibrato_rate * t + vibrato_phase));
        theta += 2.0 * kPi * f / sample_rate;
        double v = 0.0;
        for (std::size_t k = 0; k < nh; ++k) {
            v += amp[k] * std::sin(double(k + 1) * theta + phase[k]);
        }
        x[i] = gate[i] * v;
    }

    double rms = 0.0;
    for (double v : x) rms += v * v;
    rms = std::sqrt(rms / double(samples));
    if (rms > 0.0) {
        for (double& v : x) v *= 0.1 / rms;
    }
    return w;
}

Waveform synth_noise(std::uint64_t seed, std::size_t samples, double sample_rate) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Waveform w(1, samples, sample_rate);
    std::span<double> x = w.channel(0);
    const double rho = 0.85;  // one-pole lowpass colouring
    double state = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        state = rho * state + (1.0 - rho) * gauss(rng);
        x[i] = state;
    }
    double rms = 0.0;
    for (double v : x) rms += v * v;
    rms = std::sqrt(rms / double(samples));
    if (rms > 0.0) {
        for (double& v : x) v *= 0.1 / rms;
    }
    return w;
}

namespace {

// round-trip precision: a re-read scenario must reproduce bit-identical audio
std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Vec3 kv_to_vec3(const std::string& value, const std::string& key) {
    const std::vector<double> v = kv_to_doubles(value, key);
    if (v.size() != 3) throw DataError("key '" + key + "' must hold three numbers");
    return {v[0], v[1], v[2]};
}

const std::string& require(const std::map<std::string, std::string>& kv,
                           const std::string& key, const std::string& origin) {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError(origin + ": missing key '" + key + "'");
    return it->second;
}

}  // namespace

void write_scenario_file(const std::string& path, const Scenario& sc) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << "room_dims = " << fmt_num(sc.room_dims.x) << ", " << fmt_num(sc.room_dims.y) << ", "
       << fmt_num(sc.room_dims.z) << "\n";
    os << "rt60 = " << fmt_num(sc.rt60) << "\n";
    os << "snr_db = " << fmt_num(sc.snr_db) << "\n";
    os << "seed = " << sc.seed << "\n";
    os << "source_azimuth_deg = " << fmt_num(sc.source_azimuth_deg) << "\n";
    os << "sample_rate = " << fmt_num(sc.sample_rate) << "\n";
    os << "duration_s = " << fmt_num(sc.duration_s) << "\n";
    os << "array_center = " << fmt_num(sc.array_center.x) << ", " << fmt_num(sc.array_center.y)
       << ", " << fmt_num(sc.array_center.z) << "\n";
    os << "noise_pos = " << fmt_num(sc.noise_pos.x) << ", " << fmt_num(sc.noise_pos.y) << ", "
       << fmt_num(sc.noise_pos.z) << "\n";
    if (!os) throw DataError("failed writing scenario file: " + path);
}

Scenario read_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scenario file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::map<std::string, std::string> kv = parse_kv_text(text, path);

    static const char* known[] = {"room_dims",  "rt60",        "snr_db",
                                  "seed",       "source_azimuth_deg", "sample_rate",
                                  "duration_s", "array_center", "noise_pos"};
    for (const auto& [key, value] : kv) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw DataError(path + ": unknown scenario key '" + key + "'");
    }

    Scenario sc;
    sc.room_dims = kv_to_vec3(require(kv, "room_dims", path), "room_dims");
    sc.rt60 = kv_to_double(require(kv, "rt60", path), "rt60");
    sc.snr_db = kv_to_double(require(kv, "snr_db", path), "snr_db");
    sc.seed = kv_to_u64(require(kv, "seed", path), "seed");
    sc.source_azimuth_deg =
        kv_to_double(require(kv, "source_azimuth_deg", path), "source_azimuth_deg");
    sc.sample_rate = kv_to_double(require(kv, "sample_rate", path), "sample_rate");
    sc.duration_s = kv_to_double(require(kv, "duration_s", path), "duration_s");
    sc.array_center = kv_to_vec3(require(kv, "array_center", path), "array_center");
    sc.noise_pos = kv_to_vec3(require(kv, "noise_pos", path), "noise_pos");
    sc.geometry = nested_array_geometry();

    const double az = sc.source_azimuth_deg * kPi / 180.0;
    sc.source_pos = {sc.array_center.x + std::cos(az), sc.array_center.y + std::sin(az),
                     sc.array_center.z};

    if (sc.sample_rate <= 0.0) throw DataError(path + ": sample_rate must be positive");
    auto inside = [&](const Vec3& p) {
        return p.x > 0.0 && p.x < sc.room_dims.x && p.y > 0.0 && p.y < sc.room_dims.y &&
               p.z > 0.0 && p.z < sc.room_dims.z;
    };
    if (!inside(sc.source_pos) || !inside(sc.noise_pos))
        throw DataError(path + ": positions must lie strictly inside the room");
    return sc;
}

}  // namespace maskbeam
