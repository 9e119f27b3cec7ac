// mask.cpp

#include "maskbeam/mask.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "maskbeam/kernels.hpp"

namespace maskbeam {

namespace {

void require_shape_match(const MultichannelSpectrogram& y, std::size_t frames,
                         std::size_t bins, std::size_t channels, const char* what) {
    if (y.frames != frames || y.bins != bins || y.channels != channels)
        throw DataError(std::string(what) + ": shape mismatch");
}

}  // namespace

MultichannelSpectrogram apply_complex_mask(const MultichannelSpectrogram& y,
                                           const ComplexMask& H) {
    require_shape_match(y, H.frames, H.bins, H.channels, "apply_complex_mask");
    MultichannelSpectrogram xi = y;
    kernels::cmul(H.values.data(), y.data.data(), xi.data.data(), y.data.size());
    return xi;
}

RealMask energetic_mask(const MultichannelSpectrogram& y, const MultichannelSpectrogram& xi) {
    require_shape_match(y, xi.frames, xi.bins, xi.channels, "energetic_mask");
    RealMask gamma(y.frames, y.bins, y.channels);
    kernels::energetic_mask(y.data.data(), xi.data.data(), gamma.values.data(),
                            y.data.size());
    return gamma;
}

RealMask median_pool(const RealMask& gammas) {
    if (gammas.channels == 0) throw DataError("median_pool: no channels");
    RealMask alpha(gammas.frames, gammas.bins, 1);
    const std::size_t m = gammas.channels;
    std::vector<double> buf(m);
    for (std::size_t t = 0; t < gammas.frames; ++t) {
        for (std::size_t f = 0; f < gammas.bins; ++f) {
            const double* src = &gammas.values[(t * gammas.bins + f) * m];
            std::copy(src, src + m, buf.begin());
            std::sort(buf.begin(), buf.end());
            alpha.at(t, f) = (m % 2 == 1) ? buf[m / 2]
                                          : 0.5 * (buf[m / 2 - 1] + buf[m / 2]);
        }
    }
    return alpha;
}

RealMask complement_mask(const RealMask& alpha_s) {
    RealMask alpha_n = alpha_s;
    for (double& v : alpha_n.values) v = 1.0 - v;
    return alpha_n;
}

RealMask oracle_mask(const MultichannelSpectrogram& s, const MultichannelSpectrogram& n) {
    require_shape_match(s, n.frames, n.bins, n.channels, "oracle_mask");
    RealMask gamma(s.frames, s.bins, s.channels);
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        const double ps = std::norm(s.data[i]);
        const double pn = std::norm(n.data[i]);
        const double den = ps + pn;
        gamma.values[i] = den > 0.0 ? ps / den : 0.0;
    }
    return gamma;
}

RealMask corrupt_mask(const RealMask& gamma, double noise_level, std::uint64_t seed) {
    if (noise_level < 0.0) throw DataError("corrupt_mask: negative noise level");
    constexpr double kClip = 1e-6;
    RealMask out = gamma;
    if (noise_level == 0.0) {
        for (double& v : out.values) v = std::clamp(v, kClip, 1.0 - kClip);
        return out;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise_level);
    for (double& v : out.values) {
        const double p = std::clamp(v, kClip, 1.0 - kClip);
        const double z = std::log(p / (1.0 - p)) + gauss(rng);
        v = 1.0 / (1.0 + std::exp(-z));
    }
    return out;
}

namespace {

constexpr char kMagic[4] = {'M', 'C', 'M', 'F'};

void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(char(v & 0xFF));
    out.push_back(char((v >> 8) & 0xFF));
    out.push_back(char((v >> 16) & 0xFF));
    out.push_back(char((v >> 24) & 0xFF));
}

std::uint32_t get_u32le(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

void put_f32le(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(f));
    put_u32le(out, bits);
}

float get_f32le(const unsigned char* p) {
    const std::uint32_t bits = get_u32le(p);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

void write_mcmf(const std::string& path, std::uint8_t dtype, std::size_t frames,
                std::size_t bins, std::size_t channels,
                const std::function<void(std::string&)>& payload) {
    std::string out;
    out.append(kMagic, 4);
    out.push_back(char(1));      // version
    out.push_back(char(dtype));  // dtype
    out.push_back(char(0));
    out.push_back(char(0));
    put_u32le(out, std::uint32_t(frames));
    put_u32le(out, std::uint32_t(bins));
    put_u32le(out, std::uint32_t(channels));
    payload(out);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    os.write(out.data(), std::streamsize(out.size()));
    if (!os) throw DataError("failed writing mask file: " + path);
}

}  // namespace

void write_mask_file(const std::string& path, const RealMask& mask) {
    write_mcmf(path, 0, mask.frames, mask.bins, mask.channels, [&](std::string& out) {
        for (double v : mask.values) put_f32le(out, float(v));
    });
}

void write_mask_file(const std::string& path, const ComplexMask& mask) {
    write_mcmf(path, 1, mask.frames, mask.bins, mask.channels, [&](std::string& out) {
        for (const cdouble& v : mask.values) {
            put_f32le(out, float(v.real()));
            put_f32le(out, float(v.imag()));
        }
    });
}

AnyMask read_mask_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open mask file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data());

    if (buf.size() < 20 || std::memcmp(p, kMagic, 4) != 0)
        throw DataError("not an MCMF file: " + path);
    if (p[4] != 1) throw DataError("unsupported MCMF version " + std::to_string(p[4]));
    const std::uint8_t dtype = p[5];
    if (dtype > 1) throw DataError("unsupported MCMF dtype " + std::to_string(dtype));
    if (p[6] != 0 || p[7] != 0) throw DataError("nonzero reserved bytes in MCMF header");

    const std::uint64_t frames = get_u32le(p + 8);
    const std::uint64_t bins = get_u32le(p + 12);
    const std::uint64_t channels = get_u32le(p + 16);
    const std::uint64_t count = frames * bins * channels;
    const std::uint64_t elem_bytes = dtype == 1 ? 8 : 4;
    if (frames == 0 || bins == 0 || channels == 0)
        throw DataError("MCMF header declares an empty mask");
    if (count > (std::uint64_t(1) << 32) || count * elem_bytes > (std::uint64_t(1) << 34))
        throw DataError("MCMF dimension overflow");
    if (20 + count * elem_bytes > buf.size()) throw DataError("truncated payload");

    if (dtype == 0) {
        RealMask mask(frames, bins, channels);
        for (std::uint64_t i = 0; i < count; ++i) {
            const double v = double(get_f32le(p + 20 + 4 * i));
            if (!(v >= 0.0 && v <= 1.0))
                throw DataError("real mask value outside [0, 1] in " + path);
            mask.values[i] = v;
        }
        return mask;
    }
    ComplexMask mask(frames, bins, channels);
    for (std::uint64_t i = 0; i < count; ++i) {
        mask.values[i] = cdouble(double(get_f32le(p + 20 + 8 * i)),
                                 double(get_f32le(p + 20 + 8 * i + 4)));
    }
    return mask;
}

}  // namespace maskbeam
