// wav.cpp
// RIFF/WAVE I/O: 16-bit PCM and 32-bit IEEE float, any channel count.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "maskbeam/signal.hpp"

namespace maskbeam {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}
std::uint16_t read_u16(const unsigned char* p) {
    return std::uint16_t(p[0] | p[1] << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(char(v & 0xFF));
    out.push_back(char((v >> 8) & 0xFF));
    out.push_back(char((v >> 16) & 0xFF));
    out.push_back(char((v >> 24) & 0xFF));
}
void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(char(v & 0xFF));
    out.push_back(char((v >> 8) & 0xFF));
}

float load_f32(const unsigned char* p) {
    std::uint32_t bits = read_u32(p);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

}  // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open WAV file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data());
    const std::size_t size = buf.size();

    if (size < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        throw DataError("malformed WAV header: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t block_align = 0;
    bool have_fmt = false;
    const unsigned char* data_ptr = nullptr;
    std::uint32_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= size) {
        const unsigned char* id = p + pos;
        std::uint32_t chunk_size = read_u32(p + pos + 4);
        pos += 8;
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (pos + chunk_size > size || chunk_size < 16)
                throw DataError("malformed WAV fmt chunk");
            format = read_u16(p + pos);
            channels = read_u16(p + pos + 2);
            sample_rate = read_u32(p + pos + 4);
            block_align = read_u16(p + pos + 12);
            bits = read_u16(p + pos + 14);
            if (format == kFormatExtensible) {
                if (chunk_size < 40) throw DataError("malformed WAV extensible fmt chunk");
                format = read_u16(p + pos + 24);  // first bytes of the subformat GUID
            }
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            if (pos + chunk_size > size) throw DataError("unexpected end of WAV data");
            data_ptr = p + pos;
            data_size = chunk_size;
        }
        pos += chunk_size + (chunk_size & 1);
    }

    if (!have_fmt || data_ptr == nullptr) throw DataError("malformed WAV file: missing chunks");
    if (channels == 0 || sample_rate == 0 || block_align == 0)
        throw DataError("malformed WAV fmt chunk");
    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !f32)
        throw DataError("unsupported WAV codec (format " + std::to_string(format) + ", " +
                        std::to_string(bits) + " bit)");
    if (block_align != channels * bits / 8) throw DataError("malformed WAV fmt chunk");
    if (data_size % block_align != 0) throw DataError("unexpected end of WAV data");

    const std::size_t n = data_size / block_align;
    Waveform w(channels, n, double(sample_rate));
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* frame = data_ptr + i * block_align;
        for (std::size_t m = 0; m < channels; ++m) {
            double v;
            if (pcm16) {
                v = double(std::int16_t(read_u16(frame + 2 * m))) / 32768.0;
            } else {
                v = double(load_f32(frame + 4 * m));
            }
            w.channel(m)[i] = v;
        }
    }
    return w;
}

void write_wav(const std::string& path, const Waveform& w, WavFormat format) {
    if (w.channels == 0 || w.sample_rate <= 0.0) throw DataError("write_wav: empty waveform");
    const bool f32 = format.codec == WavFormat::Codec::float32;
    const std::uint16_t bits = f32 ? 32 : 16;
    const std::uint16_t block_align = std::uint16_t(w.channels * bits / 8);
    const std::uint32_t rate = std::uint32_t(std::lround(w.sample_rate));
    const std::uint32_t data_size = std::uint32_t(w.samples * block_align);

    std::string out;
    out.reserve(data_size + 64);
    out += "RIFF";
    put_u32(out, 4 + 24 + (f32 ? 12 : 0) + 8 + data_size);
    out += "WAVE";
    out += "fmt ";
    put_u32(out, 16);
    put_u16(out, f32 ? kFormatFloat : kFormatPcm);
    put_u16(out, std::uint16_t(w.channels));
    put_u32(out, rate);
    put_u32(out, rate * block_align);
    put_u16(out, block_align);
    put_u16(out, bits);
    if (f32) {
        out += "fact";
        put_u32(out, 4);
        put_u32(out, std::uint32_t(w.samples));
    }
    out += "data";
    put_u32(out, data_size);

    for (std::size_t i = 0; i < w.samples; ++i) {
        for (std::size_t m = 0; m < w.channels; ++m) {
            const double v = w.channel(m)[i];
            if (f32) {
                const float f = float(v);
                std::uint32_t bits32;
                std::memcpy(&bits32, &f, sizeof(f));
                put_u32(out, bits32);
            } else {
                double scaled = std::round(v * 32768.0);
                scaled = std::min(32767.0, std::max(-32768.0, scaled));
                put_u16(out, std::uint16_t(std::int16_t(scaled)));
            }
        }
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    os.write(out.data(), std::streamsize(out.size()));
    if (!os) throw DataError("failed writing WAV file: " + path);
}

}  // namespace maskbeam
