#include "sertest/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sertest/core.hpp"

namespace sertest::audio {

double rms(std::span<const double> samples) {
    if (samples.empty()) return 0.0;
    double sum = 0.0;
    for (double s : samples) sum += s * s;
    return std::sqrt(sum / static_cast<double>(samples.size()));
}

namespace {

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open wave file: " + path.string());

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0)
        throw ParseError(path.string() + ": not a RIFF file");
    read_u32(in);  // riff size
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0)
        throw ParseError(path.string() + ": not a WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    AudioBuffer buffer;

    while (in.read(tag, 4)) {
        std::uint32_t chunk_size = read_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            std::uint32_t consumed = 16;
            if (format == kFormatExtensible && chunk_size >= 26) {
                read_u16(in);                          // extension size
                read_u16(in);                          // valid bits
                read_u32(in);                          // channel mask
                format = read_u16(in);                 // first two bytes of the sub-format GUID
                in.ignore(14);                         // rest of the GUID
                consumed = 40 > chunk_size ? chunk_size : 40;
            }
            if (chunk_size > consumed) in.ignore(chunk_size - consumed);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw ParseError(path.string() + ": data chunk before fmt chunk");
            if (channels == 0 || rate == 0)
                throw ParseError(path.string() + ": invalid fmt chunk");
            if (!((format == kFormatPcm && bits == 16) || (format == kFormatFloat && bits == 32)))
                throw ParseError(path.string() +
                                 ": unsupported encoding (need 16-bit PCM or 32-bit float)");
            const std::uint32_t bytes_per_sample = bits / 8;
            const std::uint32_t frames = chunk_size / (bytes_per_sample * channels);
            std::vector<char> raw(chunk_size);
            in.read(raw.data(), chunk_size);
            if (!in) throw ParseError(path.string() + ": truncated data chunk");
            buffer.rate_hz = static_cast<int>(rate);
            buffer.samples.resize(frames);
            const char* p = raw.data();
            for (std::uint32_t f = 0; f < frames; ++f) {
                double acc = 0.0;
                for (std::uint16_t c = 0; c < channels; ++c) {
                    if (format == kFormatPcm) {
                        std::int16_t v;
                        std::memcpy(&v, p, 2);
                        acc += static_cast<double>(v) / 32768.0;
                    } else {
                        float v;
                        std::memcpy(&v, p, 4);
                        acc += static_cast<double>(v);
                    }
                    p += bytes_per_sample;
                }
                buffer.samples[f] = acc / channels;
            }
        } else {
            in.ignore(chunk_size);
        }
        if (chunk_size % 2 == 1) in.ignore(1);  // chunks are word aligned
    }
    if (buffer.samples.empty() && !have_fmt)
        throw ParseError(path.string() + ": no fmt/data chunks found");
    return buffer;
}

void write_wav(const AudioBuffer& buffer, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write wave file: " + path.string());

    const std::uint32_t data_size = static_cast<std::uint32_t>(buffer.samples.size() * 4);
    out.write("RIFF", 4);
    write_u32(out, 4 + 8 + 16 + 8 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, kFormatFloat);
    write_u16(out, 1);  // mono
    write_u32(out, static_cast<std::uint32_t>(buffer.rate_hz));
    write_u32(out, static_cast<std::uint32_t>(buffer.rate_hz) * 4);
    write_u16(out, 4);
    write_u16(out, 32);
    out.write("data", 4);
    write_u32(out, data_size);
    for (double s : buffer.samples) {
        float v = static_cast<float>(s);
        char b[4];
        std::memcpy(b, &v, 4);
        out.write(b, 4);
    }
}

}  // namespace sertest::audio
