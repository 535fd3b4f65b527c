#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace sertest::audio {

/// Mono sample sequence, nominal full scale [-1, 1].
struct AudioBuffer {
    std::vector<double> samples;
    int rate_hz = 16000;

    std::size_t size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / rate_hz; }
};

double rms(std::span<const double> samples);

/// Reads a PCM wave file (16-bit integer or 32-bit float). Multichannel
/// input is downmixed by averaging.
AudioBuffer read_wav(const std::filesystem::path& path);

/// Writes 32-bit float PCM; samples are stored as-is, values outside
/// [-1, 1] are not clipped.
void write_wav(const AudioBuffer& buffer, const std::filesystem::path& path);

}  // namespace sertest::audio
