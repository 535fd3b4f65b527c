#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sertest/audio.hpp"
#include "sertest/core.hpp"

namespace sertest::perturb {

using audio::AudioBuffer;

/// Linear interpolation to a new rate; output length = round(n * target/source).
AudioBuffer resample_linear(const AudioBuffer& signal, int target_rate_hz);

enum class Placement { full, random_offset };

/// Adds noise at the requested RMS signal-to-noise ratio. With full
/// placement the noise is looped or truncated to the signal length; with
/// random_offset the noise is dropped once at a random position fully
/// inside the signal. The noise gain is computed against the whole-signal
/// RMS. Output length equals the input length.
AudioBuffer mix_at_snr(const AudioBuffer& signal, const AudioBuffer& noise, double snr_db,
                       Placement placement, std::uint64_t seed);

enum class NoiseKind { white, pink, tone };

/// white: unit-variance Gaussian; pink: 1/f shaping via a cascade of
/// first-order shelving sections (-3 dB/octave); tone: unit-amplitude
/// sinusoid at tone_freq_hz.
AudioBuffer synthesize_noise(NoiseKind kind, std::size_t length, int rate_hz, double tone_freq_hz,
                             std::uint64_t seed);

/// Sums count_min..count_max speech samples drawn without replacement from
/// the pool, looped/truncated to the requested length, RMS-normalized to 1.
AudioBuffer babble(const std::vector<AudioBuffer>& speech_pool, int count_min, int count_max,
                   std::size_t length, int rate_hz, std::uint64_t seed);

enum class EditMode { append_zeros, prepend_zeros, crop_start, crop_end };

AudioBuffer edit_signal(const AudioBuffer& signal, EditMode mode, std::size_t n);

/// Hard-clips the loudest fraction p of samples at the (1-p) quantile of
/// the magnitudes.
AudioBuffer clip_fraction(const AudioBuffer& signal, double p);

/// Scales every sample by 10^(db/20); no clipping is applied, so values
/// may leave [-1, 1].
AudioBuffer apply_gain_db(const AudioBuffer& signal, double gain_db);

enum class FilterKind { lowpass, highpass };

/// First-order Butterworth via the bilinear transform; -3 dB at cutoff_hz.
AudioBuffer first_order_filter(const AudioBuffer& signal, FilterKind kind, double cutoff_hz);

/// Linear spectral emphasis/attenuation of slope_db_per_octave, pivoting
/// around 1 kHz. Output RMS is restored to the input RMS unless that would
/// push the peak above full scale, in which case the peak is normalized
/// to 1.
AudioBuffer spectral_tilt(const AudioBuffer& signal, double slope_db_per_octave);

/// Full linear convolution truncated to the input length, RMS-normalized
/// back to the input level. Rates must match.
AudioBuffer convolve_ir(const AudioBuffer& signal, const AudioBuffer& impulse_response);

struct CompressorParams {
    double threshold_dbfs = -20.0;  // RMS level
    double ratio = 4.0;
    double attack_ms = 5.0;
    double release_ms = 50.0;
};

/// Feed-forward dynamic range compressor with an RMS envelope detector.
AudioBuffer compressor(const AudioBuffer& signal, const CompressorParams& params = {});

/// Low-quality telephone chain: compressor, narrow-band codec stage, plus
/// high-pass filtered pink noise at 30 dB SNR. The codec stage shells out
/// to codec_command ("{in}" / "{out}" placeholders) when non-empty and
/// falls back to a built-in 8 kHz band-limiting simulation otherwise.
AudioBuffer phone_degradation(const AudioBuffer& signal, const std::string& codec_command,
                              std::uint64_t seed);

/// A named perturbation recipe; params are validated per kind when applied.
struct PerturbationSpec {
    std::string name;      // registry identifier, e.g. "small-changes-gain"
    std::string kind;      // engine dispatch key
    nlohmann::json params = nlohmann::json::object();
    std::uint64_t seed = 0;
};

/// Stable content hash of kind + params + seed; changes iff any parameter
/// or the seed changes.
std::string fingerprint(const PerturbationSpec& spec);

const std::vector<std::string>& perturbation_kinds();

/// Named pools of audio assets (babble speech, noise events, impulse
/// responses) resolved by the engine at application time.
class AssetStore {
public:
    void add(const std::string& name, std::vector<AudioBuffer> buffers) {
        pools_[name] = std::move(buffers);
    }
    bool has(const std::string& name) const { return pools_.count(name) > 0; }
    const std::vector<AudioBuffer>& pool(const std::string& name) const;

private:
    std::map<std::string, std::vector<AudioBuffer>> pools_;
};

/// Applies a recipe to one buffer. Per-sample randomness (parameter
/// choices, offsets) is derived from (spec.seed, sample_id) so a fixed
/// seed reproduces the exact same rendering for every file.
AudioBuffer apply_perturbation(const PerturbationSpec& spec, const AudioBuffer& input,
                               const std::string& sample_id, const AssetStore& assets);

}  // namespace sertest::perturb
