#include "sertest/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sertest/random.hpp"

namespace sertest::perturb {

namespace {

constexpr double kPi = std::numbers::pi;

double db_to_gain(double db) { return std::pow(10.0, db / 20.0); }

/// One first-order section y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1].
struct FirstOrder {
    double b0 = 1.0, b1 = 0.0, a1 = 0.0;

    void process(std::vector<double>& xs) const {
        double x1 = 0.0, y1 = 0.0;
        for (double& x : xs) {
            const double y = b0 * x + b1 * x1 - a1 * y1;
            x1 = x;
            y1 = y;
            x = y;
        }
    }

    std::complex<double> response(double freq_hz, double rate_hz) const {
        const std::complex<double> z1 = std::polar(1.0, -2.0 * kPi * freq_hz / rate_hz);
        return (b0 + b1 * z1) / (1.0 + a1 * z1);
    }
};

/// Shelving section with unity DC gain: zero at fz, pole at fp (bilinear
/// transform with per-corner prewarping). fp < fz attenuates highs by
/// 20*log10(fz/fp) dB; fp > fz boosts them.
FirstOrder shelf_section(double fp_hz, double fz_hz, double rate_hz) {
    const double wp = std::tan(kPi * fp_hz / rate_hz);
    const double wz = std::tan(kPi * fz_hz / rate_hz);
    const double g = wp / wz;
    FirstOrder s;
    s.b0 = g * (wz + 1.0) / (wp + 1.0);
    s.b1 = g * (wz - 1.0) / (wp + 1.0);
    s.a1 = (wp - 1.0) / (wp + 1.0);
    return s;
}

FirstOrder butterworth_first_order(FilterKind kind, double cutoff_hz, double rate_hz) {
    const double k = std::tan(kPi * cutoff_hz / rate_hz);
    FirstOrder s;
    if (kind == FilterKind::lowpass) {
        s.b0 = k / (k + 1.0);
        s.b1 = s.b0;
    } else {
        s.b0 = 1.0 / (k + 1.0);
        s.b1 = -s.b0;
    }
    s.a1 = (k - 1.0) / (k + 1.0);
    return s;
}

/// RBJ biquad, direct form I.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;

    static Biquad design(FilterKind kind, double cutoff_hz, double rate_hz, double q) {
        const double w0 = 2.0 * kPi * cutoff_hz / rate_hz;
        const double alpha = std::sin(w0) / (2.0 * q);
        const double c = std::cos(w0);
        const double a0 = 1.0 + alpha;
        Biquad s;
        if (kind == FilterKind::lowpass) {
            s.b0 = (1.0 - c) / 2.0 / a0;
            s.b1 = (1.0 - c) / a0;
            s.b2 = s.b0;
        } else {
            s.b0 = (1.0 + c) / 2.0 / a0;
            s.b1 = -(1.0 + c) / a0;
            s.b2 = s.b0;
        }
        s.a1 = -2.0 * c / a0;
        s.a2 = (1.0 - alpha) / a0;
        return s;
    }

    void process(std::vector<double>& xs) const {
        double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
        for (double& x : xs) {
            const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            x = y;
        }
    }
};

// Butterworth pole quality factors for cascaded biquads.
void butterworth4(std::vector<Biquad>& out, FilterKind kind, double cutoff_hz, double rate_hz) {
    out.push_back(Biquad::design(kind, cutoff_hz, rate_hz, 0.54119610));
    out.push_back(Biquad::design(kind, cutoff_hz, rate_hz, 1.30656296));
}

void fft(std::vector<std::complex<double>>& a, bool invert) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = 2.0 * kPi / static_cast<double>(len) * (invert ? -1.0 : 1.0);
        const std::complex<double> step(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= step;
            }
        }
    }
    if (invert)
        for (auto& x : a) x /= static_cast<double>(n);
}

std::vector<double> convolve_full(std::span<const double> x, std::span<const double> h) {
    const std::size_t out_len = x.size() + h.size() - 1;
    std::vector<double> out(out_len, 0.0);
    if (h.size() <= 128) {
        for (std::size_t n = 0; n < out_len; ++n) {
            double acc = 0.0;
            const std::size_t k_lo = n >= x.size() ? n - x.size() + 1 : 0;
            const std::size_t k_hi = std::min(n, h.size() - 1);
            for (std::size_t k = k_lo; k <= k_hi; ++k) acc += h[k] * x[n - k];
            out[n] = acc;
        }
        return out;
    }
    std::size_t size = 1;
    while (size < out_len) size <<= 1;
    std::vector<std::complex<double>> fx(size), fh(size);
    for (std::size_t i = 0; i < x.size(); ++i) fx[i] = x[i];
    for (std::size_t i = 0; i < h.size(); ++i) fh[i] = h[i];
    fft(fx, false);
    fft(fh, false);
    for (std::size_t i = 0; i < size; ++i) fx[i] *= fh[i];
    fft(fx, true);
    for (std::size_t i = 0; i < out_len; ++i) out[i] = fx[i].real();
    return out;
}

AudioBuffer loop_to_length(const AudioBuffer& noise, std::size_t length) {
    AudioBuffer out;
    out.rate_hz = noise.rate_hz;
    out.samples.resize(length);
    for (std::size_t i = 0; i < length; ++i) out.samples[i] = noise.samples[i % noise.size()];
    return out;
}

}  // namespace

AudioBuffer resample_linear(const AudioBuffer& signal, int target_rate_hz) {
    if (target_rate_hz <= 0) throw std::invalid_argument("target rate must be > 0");
    if (target_rate_hz == signal.rate_hz) return signal;
    AudioBuffer out;
    out.rate_hz = target_rate_hz;
    const std::size_t n = signal.size();
    if (n == 0) return out;
    const std::size_t out_len = static_cast<std::size_t>(std::llround(
        static_cast<double>(n) * target_rate_hz / static_cast<double>(signal.rate_hz)));
    out.samples.resize(out_len);
    const double step = static_cast<double>(signal.rate_hz) / static_cast<double>(target_rate_hz);
    for (std::size_t i = 0; i < out_len; ++i) {
        const double pos = static_cast<double>(i) * step;
        std::size_t i0 = static_cast<std::size_t>(pos);
        if (i0 >= n - 1) {
            out.samples[i] = signal.samples[n - 1];
            continue;
        }
        const double frac = pos - static_cast<double>(i0);
        out.samples[i] = signal.samples[i0] + frac * (signal.samples[i0 + 1] - signal.samples[i0]);
    }
    return out;
}

AudioBuffer mix_at_snr(const AudioBuffer& signal, const AudioBuffer& noise, double snr_db,
                       Placement placement, std::uint64_t seed) {
    if (noise.samples.empty()) throw std::invalid_argument("empty noise buffer");
    const double signal_rms = audio::rms(signal.samples);
    if (signal_rms <= 0.0) throw std::invalid_argument("silent signal: SNR undefined");

    AudioBuffer aligned =
        noise.rate_hz == signal.rate_hz ? noise : resample_linear(noise, signal.rate_hz);

    AudioBuffer out = signal;
    if (placement == Placement::full) {
        const AudioBuffer segment = loop_to_length(aligned, signal.size());
        const double segment_rms = audio::rms(segment.samples);
        if (segment_rms <= 0.0) throw std::invalid_argument("silent noise: SNR undefined");
        const double gain = signal_rms / (segment_rms * db_to_gain(snr_db));
        for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += gain * segment.samples[i];
        return out;
    }

    // Single event at a random position fully inside the signal.
    std::size_t event_len = std::min(aligned.size(), signal.size());
    std::span<const double> event(aligned.samples.data(), event_len);
    const double event_rms = audio::rms(event);
    if (event_rms <= 0.0) throw std::invalid_argument("silent noise: SNR undefined");
    const double gain = signal_rms / (event_rms * db_to_gain(snr_db));
    Rng rng(seed);
    const std::size_t start =
        static_cast<std::size_t>(rng.uniform_int(signal.size() - event_len + 1));
    for (std::size_t i = 0; i < event_len; ++i) out.samples[start + i] += gain * event[i];
    return out;
}

AudioBuffer synthesize_noise(NoiseKind kind, std::size_t length, int rate_hz, double tone_freq_hz,
                             std::uint64_t seed) {
    AudioBuffer out;
    out.rate_hz = rate_hz;
    out.samples.resize(length);
    switch (kind) {
        case NoiseKind::white: {
            Rng rng(seed);
            for (auto& s : out.samples) s = rng.normal();
            break;
        }
        case NoiseKind::pink: {
            Rng rng(seed);
            for (auto& s : out.samples) s = rng.normal();
            // One shelving pair per octave yields -3 dB/octave on average.
            const double f_lo = 30.0;
            const double f_hi = rate_hz / 2.0 * 0.9;
            std::vector<FirstOrder> sections;
            for (double fp = f_lo; fp * std::sqrt(2.0) < f_hi; fp *= 2.0)
                sections.push_back(shelf_section(fp, fp * std::sqrt(2.0), rate_hz));
            for (const auto& s : sections) s.process(out.samples);
            break;
        }
        case NoiseKind::tone: {
            if (tone_freq_hz <= 0.0 || tone_freq_hz >= rate_hz / 2.0)
                throw std::invalid_argument("tone frequency outside (0, rate/2)");
            const double w = 2.0 * kPi * tone_freq_hz / rate_hz;
            for (std::size_t i = 0; i < length; ++i)
                out.samples[i] = std::sin(w * static_cast<double>(i));
            break;
        }
    }
    return out;
}

AudioBuffer babble(const std::vector<AudioBuffer>& speech_pool, int count_min, int count_max,
                   std::size_t length, int rate_hz, std::uint64_t seed) {
    if (count_min < 1 || count_max < count_min)
        throw std::invalid_argument("invalid babble count range");
    if (speech_pool.size() < static_cast<std::size_t>(count_max))
        throw std::invalid_argument("babble pool needs at least " + std::to_string(count_max) +
                                    " samples");
    Rng rng(seed);
    const int count = count_min + static_cast<int>(rng.uniform_int(count_max - count_min + 1));
    const auto chosen = rng.sample_indices(speech_pool.size(), count);

    AudioBuffer out;
    out.rate_hz = rate_hz;
    out.samples.assign(length, 0.0);
    for (auto idx : chosen) {
        AudioBuffer voice = speech_pool[idx].rate_hz == rate_hz
                                ? speech_pool[idx]
                                : resample_linear(speech_pool[idx], rate_hz);
        if (voice.samples.empty()) continue;
        for (std::size_t i = 0; i < length; ++i)
            out.samples[i] += voice.samples[i % voice.size()];
    }
    const double level = audio::rms(out.samples);
    if (level <= 0.0) throw std::invalid_argument("babble pool produced silence");
    for (auto& s : out.samples) s /= level;
    return out;
}

AudioBuffer edit_signal(const AudioBuffer& signal, EditMode mode, std::size_t n) {
    AudioBuffer out;
    out.rate_hz = signal.rate_hz;
    switch (mode) {
        case EditMode::append_zeros:
            out.samples = signal.samples;
            out.samples.resize(signal.size() + n, 0.0);
            break;
        case EditMode::prepend_zeros:
            out.samples.assign(n, 0.0);
            out.samples.insert(out.samples.end(), signal.samples.begin(), signal.samples.end());
            break;
        case EditMode::crop_start:
            if (n >= signal.size())
                throw std::invalid_argument("crop of " + std::to_string(n) +
                                            " samples exceeds signal length");
            out.samples.assign(signal.samples.begin() + static_cast<std::ptrdiff_t>(n),
                               signal.samples.end());
            break;
        case EditMode::crop_end:
            if (n >= signal.size())
                throw std::invalid_argument("crop of " + std::to_string(n) +
                                            " samples exceeds signal length");
            out.samples.assign(signal.samples.begin(),
                               signal.samples.end() - static_cast<std::ptrdiff_t>(n));
            break;
    }
    return out;
}

AudioBuffer clip_fraction(const AudioBuffer& signal, double p) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("clip fraction must be in [0, 1)");
    AudioBuffer out = signal;
    if (p == 0.0 || signal.samples.empty()) return out;
    std::vector<double> mags(signal.samples.size());
    for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(signal.samples[i]);
    const std::size_t idx = static_cast<std::size_t>(
        std::llround((1.0 - p) * static_cast<double>(mags.size() - 1)));
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(idx), mags.end());
    const double threshold = mags[idx];
    for (auto& s : out.samples) {
        if (s > threshold)
            s = threshold;
        else if (s < -threshold)
            s = -threshold;
    }
    return out;
}

AudioBuffer apply_gain_db(const AudioBuffer& signal, double gain_db) {
    AudioBuffer out = signal;
    const double gain = db_to_gain(gain_db);
    for (auto& s : out.samples) s *= gain;
    return out;
}

AudioBuffer first_order_filter(const AudioBuffer& signal, FilterKind kind, double cutoff_hz) {
    if (!(cutoff_hz > 0.0 && cutoff_hz < signal.rate_hz / 2.0))
        throw std::invalid_argument("cutoff must lie in (0, rate/2)");
    AudioBuffer out = signal;
    butterworth_first_order(kind, cutoff_hz, signal.rate_hz).process(out.samples);
    return out;
}

AudioBuffer spectral_tilt(const AudioBuffer& signal, double slope_db_per_octave) {
    if (slope_db_per_octave == 0.0) return signal;

    AudioBuffer out = signal;
    // Cascade of shelving pairs at half-octave spacing; each contributes
    // half the per-octave slope so the average response is linear in
    // log-frequency across the audio band.
    const double rate = signal.rate_hz;
    const double f_lo = 30.0;
    const double f_hi = rate / 2.0 * 0.49;
    const double spacing = std::sqrt(2.0);
    const double zero_ratio = std::pow(10.0, -slope_db_per_octave / 2.0 / 20.0);
    std::vector<FirstOrder> sections;
    for (double fp = f_lo; std::max(fp, fp * zero_ratio) <= f_hi; fp *= spacing) {
        const double fz = fp * zero_ratio;
        sections.push_back(shelf_section(fp, fz, rate));
    }
    for (const auto& s : sections) s.process(out.samples);

    // Pivot the response at 1 kHz so the tilt rotates around mid band.
    std::complex<double> pivot(1.0, 0.0);
    const double pivot_hz = std::min(1000.0, rate / 4.0);
    for (const auto& s : sections) pivot *= s.response(pivot_hz, rate);
    const double pivot_gain = std::abs(pivot);
    if (pivot_gain > 0.0)
        for (auto& s : out.samples) s /= pivot_gain;

    // Restore the input level; fall back to peak normalization if that
    // would clip.
    const double in_rms = audio::rms(signal.samples);
    const double out_rms = audio::rms(out.samples);
    if (in_rms > 0.0 && out_rms > 0.0) {
        double gain = in_rms / out_rms;
        double peak = 0.0;
        for (double s : out.samples) peak = std::max(peak, std::abs(s));
        if (peak * gain > 1.0) gain = 1.0 / peak;
        for (auto& s : out.samples) s *= gain;
    }
    return out;
}

AudioBuffer convolve_ir(const AudioBuffer& signal, const AudioBuffer& impulse_response) {
    if (signal.rate_hz != impulse_response.rate_hz)
        throw std::invalid_argument("signal and impulse response rates differ");
    if (impulse_response.samples.empty()) throw std::invalid_argument("empty impulse response");
    AudioBuffer out;
    out.rate_hz = signal.rate_hz;
    auto full = convolve_full(signal.samples, impulse_response.samples);
    full.resize(signal.size());
    out.samples = std::move(full);
    const double in_rms = audio::rms(signal.samples);
    const double out_rms = audio::rms(out.samples);
    if (in_rms > 0.0 && out_rms > 0.0) {
        const double gain = in_rms / out_rms;
        for (auto& s : out.samples) s *= gain;
    }
    return out;
}

AudioBuffer compressor(const AudioBuffer& signal, const CompressorParams& params) {
    if (params.ratio < 1.0) throw std::invalid_argument("compressor ratio must be >= 1");
    AudioBuffer out = signal;
    const double rate = signal.rate_hz;
    // Symmetric RMS detector (unbiased in steady state); attack/release
    // smoothing acts on the gain.
    const double detector = std::exp(-1.0 / (0.010 * rate));
    const double attack = std::exp(-1.0 / (params.attack_ms / 1000.0 * rate));
    const double release = std::exp(-1.0 / (params.release_ms / 1000.0 * rate));
    const double slope = 1.0 - 1.0 / params.ratio;
    double mean_square = 0.0;
    double gain_db = 0.0;
    for (auto& s : out.samples) {
        mean_square = detector * mean_square + (1.0 - detector) * s * s;
        const double level_db = 10.0 * std::log10(std::max(mean_square, 1e-20));
        const double over = level_db - params.threshold_dbfs;
        const double target_db = over > 0.0 ? -over * slope : 0.0;
        const double coef = target_db < gain_db ? attack : release;
        gain_db = coef * gain_db + (1.0 - coef) * target_db;
        if (gain_db != 0.0) s *= db_to_gain(gain_db);
    }
    return out;
}

namespace {

AudioBuffer builtin_narrowband(const AudioBuffer& signal) {
    constexpr int kPhoneRate = 8000;
    constexpr double kLowCut = 300.0;
    constexpr double kHighCut = 3400.0;

    AudioBuffer stage = signal;
    std::vector<Biquad> aa;
    butterworth4(aa, FilterKind::lowpass, kHighCut, stage.rate_hz);
    for (const auto& b : aa) b.process(stage.samples);

    stage = resample_linear(stage, kPhoneRate);
    Biquad::design(FilterKind::highpass, kLowCut, kPhoneRate, 0.70710678).process(stage.samples);

    stage = resample_linear(stage, signal.rate_hz);
    std::vector<Biquad> post;
    butterworth4(post, FilterKind::lowpass, kHighCut, signal.rate_hz);
    for (const auto& b : post) b.process(stage.samples);
    return stage;
}

AudioBuffer run_external_codec(const AudioBuffer& signal, const std::string& command_template,
                               std::uint64_t seed) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() /
                         ("sertest-codec-" + std::to_string(mix_seed(seed, 0xc0dec)));
    fs::create_directories(dir);
    const fs::path in_path = dir / "in.wav";
    const fs::path out_path = dir / "out.wav";
    audio::write_wav(signal, in_path);

    std::string cmd = command_template;
    auto replace_all = [](std::string& s, const std::string& from, const std::string& to) {
        for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
            s.replace(pos, from.size(), to);
    };
    if (cmd.find("{in}") == std::string::npos || cmd.find("{out}") == std::string::npos)
        throw std::invalid_argument("codec command needs {in} and {out} placeholders");
    replace_all(cmd, "{in}", in_path.string());
    replace_all(cmd, "{out}", out_path.string());

    const int status = std::system(cmd.c_str());
    if (status != 0) {
        std::error_code ec;
        fs::remove_all(dir, ec);
        throw std::runtime_error("codec command failed with status " + std::to_string(status) +
                                 ": " + cmd);
    }
    AudioBuffer coded = audio::read_wav(out_path);
    std::error_code ec;
    fs::remove_all(dir, ec);
    return coded;
}

}  // namespace

AudioBuffer phone_degradation(const AudioBuffer& signal, const std::string& codec_command,
                              std::uint64_t seed) {
    AudioBuffer stage = compressor(signal);
    AudioBuffer coded = codec_command.empty() ? builtin_narrowband(stage)
                                              : run_external_codec(stage, codec_command, seed);
    if (coded.rate_hz != signal.rate_hz) coded = resample_linear(coded, signal.rate_hz);
    coded.samples.resize(signal.size(), 0.0);

    AudioBuffer pink = synthesize_noise(NoiseKind::pink, signal.size(), signal.rate_hz, 0.0,
                                        mix_seed(seed, 0x70696e6bULL));
    Biquad::design(FilterKind::highpass, 3000.0, signal.rate_hz, 0.70710678).process(pink.samples);
    return mix_at_snr(coded, pink, 30.0, Placement::full, mix_seed(seed, 0x6d6978ULL));
}

std::string fingerprint(const PerturbationSpec& spec) {
    std::uint64_t h = fnv1a(spec.kind);
    h = fnv1a(spec.params.dump(), h);
    const std::uint64_t seed = spec.seed;
    h = fnv1a(&seed, sizeof(seed), h);
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << h;
    return out.str();
}

const std::vector<std::string>& perturbation_kinds() {
    static const std::vector<std::string> kinds = {
        "babble",   "clip",     "edit", "filter", "gain",        "impulse-response",
        "mix-event", "mix-noise", "phone", "recorded", "tilt", "tone", "white-noise",
    };
    return kinds;
}

const std::vector<AudioBuffer>& AssetStore::pool(const std::string& name) const {
    auto it = pools_.find(name);
    if (it == pools_.end())
        throw std::runtime_error("audio asset pool '" + name + "' is not loaded");
    return it->second;
}

namespace {

double pick_double(const nlohmann::json& params, const std::string& scalar_key,
                   const std::string& choices_key, Rng& rng) {
    if (params.contains(scalar_key)) return params[scalar_key].get<double>();
    if (params.contains(choices_key)) {
        const auto& choices = params[choices_key];
        if (!choices.is_array() || choices.empty())
            throw std::invalid_argument("'" + choices_key + "' must be a non-empty array");
        return choices[rng.uniform_int(choices.size())].get<double>();
    }
    throw std::invalid_argument("perturbation needs '" + scalar_key + "' or '" + choices_key +
                                "'");
}

std::size_t pick_count(const nlohmann::json& params, const std::string& scalar_key,
                       const std::string& choices_key, Rng& rng) {
    return static_cast<std::size_t>(pick_double(params, scalar_key, choices_key, rng));
}

}  // namespace

AudioBuffer apply_perturbation(const PerturbationSpec& spec, const AudioBuffer& input,
                               const std::string& sample_id, const AssetStore& assets) {
    Rng rng(mix_seed(spec.seed, fnv1a(sample_id)));
    const auto& params = spec.params;

    if (spec.kind == "gain") {
        return apply_gain_db(input, pick_double(params, "db", "db_choices", rng));
    }
    if (spec.kind == "edit") {
        const std::string mode_s = params.at("mode").get<std::string>();
        EditMode mode;
        if (mode_s == "append_zeros") mode = EditMode::append_zeros;
        else if (mode_s == "prepend_zeros") mode = EditMode::prepend_zeros;
        else if (mode_s == "crop_start") mode = EditMode::crop_start;
        else if (mode_s == "crop_end") mode = EditMode::crop_end;
        else throw std::invalid_argument("unknown edit mode '" + mode_s + "'");
        return edit_signal(input, mode, pick_count(params, "n", "n_choices", rng));
    }
    if (spec.kind == "clip") {
        return clip_fraction(input, pick_double(params, "p", "p_choices", rng));
    }
    if (spec.kind == "filter") {
        const std::string kind_s = params.at("filter").get<std::string>();
        const FilterKind kind = kind_s == "lowpass" ? FilterKind::lowpass : FilterKind::highpass;
        if (kind_s != "lowpass" && kind_s != "highpass")
            throw std::invalid_argument("unknown filter kind '" + kind_s + "'");
        return first_order_filter(input, kind,
                                  pick_double(params, "cutoff_hz", "cutoff_choices_hz", rng));
    }
    if (spec.kind == "tilt") {
        return spectral_tilt(input, params.at("slope_db_per_octave").get<double>());
    }
    if (spec.kind == "white-noise") {
        const double snr = pick_double(params, "snr_db", "snr_choices_db", rng);
        AudioBuffer noise = synthesize_noise(NoiseKind::white, input.size(), input.rate_hz, 0.0,
                                             mix_seed(spec.seed, fnv1a(sample_id + "/noise")));
        return mix_at_snr(input, noise, snr, Placement::full, 0);
    }
    if (spec.kind == "tone") {
        const double freq = rng.uniform(params.at("freq_min_hz").get<double>(),
                                        params.at("freq_max_hz").get<double>());
        const double snr = pick_double(params, "snr_db", "snr_choices_db", rng);
        AudioBuffer tone = synthesize_noise(NoiseKind::tone, input.size(), input.rate_hz, freq, 0);
        return mix_at_snr(input, tone, snr, Placement::full, 0);
    }
    if (spec.kind == "babble") {
        const auto& pool = assets.pool(params.at("pool_role").get<std::string>());
        const double snr = pick_double(params, "snr_db", "snr_choices_db", rng);
        const int cmin = params.value("count_min", 4);
        const int cmax = params.value("count_max", 7);
        AudioBuffer noise = babble(pool, cmin, cmax, input.size(), input.rate_hz,
                                   mix_seed(spec.seed, fnv1a(sample_id + "/babble")));
        return mix_at_snr(input, noise, snr, Placement::full, 0);
    }
    if (spec.kind == "mix-noise" || spec.kind == "mix-event") {
        const auto& pool = assets.pool(params.at("pool_role").get<std::string>());
        if (pool.empty()) throw std::invalid_argument("empty noise pool");
        const double snr = pick_double(params, "snr_db", "snr_choices_db", rng);
        const auto& noise = pool[rng.uniform_int(pool.size())];
        const Placement placement =
            spec.kind == "mix-event" ? Placement::random_offset : Placement::full;
        return mix_at_snr(input, noise, snr, placement,
                          mix_seed(spec.seed, fnv1a(sample_id + "/offset")));
    }
    if (spec.kind == "phone") {
        return phone_degradation(input, params.value("codec_command", std::string{}),
                                 mix_seed(spec.seed, fnv1a(sample_id)));
    }
    if (spec.kind == "impulse-response") {
        const auto& pool = assets.pool(params.at("pool_role").get<std::string>());
        const std::size_t index = params.at("ir_index").get<std::size_t>();
        if (index >= pool.size()) throw std::invalid_argument("impulse response index out of range");
        AudioBuffer ir = pool[index].rate_hz == input.rate_hz
                             ? pool[index]
                             : resample_linear(pool[index], input.rate_hz);
        return convolve_ir(input, ir);
    }
    if (spec.kind == "recorded") {
        throw std::invalid_argument(
            "'recorded' perturbations compare paired manifests and render no audio");
    }
    std::string valid;
    for (const auto& k : perturbation_kinds()) valid += (valid.empty() ? "" : ", ") + k;
    throw std::invalid_argument("unknown perturbation kind '" + spec.kind + "' (valid: " + valid +
                                ")");
}

}  // namespace sertest::perturb
