// Generates the synthetic demo dataset the harness self-tests run on:
// a small emotion-labelled corpus (3 speakers x 40 samples, valence +
// categories), a paired alternative-microphone rendering, a sentiment-
// tagged multilingual set, noise/babble asset pools, and a small impulse
// response set. Everything is derived from the seed, so repeated runs
// produce byte-identical files.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include "CLI11.hpp"
#include "json.hpp"
#include "sertest/audio.hpp"
#include "sertest/perturb.hpp"
#include "sertest/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using sertest::Rng;
using sertest::audio::AudioBuffer;

namespace {

constexpr int kRate = 16000;

/// Voiced synthetic utterance: harmonic stack plus shaped noise. `voicing`
/// moves energy from the high-frequency noise into the harmonics and
/// `level` scales the overall amplitude, which gives the demo model
/// something consistent to latch on to.
AudioBuffer utterance(double f0, double level, double voicing, double duration_s, Rng& rng) {
    AudioBuffer out;
    out.rate_hz = kRate;
    const std::size_t n = static_cast<std::size_t>(duration_s * kRate);
    out.samples.resize(n);
    const double phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kRate;
        const double envelope = 0.4 + 0.6 * std::sin(std::numbers::pi * t / duration_s);
        double harmonics = 0.0;
        for (int h = 1; h <= 5; ++h)
            harmonics += std::sin(2.0 * std::numbers::pi * f0 * h * t + phase0 * h) / h;
        const double hiss = rng.normal();
        out.samples[i] =
            level * envelope * (voicing * 0.5 * harmonics + (1.0 - voicing) * 0.35 * hiss);
    }
    return out;
}

void write_sample(const AudioBuffer& buffer, const fs::path& root, const std::string& rel) {
    const fs::path path = root / rel;
    fs::create_directories(path.parent_path());
    sertest::audio::write_wav(buffer, path);
}

json sample_record(const std::string& id, const std::string& rel_path) {
    json rec;
    rec["id"] = id;
    rec["audio_path"] = rel_path;
    return rec;
}

void write_manifest(const fs::path& root, const std::string& name,
                    const std::vector<json>& records) {
    std::ofstream out(root / (name + ".jsonl"));
    json header;
    header["dataset"] = name;
    header["sample_rate_hz"] = kRate;
    out << header.dump() << "\n";
    for (const auto& rec : records) out << rec.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generate the bundled synthetic demo dataset"};
    std::string out_s = "demo-data";
    std::uint64_t seed = 20240601;
    app.add_option("--out", out_s, "output directory");
    app.add_option("--seed", seed, "generation seed");
    CLI11_PARSE(app, argc, argv);

    const fs::path root = out_s;
    fs::create_directories(root);

    struct Speaker {
        const char* id;
        const char* sex;
        double f0;
    };
    const Speaker speakers[3] = {{"spk0", "f", 210.0}, {"spk1", "f", 165.0}, {"spk2", "m", 120.0}};
    const char* classes[4] = {"anger", "happiness", "neutral", "sadness"};

    // mini: 3 speakers x 40 samples, gold valence + categories.
    std::vector<json> mini_records;
    std::vector<std::pair<std::string, AudioBuffer>> mini_audio;
    {
        Rng rng(sertest::mix_seed(seed, 1));
        int index = 0;
        for (const auto& speaker : speakers) {
            for (int j = 0; j < 40; ++j, ++index) {
                char id[16];
                std::snprintf(id, sizeof id, "s%03d", index);
                const double valence =
                    std::clamp((j + 0.5) / 40.0 + rng.uniform(-0.04, 0.04), 0.01, 0.99);
                // Class tied loosely to the synthesis parameters so class
                // proportions differ a little per speaker.
                const char* cls = classes[(j + (index % 3)) % 4];
                const double voicing = 0.35 + 0.55 * valence;
                const double level = 0.05 + 0.3 * (0.3 + 0.7 * valence);
                AudioBuffer buffer = utterance(speaker.f0, level, voicing, 0.5, rng);

                json rec = sample_record(id, std::string("audio/mini/") + id + ".wav");
                rec["speaker"] = speaker.id;
                rec["gold"] = {{"valence", std::round(valence * 1000.0) / 1000.0},
                               {"categories", cls}};
                rec["attrs"] = {{"sex", speaker.sex},
                                {"mean_f0_hz", speaker.f0 + rng.uniform(-4.0, 4.0)}};
                mini_records.push_back(std::move(rec));
                write_sample(buffer, root, std::string("audio/mini/") + id + ".wav");
                mini_audio.emplace_back(id, std::move(buffer));
            }
        }
        write_manifest(root, "mini", mini_records);
    }

    // mini__altmic: the same utterances through a short synthetic room
    // response, paired by id.
    {
        Rng rng(sertest::mix_seed(seed, 2));
        AudioBuffer ir;
        ir.rate_hz = kRate;
        ir.samples.assign(static_cast<std::size_t>(0.03 * kRate), 0.0);
        ir.samples[0] = 1.0;
        for (std::size_t i = 1; i < ir.samples.size(); ++i)
            ir.samples[i] = 0.25 * rng.normal() *
                            std::exp(-6.0 * static_cast<double>(i) / ir.samples.size());
        std::vector<json> records;
        for (const auto& [id, buffer] : mini_audio) {
            const AudioBuffer alt = sertest::perturb::convolve_ir(buffer, ir);
            write_sample(alt, root, std::string("audio/mini-altmic/") + id + ".wav");
            records.push_back(sample_record(id, std::string("audio/mini-altmic/") + id + ".wav"));
        }
        write_manifest(root, "mini__altmic", records);
    }

    // mini-checklist: 2 languages x 3 sentiments x 10 synthesized samples.
    {
        Rng rng(sertest::mix_seed(seed, 3));
        std::vector<json> records;
        int index = 0;
        for (const char* language : {"de", "en"}) {
            for (const char* sentiment : {"negative", "neutral", "positive"}) {
                const double bias =
                    std::string(sentiment) == "negative" ? -0.15
                    : std::string(sentiment) == "positive" ? 0.15 : 0.0;
                for (int j = 0; j < 10; ++j, ++index) {
                    char id[16];
                    std::snprintf(id, sizeof id, "c%03d", index);
                    const double base = 0.1 + 0.8 * (j + 0.5) / 10.0;
                    const double voicing = std::clamp(0.45 + bias + 0.3 * base, 0.1, 0.95);
                    AudioBuffer buffer =
                        utterance(150.0 + 40.0 * base, 0.1 + 0.2 * base, voicing, 0.4, rng);
                    json rec = sample_record(id, std::string("audio/checklist/") + id + ".wav");
                    rec["attrs"] = {{"language", language}, {"sentiment", sentiment}};
                    records.push_back(std::move(rec));
                    write_sample(buffer, root, std::string("audio/checklist/") + id + ".wav");
                }
            }
        }
        write_manifest(root, "mini-checklist", records);
    }

    // Noise pools.
    {
        Rng rng(sertest::mix_seed(seed, 4));
        auto pool = [&](const std::string& name, int count, auto&& make) {
            std::vector<json> records;
            for (int i = 0; i < count; ++i) {
                const std::string id = name + std::to_string(i);
                const std::string rel = "audio/noise/" + id + ".wav";
                write_sample(make(i), root, rel);
                records.push_back(sample_record(id, rel));
            }
            write_manifest(root, "noise-" + name, records);
        };
        pool("speech", 8, [&](int i) {
            AudioBuffer voice = utterance(100.0 + 15.0 * i, 0.2, 0.7, 1.0, rng);
            return voice;
        });
        pool("sound", 2, [&](int) {
            AudioBuffer noise = sertest::perturb::synthesize_noise(
                sertest::perturb::NoiseKind::pink, kRate, kRate, 0.0, rng.uniform_int(1u << 30));
            for (auto& s : noise.samples) s *= 0.2;
            return noise;
        });
        pool("music", 2, [&](int i) {
            AudioBuffer chord;
            chord.rate_hz = kRate;
            chord.samples.resize(kRate);
            for (std::size_t n = 0; n < chord.samples.size(); ++n) {
                const double t = static_cast<double>(n) / kRate;
                for (double f : {220.0, 277.18, 329.63})
                    chord.samples[n] +=
                        0.08 * std::sin(2.0 * std::numbers::pi * f * (i + 1) * t);
            }
            return chord;
        });
        auto burst = [&](double duration_s) {
            AudioBuffer b;
            b.rate_hz = kRate;
            b.samples.resize(static_cast<std::size_t>(duration_s * kRate));
            for (std::size_t n = 0; n < b.samples.size(); ++n)
                b.samples[n] = 0.5 * rng.normal() *
                               std::exp(-10.0 * static_cast<double>(n) / b.samples.size());
            return b;
        };
        pool("cough", 2, [&](int) { return burst(0.15); });
        pool("sneeze", 2, [&](int) { return burst(0.10); });
    }

    // Impulse responses: a near-dry baseline plus two synthetic positions.
    {
        Rng rng(sertest::mix_seed(seed, 5));
        std::vector<json> records;
        const char* names[3] = {"centre-1m", "left-2m", "right-3m"};
        for (int i = 0; i < 3; ++i) {
            AudioBuffer ir;
            ir.rate_hz = kRate;
            ir.samples.assign(static_cast<std::size_t>(0.05 * kRate), 0.0);
            ir.samples[0] = 1.0;
            const double tail = i == 0 ? 0.05 : 0.3 + 0.2 * i;
            for (std::size_t n = 1; n < ir.samples.size(); ++n)
                ir.samples[n] = tail * rng.normal() *
                                std::exp(-(4.0 - i) * static_cast<double>(n) / ir.samples.size());
            const std::string rel = std::string("audio/irs/") + names[i] + ".wav";
            write_sample(ir, root, rel);
            json rec = sample_record(names[i], rel);
            rec["attrs"] = {{"baseline", i == 0 ? 1 : 0}};
            records.push_back(std::move(rec));
        }
        write_manifest(root, "irs-position", records);
    }

    std::cout << "demo data written to " << root.string() << "\n";
    return 0;
}
