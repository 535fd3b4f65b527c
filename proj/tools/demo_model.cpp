// Deterministic scripted model used by the harness self-tests and the
// bundled demo. Reads newline-delimited wave paths on stdin and answers one
// JSON record per line, following the subprocess adapter contract. The
// "predictions" are fixed functions of cheap signal statistics, so the same
// audio always yields the same answer and perturbations move the output in
// a plausible way.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sertest/audio.hpp"
#include "sertest/perturb.hpp"

using sertest::audio::AudioBuffer;

namespace {

struct Features {
    double loudness = 0.0;  // log RMS
    double zcr = 0.0;       // zero crossing rate
    double tilt = 0.0;      // high band vs low band energy, log scale
};

Features extract(const AudioBuffer& buffer) {
    Features f;
    f.loudness = std::log10(sertest::audio::rms(buffer.samples) + 1e-6);
    long crossings = 0;
    for (std::size_t i = 1; i < buffer.samples.size(); ++i)
        if ((buffer.samples[i] >= 0.0) != (buffer.samples[i - 1] >= 0.0)) ++crossings;
    f.zcr = buffer.samples.size() > 1
                ? static_cast<double>(crossings) / static_cast<double>(buffer.samples.size() - 1)
                : 0.0;
    const AudioBuffer low =
        sertest::perturb::first_order_filter(buffer, sertest::perturb::FilterKind::lowpass, 800.0);
    const AudioBuffer high = sertest::perturb::first_order_filter(
        buffer, sertest::perturb::FilterKind::highpass, 2000.0);
    f.tilt = std::log10((sertest::audio::rms(high.samples) + 1e-9) /
                        (sertest::audio::rms(low.samples) + 1e-9));
    return f;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double value_for(const std::string& task, const Features& f) {
    if (task == "arousal") return logistic(2.2 * (f.loudness + 1.4) + 3.0 * (f.zcr - 0.12));
    if (task == "dominance") return logistic(1.8 * (f.loudness + 1.5) - 1.2 * f.tilt - 0.2);
    // valence
    return logistic(1.6 * (f.loudness + 1.3) - 2.4 * (f.tilt + 0.9) + 4.0 * (f.zcr - 0.1));
}

std::string class_for(const Features& f) {
    const double anger = 1.5 * (f.loudness + 1.2) + 2.0 * (f.tilt + 0.8);
    const double happiness = 1.2 * (f.loudness + 1.4) + 5.0 * (f.zcr - 0.1);
    const double neutral = 0.4 - 2.0 * std::abs(f.loudness + 1.5);
    const double sadness = -1.6 * (f.loudness + 1.1) - 3.0 * (f.zcr - 0.12);
    double best = anger;
    std::string cls = "anger";
    if (happiness > best) { best = happiness; cls = "happiness"; }
    if (neutral > best) { best = neutral; cls = "neutral"; }
    if (sadness > best) { best = sadness; cls = "sadness"; }
    return cls;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic demo model for the test harness"};
    std::string task = "valence";
    app.add_option("--task", task, "arousal | dominance | valence | categories");
    CLI11_PARSE(app, argc, argv);

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        AudioBuffer buffer;
        try {
            buffer = sertest::audio::read_wav(line);
        } catch (const std::exception& e) {
            std::cerr << "cannot read '" << line << "': " << e.what() << "\n";
            return 1;
        }
        const Features f = extract(buffer);
        nlohmann::json rec;
        rec["id"] = std::filesystem::path(line).stem().string();
        if (task == "categories")
            rec["class"] = class_for(f);
        else
            rec["value"] = value_for(task, f);
        std::cout << rec.dump() << "\n";
    }
    return 0;
}
