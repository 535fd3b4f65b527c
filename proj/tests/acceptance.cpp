// Acceptance suite: exercises the harness end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero when any criterion fails.
//
// Usage:
//   sertest-acceptance <sertest> <demo-model> <demo-data> <fixtures-dir>
//                      <golden-report> <workdir>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "oracles.hpp"
#include "sertest/adapters.hpp"
#include "sertest/metrics.hpp"
#include "sertest/perturb.hpp"
#include "sertest/report.hpp"
#include "sertest/suite.hpp"

namespace fs = std::filesystem;
using namespace sertest;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report_line(int number, const std::string& name, bool ok, const std::string& detail = {}) {
    std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << number << ": " << name;
    if (!detail.empty()) std::cout << "  [" << detail << "]";
    std::cout << "\n";
    if (!ok) ++failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// --- criterion 1 -----------------------------------------------------------

void criterion_bin_floor() {
    const bool ok = sim::n_min_bin(1000) == 67 && sim::n_min_bin(60) == 4;
    report_line(1, "minimum samples per bin match the catalogued values", ok,
                "n_min(1000)=" + std::to_string(sim::n_min_bin(1000)) +
                    ", n_min(60)=" + std::to_string(sim::n_min_bin(60)));
}

// --- criterion 2 -----------------------------------------------------------

void criterion_monte_carlo() {
    const auto start = Clock::now();
    int below = 0;
    double worst = 0.0;
    for (int run = 0; run < 20; ++run) {
        const double value =
            sim::simulate_threshold("diff-mean", 3, 600, sim::RandomModelConfig::gaussian(),
                                    std::nullopt, 1000, 202400 + run);
        worst = std::max(worst, value);
        if (value < 0.025) ++below;
    }
    const double elapsed = seconds_since(start);
    std::ostringstream detail;
    detail << below << "/20 below 0.025, worst " << worst << ", " << elapsed << " s";
    report_line(2, "simulated mean-value threshold for 3x600 stays below 0.025",
                below >= 19 && elapsed < 30.0, detail.str());
}

// --- criterion 3 -----------------------------------------------------------

void criterion_metric_oracles() {
    Rng rng(30303);
    const char* names[4] = {"c0", "c1", "c2", "c3"};
    bool ok = true;
    std::string first_failure;
    auto expect = [&](bool good, const std::string& what) {
        if (!good && ok) {
            ok = false;
            first_failure = what;
        }
    };
    auto close_to = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(63));
        std::vector<double> t(n), p(n);
        std::vector<std::string> tc(n), pc(n);
        for (int i = 0; i < n; ++i) {
            t[i] = rng.uniform01();
            p[i] = rng.uniform01();
            tc[i] = names[rng.uniform_int(4)];
            pc[i] = names[rng.uniform_int(4)];
        }
        expect(close_to(metrics::concordance_corr(t, p), oracles::ccc(t, p)), "CCC");
        if (oracles::var(t) > 0 && oracles::var(p) > 0) {
            expect(close_to(metrics::pearson_corr(t, p), oracles::pcc(t, p)), "PCC");
            expect(close_to(metrics::spearman_rho(t, p), oracles::spearman(t, p)), "Spearman");
        }
        expect(close_to(metrics::mean_absolute_error(t, p), oracles::mae(t, p)), "MAE");
        expect(close_to(metrics::jensen_shannon_distance(t, p),
                        oracles::js_distance(t, p, 10)),
               "JS distance");

        const auto m = metrics::class_metrics(tc, pc, {names, names + 4});
        const auto o = oracles::confusion(tc, pc);
        expect(close_to(m.uar, o.uar), "UAR");
        expect(close_to(m.uap, o.uap), "UAP");
        for (const auto& [cls, r] : m.recall_per_class)
            expect(close_to(r, o.recall.at(cls)), "RPC");
        for (const auto& [cls, q] : m.precision_per_class)
            expect(close_to(q, o.precision.at(cls)), "PPC");

        const auto bm = metrics::binned_class_metrics(t, p, BinSpec{4}, 0);
        const auto bo = oracles::bin_confusion(t, p, 4);
        for (const auto& [bin, r] : bm.recall_per_bin)
            expect(close_to(r, bo.recall.at(bin)), "recall per bin");
        for (const auto& [bin, q] : bm.precision_per_bin)
            expect(close_to(q, bo.precision.at(bin)), "precision per bin");
    }
    report_line(3, "metric kernels match naive oracles within 1e-9 on 1000 random instances", ok,
                ok ? "CCC PCC MAE UAR UAP RPC PPC Spearman JSD bins" : first_failure);
}

// --- criterion 4 -----------------------------------------------------------

void criterion_js_endpoints() {
    std::vector<double> same = {0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95};
    const double zero = metrics::jensen_shannon_distance(same, same);
    const std::vector<double> lo(50, 0.03), hi(50, 0.97);
    const double one = metrics::jensen_shannon_distance(lo, hi);
    const bool ok = zero == 0.0 && std::abs(one - 1.0) <= 1e-12;
    std::ostringstream detail;
    detail.precision(17);
    detail << "identical=" << zero << ", disjoint=" << one;
    report_line(4, "Jensen-Shannon distance endpoints (0 and 1, base 2)", ok, detail.str());
}

// --- criterion 5 -----------------------------------------------------------

void criterion_dsp() {
    using namespace sertest::perturb;
    bool ok = true;
    std::string detail;
    auto expect = [&](bool good, const std::string& what) {
        if (!good) {
            ok = false;
            if (detail.empty()) detail = what;
        }
    };

    // Mixing hits the requested SNR within 0.01 dB on 100 random pairs.
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(500 + trial);
        AudioBuffer signal, noise;
        signal.rate_hz = noise.rate_hz = 16000;
        signal.samples.resize(4000);
        noise.samples.resize(1000 + 37 * trial);
        for (auto& s : signal.samples) s = 0.1 * rng.normal();
        for (auto& s : noise.samples) s = 0.3 * rng.normal();
        const double target = -12.0 + 0.45 * trial;
        const auto mixed = mix_at_snr(signal, noise, target, Placement::full, 0);
        std::vector<double> diff(mixed.size());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff[i] = mixed.samples[i] - signal.samples[i];
        const double measured =
            20.0 * std::log10(oracles::rms(signal.samples) / oracles::rms(diff));
        expect(std::abs(measured - target) < 0.01, "mix SNR off target");
    }

    // First-order filters sit 3 dB down at the cutoff.
    for (double cutoff : {150.0, 1000.0, 6500.0}) {
        AudioBuffer tone;
        tone.rate_hz = 16000;
        tone.samples.resize(64000);
        for (std::size_t i = 0; i < tone.samples.size(); ++i)
            tone.samples[i] = 0.4 * std::sin(2.0 * 3.14159265358979323846 * cutoff * i / 16000.0);
        for (auto kind : {FilterKind::lowpass, FilterKind::highpass}) {
            const auto out = first_order_filter(tone, kind, cutoff);
            std::vector<double> head(tone.samples.begin() + 16000, tone.samples.end());
            std::vector<double> tail(out.samples.begin() + 16000, out.samples.end());
            const double db = 20.0 * std::log10(oracles::rms(tail) / oracles::rms(head));
            expect(std::abs(db - (-3.0103)) < 0.1, "filter cutoff response");
        }
    }

    // Spectral tilt preserves the level when it does not clip.
    {
        Rng rng(700);
        AudioBuffer signal;
        signal.rate_hz = 16000;
        signal.samples.resize(16000);
        for (auto& s : signal.samples) s = 0.05 * rng.normal();
        for (double slope : {-3.0, -1.0, 1.0, 3.0}) {
            const auto out = spectral_tilt(signal, slope);
            expect(std::abs(oracles::rms(out.samples) - oracles::rms(signal.samples)) < 1e-9,
                   "tilt level preservation");
        }
    }

    // Append/crop are exact inverses.
    {
        Rng rng(701);
        AudioBuffer signal;
        signal.rate_hz = 16000;
        signal.samples.resize(12345);
        for (auto& s : signal.samples) s = rng.normal();
        for (std::size_t n : {100u, 500u, 1000u}) {
            const auto a = edit_signal(edit_signal(signal, EditMode::append_zeros, n),
                                       EditMode::crop_end, n);
            const auto b = edit_signal(edit_signal(signal, EditMode::prepend_zeros, n),
                                       EditMode::crop_start, n);
            expect(a.samples == signal.samples && b.samples == signal.samples,
                   "append/crop inverse");
        }
    }

    // Every perturbation kind renders identically under a fixed seed.
    {
        Rng rng(702);
        AudioBuffer input;
        input.rate_hz = 16000;
        input.samples.resize(8000);
        for (auto& s : input.samples) s = 0.1 * rng.normal();
        AssetStore assets;
        std::vector<AudioBuffer> pool;
        for (int i = 0; i < 8; ++i) {
            AudioBuffer b;
            b.rate_hz = 16000;
            b.samples.resize(2000);
            Rng r(800 + i);
            for (auto& s : b.samples) s = 0.2 * r.normal();
            pool.push_back(std::move(b));
        }
        assets.add("noise-speech", pool);
        assets.add("noise-cough", {pool[0]});
        assets.add("irs", {pool[1]});
        const std::vector<PerturbationSpec> specs = {
            {"gain", "gain", {{"db_choices", {-2.0, -1.0, 1.0, 2.0}}}, 5},
            {"edit", "edit", {{"mode", "append_zeros"}, {"n_choices", {100, 500, 1000}}}, 5},
            {"clip", "clip", {{"p_choices", {0.001, 0.002, 0.003}}}, 5},
            {"filter", "filter",
             {{"filter", "highpass"}, {"cutoff_choices_hz", {50.0, 100.0, 150.0}}}, 5},
            {"tilt", "tilt", {{"slope_db_per_octave", -2.0}}, 5},
            {"white-noise", "white-noise", {{"snr_choices_db", {35.0, 40.0, 45.0}}}, 5},
            {"tone", "tone",
             {{"freq_min_hz", 5000.0}, {"freq_max_hz", 7000.0}, {"snr_db", 45.0}}, 5},
            {"babble", "babble", {{"pool_role", "noise-speech"}, {"snr_db", 20.0}}, 5},
            {"mix-event", "mix-event", {{"pool_role", "noise-cough"}, {"snr_db", 10.0}}, 5},
            {"phone", "phone", nlohmann::json::object(), 5},
            {"impulse-response", "impulse-response",
             {{"pool_role", "irs"}, {"ir_index", 0}}, 5},
        };
        for (const auto& spec : specs) {
            const auto a = apply_perturbation(spec, input, "sample", assets);
            const auto b = apply_perturbation(spec, input, "sample", assets);
            expect(a.samples == b.samples, "determinism of " + spec.kind);
        }
    }

    report_line(5, "DSP invariants (SNR, cutoff, tilt level, edits, determinism)", ok, detail);
}

// --- criterion 6 -----------------------------------------------------------

suite::EvalContext context_for(const std::map<std::string, DatasetManifest>& manifests,
                               const std::map<std::pair<std::string, Task>, PredictionSet>& preds,
                               std::uint64_t seed) {
    suite::EvalContext ctx;
    ctx.manifest = [&manifests](const std::string& name) -> const DatasetManifest* {
        auto it = manifests.find(name);
        return it == manifests.end() ? nullptr : &it->second;
    };
    ctx.predictions = [&preds](const std::string& dataset, Task task) -> const PredictionSet* {
        auto it = preds.find({dataset, task});
        return it == preds.end() ? nullptr : &it->second;
    };
    ctx.thresholds = &sim::ThresholdTable::bundled();
    ctx.seed = seed;
    return ctx;
}

void criterion_fairness_sanity() {
    bool ok = true;
    std::string detail;
    for (int variant = 0; variant < 3 && ok; ++variant) {
        // Groups are exact copies of each other, so every group statistic
        // equals the pool statistic.
        std::map<std::string, DatasetManifest> manifests;
        std::map<std::pair<std::string, Task>, PredictionSet> preds;
        DatasetManifest manifest;
        manifest.name = "d";
        PredictionSet vp, cp;
        vp.task = Task::valence;
        cp.task = Task::categories;
        Rng rng(900 + variant);
        const char* classes[4] = {"anger", "happiness", "neutral", "sadness"};
        const int per_group = 80 + 40 * variant;
        const int n_groups = 2 + variant;
        for (int i = 0; i < per_group; ++i) {
            const double truth = (i + 0.5) / per_group;
            const double pred = std::clamp(truth + 0.1 * rng.normal(), 0.0, 1.0);
            const char* cls_t = classes[i % 4];
            const char* cls_p = classes[(i + (i % 7 == 0 ? 1 : 0)) % 4];
            for (int g = 0; g < n_groups; ++g) {
                Sample s;
                s.id = "g" + std::to_string(g) + "-" + std::to_string(i);
                s.attrs.emplace("grp", AttrValue::of("group" + std::to_string(g)));
                s.gold.emplace(Task::valence, Label::of_value(truth));
                s.gold.emplace(Task::categories, Label::of_class(cls_t));
                vp.predictions.emplace(s.id, Label::of_value(pred));
                cp.predictions.emplace(s.id, Label::of_class(cls_p));
                manifest.samples.push_back(std::move(s));
            }
        }
        manifests["d"] = std::move(manifest);
        preds[{"d", Task::valence}] = std::move(vp);
        preds[{"d", Task::categories}] = std::move(cp);
        const auto ctx = context_for(manifests, preds, 31 + variant);

        // Direct pool-vs-itself disparities.
        std::vector<Label> pool;
        for (const auto& [id, label] : preds.at({"d", Task::valence}).predictions)
            pool.push_back(label);
        for (auto mode :
             {metrics::DisparityMode::diff_mean, metrics::DisparityMode::rel_diff_per_bin})
            for (const auto& [key, v] :
                 metrics::group_disparity(pool, pool, mode, BinSpec{4}, 0).values)
                if (v != 0.0) {
                    ok = false;
                    detail = "pool self-disparity nonzero";
                }

        auto spec = [&](Task task, const std::string& metric, double threshold,
                        std::optional<int> n_min = std::nullopt, int balance = 0) {
            suite::TestSpec s;
            s.id = "fair/" + metric;
            s.test = "Fairness Synthetic";
            s.category = suite::Category::fairness;
            s.task = task;
            s.metric = metric;
            s.datasets = {"d"};
            s.comparison = suite::Comparison::abs_less;
            s.threshold = threshold;
            s.grouping = "grp";
            s.balance_n = balance;
            if (n_min) {
                s.n_min = n_min;
                s.bin_spec = BinSpec{4};
            }
            return s;
        };
        const std::vector<suite::TestSpec> specs = {
            spec(Task::valence, "Diff. Mean Value", 0.075),
            spec(Task::valence, "Relative Diff. Per Bin", 0.1, 2),
            spec(Task::valence, "Diff. CCC", 0.075, std::nullopt, per_group),
            spec(Task::valence, "Diff. Recall Per Bin", 0.1, 2),
            spec(Task::valence, "Diff. Precision Per Bin", 0.1, 2),
            spec(Task::categories, "Relative Diff. Per Class", 0.1),
            spec(Task::categories, "Diff. UAR", 0.075),
            spec(Task::categories, "Diff. RPC", 0.175),
            spec(Task::categories, "Diff. PPC", 0.075),
        };
        for (const auto& s : specs) {
            const auto result = suite::evaluate_test(s, ctx);
            long judged = 0;
            for (const auto& inst : result.instances) {
                if (inst.skipped) continue;
                ++judged;
                if (!inst.passed || std::abs(inst.value) > 1e-12) {
                    ok = false;
                    detail = s.metric + " value " + std::to_string(inst.value);
                }
            }
            if (judged == 0) {
                ok = false;
                detail = s.metric + " produced no judged instances";
            }
        }
    }
    report_line(6, "fairness sanity: identical groups pass with zero disparity", ok, detail);
}

// --- criterion 7 -----------------------------------------------------------

struct MeanModel final : adapters::ModelAdapter {
    std::string id = "mean-model";
    PredictionSet predict(Task task,
                          const std::vector<std::pair<std::string, std::string>>& id_paths)
        override {
        PredictionSet set;
        set.model_id = id;
        set.task = task;
        for (const auto& [sample_id, path] : id_paths) {
            const auto buffer = audio::read_wav(path);
            double acc = 0.0;
            for (double s : buffer.samples) acc += std::abs(s);
            const double v = 1.0 / (1.0 + std::exp(-20.0 * acc / buffer.samples.size()));
            if (is_dimensional(task))
                set.predictions.emplace(sample_id, Label::of_value(v));
            else
                set.predictions.emplace(sample_id,
                                        Label::of_class(v > 0.55 ? "anger" : "neutral"));
        }
        return set;
    }
    const std::string& model_id() const override { return id; }
    bool answers(Task) const override { return true; }
};

void criterion_robustness_identity(const fs::path& workdir) {
    bool ok = true;
    std::string detail;

    const fs::path dir = workdir / "identity";
    fs::remove_all(dir);
    fs::create_directories(dir / "audio");
    std::map<std::string, DatasetManifest> manifests;
    DatasetManifest manifest;
    manifest.name = "d";
    Rng rng(1000);
    for (int i = 0; i < 24; ++i) {
        audio::AudioBuffer buffer;
        buffer.rate_hz = 16000;
        buffer.samples.resize(4000);
        for (auto& s : buffer.samples) s = (0.02 + 0.01 * (i % 8)) * rng.normal();
        Sample s;
        s.id = "s" + std::to_string(i);
        s.audio_path = (dir / "audio" / (s.id + ".wav")).string();
        audio::write_wav(buffer, s.audio_path);
        s.gold.emplace(Task::valence, Label::of_value((i + 0.5) / 24.0));
        s.gold.emplace(Task::categories, Label::of_class(i % 2 == 0 ? "anger" : "neutral"));
        manifest.samples.push_back(std::move(s));
    }
    manifests["d"] = std::move(manifest);

    MeanModel model;
    adapters::ModelPredictionProvider provider(model, &manifests, perturb::AssetStore{},
                                               dir / "work", 17, true);
    suite::EvalContext ctx;
    ctx.manifest = [&manifests](const std::string& name) -> const DatasetManifest* {
        auto it = manifests.find(name);
        return it == manifests.end() ? nullptr : &it->second;
    };
    ctx.predictions = [&provider](const std::string& dataset, Task task) {
        return provider.clean(dataset, task);
    };
    ctx.robustness = [&provider](const suite::TestSpec& spec, const std::string& dataset) {
        return provider.robustness(spec, dataset);
    };
    ctx.thresholds = &sim::ThresholdTable::bundled();
    ctx.seed = 17;

    perturb::PerturbationSpec identity;
    identity.name = "identity-gain";
    identity.kind = "gain";
    identity.params = {{"db", 0.0}};

    auto spec = [&](Task task, const std::string& metric, suite::Comparison cmp, double thr) {
        suite::TestSpec s;
        s.id = "rob/" + std::string(to_string(task)) + "/" + metric;
        s.test = "Robustness Identity";
        s.category = suite::Category::robustness;
        s.task = task;
        s.metric = metric;
        s.datasets = {"d"};
        s.comparison = cmp;
        s.threshold = thr;
        s.perturbation = identity;
        return s;
    };
    const std::vector<suite::TestSpec> specs = {
        spec(Task::valence, "Perc. Unchanged Predictions", suite::Comparison::greater, 0.95),
        spec(Task::valence, "Change CCC", suite::Comparison::greater, -0.05),
        spec(Task::categories, "Perc. Unchanged Predictions", suite::Comparison::greater, 0.95),
        spec(Task::categories, "Change UAR", suite::Comparison::greater, -0.02),
    };
    for (const auto& s : specs) {
        const auto result = suite::evaluate_test(s, ctx);
        for (const auto& inst : result.instances) {
            if (inst.skipped) {
                ok = false;
                detail = s.metric + " skipped: " + inst.reason;
                continue;
            }
            const bool unchanged_metric = s.metric == "Perc. Unchanged Predictions";
            const double expected = unchanged_metric ? 1.0 : 0.0;
            if (!inst.passed || inst.value != expected) {
                ok = false;
                detail = s.metric + " value " + std::to_string(inst.value);
            }
        }
    }
    report_line(7, "identity perturbation keeps every prediction and passes robustness", ok,
                detail);
}

// --- criterion 8 -----------------------------------------------------------

void criterion_registry_fidelity() {
    const auto specs = suite::default_registry();
    auto has = [&](const std::string& test, Task task, const std::string& metric,
                   suite::Comparison cmp, double threshold) {
        for (const auto& s : specs)
            if (s.test == test && s.task == task && s.metric == metric && s.comparison == cmp &&
                s.threshold == threshold)
                return true;
        return false;
    };
    bool ok = true;
    std::string detail;
    auto expect = [&](bool good, const std::string& what) {
        if (!good) {
            ok = false;
            if (detail.empty()) detail = what;
        }
    };
    expect(has("Correctness Regression", Task::arousal, "CCC", suite::Comparison::greater, 0.5),
           "CCC > 0.5");
    expect(has("Correctness Regression", Task::valence, "MAE", suite::Comparison::less, 0.1),
           "MAE < 0.1");
    expect(has("Fairness Sex", Task::categories, "Diff. UAR", suite::Comparison::abs_less, 0.075),
           "|Diff. UAR| < 0.075");
    expect(has("Robustness Spectral Tilt", Task::categories, "Change UAR",
               suite::Comparison::greater, -0.02),
           "Change UAR > -0.02");
    expect(has("Robustness Background Noise", Task::arousal, "Perc. Unchanged Predictions",
               suite::Comparison::greater, 0.9),
           "unchanged > 0.9");
    expect(has("Robustness Low Quality Phone", Task::categories, "Perc. Unchanged Predictions",
               suite::Comparison::greater, 0.5),
           "unchanged > 0.5");
    expect(has("Robustness Rec. Condition", Task::dominance, "Perc. Unchanged Predictions",
               suite::Comparison::greater, 0.8),
           "unchanged > 0.8");
    expect(has("Robustness Small Changes", Task::valence, "Perc. Unchanged Predictions",
               suite::Comparison::greater, 0.95),
           "unchanged > 0.95");
    report_line(8, "registry rows match the catalogued conditions", ok, detail);
}

// --- criterion 9 -----------------------------------------------------------

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void criterion_golden_run(const fs::path& sertest_bin, const fs::path& demo_model,
                          const fs::path& demo_data, const fs::path& fixtures,
                          const fs::path& golden, const fs::path& workdir) {
    const auto start = Clock::now();
    const fs::path dir = workdir / "golden";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto run = [&](const std::string& cmd) { return std::system(cmd.c_str()) == 0; };
    bool ok = run(demo_data.string() + " --out " + (dir / "data").string() +
                  " --seed 20240601 > /dev/null");
    if (ok)
        ok = run(sertest_bin.string() + " run --manifests " + (dir / "data").string() +
                 " --registry " + (fixtures / "registry-mini.json").string() +
                 " --command \"valence=" + demo_model.string() + " --task valence\"" +
                 " --command \"categories=" + demo_model.string() + " --task categories\"" +
                 " --model-id demo --workdir " + (dir / "work").string() +
                 " --seed 4242 --out " + (dir / "report").string() + " > /dev/null 2>&1");
    const double elapsed = seconds_since(start);

    std::string detail;
    if (ok) {
        const std::string got = read_file(dir / "report" / "report.json");
        const std::string want = read_file(golden);
        if (got.empty() || want.empty()) {
            ok = false;
            detail = "missing report or golden file";
        } else if (got != want) {
            ok = false;
            detail = "report differs from the golden file";
        }
    } else {
        detail = "pipeline command failed";
    }
    if (elapsed >= 60.0) {
        ok = false;
        detail += (detail.empty() ? "" : "; ") + std::string("took too long");
    }
    std::ostringstream stamp;
    stamp << elapsed << " s";
    report_line(9, "golden end-to-end run reproduces the checked-in report byte for byte", ok,
                detail.empty() ? stamp.str() : detail);
}

// --- criterion 10 ----------------------------------------------------------

void criterion_balancing() {
    DatasetManifest manifest;
    manifest.name = "b";
    Rng rng(1100);
    auto add_group = [&](const std::string& name, int count, double mean) {
        for (int i = 0; i < count; ++i) {
            double v;
            do {
                v = mean + 0.18 * rng.normal();
            } while (v < 0.0 || v > 1.0);
            Sample s;
            s.id = name + std::to_string(i);
            s.gold.emplace(Task::valence, Label::of_value(v));
            s.attrs.emplace("grp", AttrValue::of(name));
            manifest.samples.push_back(std::move(s));
        }
    };
    add_group("A", 1400, 0.42);
    add_group("B", 6000, 0.57);
    const auto partition = partition_by_attribute(manifest, "grp");
    const auto balanced = sim::balance_groups(manifest, partition, Task::valence, 1000, 77);

    std::map<std::string, const Sample*> index;
    for (const auto& s : manifest.samples) index[s.id] = &s;
    std::vector<double> va, vb;
    for (const auto& id : balanced.groups.at("A"))
        va.push_back(index.at(id)->gold_for(Task::valence)->value());
    for (const auto& id : balanced.groups.at("B"))
        vb.push_back(index.at(id)->gold_for(Task::valence)->value());
    const auto ha = metrics::bin_values(va, BinSpec{10});
    const auto hb = metrics::bin_values(vb, BinSpec{10});
    double worst = 0.0;
    for (int b = 0; b < 10; ++b) worst = std::max(worst, std::abs(ha[b] - hb[b]) / 1000.0);
    const bool ok = va.size() == 1000 && vb.size() == 1000 && worst <= 0.05;
    std::ostringstream detail;
    detail << "max per-bin gap " << worst;
    report_line(10, "balancing matches the truth histograms within 0.05 per bin", ok,
                detail.str());
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 7) {
        std::cerr << "usage: sertest-acceptance <sertest> <demo-model> <demo-data> "
                     "<fixtures-dir> <golden-report> <workdir>\n";
        return 2;
    }
    const fs::path sertest_bin = argv[1];
    const fs::path demo_model = argv[2];
    const fs::path demo_data = argv[3];
    const fs::path fixtures = argv[4];
    const fs::path golden = argv[5];
    const fs::path workdir = argv[6];
    fs::create_directories(workdir);

    criterion_bin_floor();
    criterion_monte_carlo();
    criterion_metric_oracles();
    criterion_js_endpoints();
    criterion_dsp();
    criterion_fairness_sanity();
    criterion_robustness_identity(workdir);
    criterion_registry_fidelity();
    criterion_golden_run(sertest_bin, demo_model, demo_data, fixtures, golden, workdir);
    criterion_balancing();

    if (failures == 0) {
        std::cout << "all criteria passed\n";
        return 0;
    }
    std::cout << failures << " criterion(s) failed\n";
    return 1;
}
