#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sertest/adapters.hpp"
#include "sertest/report.hpp"
#include "sertest/random.hpp"

using namespace sertest;
namespace fs = std::filesystem;

namespace {

fs::path write_script(const std::string& name, const std::string& body) {
    const fs::path path = fs::temp_directory_path() / name;
    std::ofstream out(path);
    out << "#!/bin/sh\n" << body;
    out.close();
    fs::permissions(path, fs::perms::owner_all, fs::perm_options::add);
    return path;
}

std::vector<std::pair<std::string, std::string>> fake_paths(int n) {
    std::vector<std::pair<std::string, std::string>> out;
    for (int i = 0; i < n; ++i)
        out.emplace_back("s" + std::to_string(i), "/nowhere/s" + std::to_string(i) + ".wav");
    return out;
}

/// In-process stand-in: value is a fixed function of the audio content.
struct FakeAdapter final : adapters::ModelAdapter {
    std::string id = "fake";
    PredictionSet predict(Task task,
                          const std::vector<std::pair<std::string, std::string>>& id_paths)
        override {
        PredictionSet set;
        set.model_id = id;
        set.task = task;
        for (const auto& [sample_id, path] : id_paths) {
            const auto buffer = audio::read_wav(path);
            double acc = 0.0;
            for (double s : buffer.samples) acc += s;
            const double value = 1.0 / (1.0 + std::exp(-50.0 * acc / buffer.samples.size()));
            if (is_dimensional(task))
                set.predictions.emplace(sample_id, Label::of_value(value));
            else
                set.predictions.emplace(sample_id,
                                        Label::of_class(value > 0.5 ? "anger" : "neutral"));
        }
        return set;
    }
    const std::string& model_id() const override { return id; }
    bool answers(Task) const override { return true; }
};

struct TempDataset {
    fs::path dir;
    DatasetManifest manifest;

    explicit TempDataset(const std::string& name, int n, std::uint64_t seed) {
        dir = fs::temp_directory_path() / name;
        fs::create_directories(dir);
        manifest.name = name;
        Rng rng(seed);
        for (int i = 0; i < n; ++i) {
            audio::AudioBuffer buffer;
            buffer.rate_hz = 8000;
            buffer.samples.resize(2000);
            for (auto& s : buffer.samples) s = 0.1 * rng.normal() + 0.001 * i;
            Sample s;
            s.id = "s" + std::to_string(i);
            s.audio_path = (dir / (s.id + ".wav")).string();
            audio::write_wav(buffer, s.audio_path);
            manifest.samples.push_back(std::move(s));
        }
    }
};

}  // namespace

TEST_CASE("subprocess prediction protocol") {
    SUBCASE("echo-style double answers every id") {
        const auto script = write_script("sertest-echo.sh",
                                         "while read p; do\n"
                                         "  b=$(basename \"$p\"); b=${b%.wav}\n"
                                         "  printf '{\"id\":\"%s\",\"value\":0.5}\\n' \"$b\"\n"
                                         "done\n");
        adapters::SubprocessConfig config;
        config.command = script.string();
        const auto preds =
            adapters::predict_subprocess(config, Task::valence, fake_paths(5), "m");
        CHECK(preds.predictions.size() == 5);
        for (const auto& [id, label] : preds.predictions) CHECK(label.value() == 0.5);
    }
    SUBCASE("nonzero exit carries diagnostics") {
        const auto script =
            write_script("sertest-fail.sh", "echo boom-diagnostic >&2\nexit 1\n");
        adapters::SubprocessConfig config;
        config.command = script.string();
        CHECK_THROWS_WITH_AS(
            adapters::predict_subprocess(config, Task::valence, fake_paths(2), "m"),
            doctest::Contains("boom-diagnostic"), std::runtime_error);
    }
    SUBCASE("missing ids are listed") {
        const auto script = write_script("sertest-partial.sh",
                                         "first=1\n"
                                         "while read p; do\n"
                                         "  if [ $first = 1 ]; then first=0; continue; fi\n"
                                         "  b=$(basename \"$p\"); b=${b%.wav}\n"
                                         "  printf '{\"id\":\"%s\",\"value\":0.5}\\n' \"$b\"\n"
                                         "done\n");
        adapters::SubprocessConfig config;
        config.command = script.string();
        CHECK_THROWS_WITH_AS(
            adapters::predict_subprocess(config, Task::valence, fake_paths(3), "m"),
            doctest::Contains("s0"), std::runtime_error);
    }
    SUBCASE("malformed output is an error") {
        const auto script = write_script("sertest-garbage.sh", "echo 'not json'\n");
        adapters::SubprocessConfig config;
        config.command = script.string();
        CHECK_THROWS_AS(adapters::predict_subprocess(config, Task::valence, fake_paths(1), "m"),
                        std::runtime_error);
    }
    SUBCASE("timeout kills the command") {
        adapters::SubprocessConfig config;
        config.command = "sleep 30";
        config.timeout_s = 0.2;
        CHECK_THROWS_WITH_AS(
            adapters::predict_subprocess(config, Task::valence, fake_paths(1), "m"),
            doctest::Contains("timed out"), std::runtime_error);
    }
    SUBCASE("a command that exits without reading its input is a plain error") {
        adapters::SubprocessConfig config;
        config.command = "exit 3";
        // Enough paths that the pipe buffer cannot absorb them all.
        CHECK_THROWS_WITH_AS(
            adapters::predict_subprocess(config, Task::valence, fake_paths(20000), "m"),
            doctest::Contains("status 3"), std::runtime_error);
    }
}

TEST_CASE("prediction cache and perturbed prediction flow") {
    const TempDataset data("sertest-adapter-data", 6, 99);
    const fs::path workdir = fs::temp_directory_path() / "sertest-adapter-work";
    fs::remove_all(workdir);
    FakeAdapter adapter;
    const perturb::AssetStore assets;

    perturb::PerturbationSpec identity;
    identity.name = "identity";
    identity.kind = "gain";
    identity.params = {{"db", 0.0}};
    identity.seed = 11;

    adapters::PredictionCache cache(workdir / "cache", true);

    SUBCASE("identity perturbation reproduces the clean predictions") {
        std::vector<std::pair<std::string, std::string>> id_paths;
        for (const auto& s : data.manifest.samples) id_paths.emplace_back(s.id, s.audio_path);
        const auto clean = adapter.predict(Task::valence, id_paths);
        const auto perturbed = adapters::predict_perturbed(adapter, data.manifest, identity,
                                                           Task::valence, workdir, cache, assets);
        for (const auto& [id, label] : clean.predictions)
            CHECK(perturbed.predictions.at(id).value() == label.value());
    }
    SUBCASE("identical spec+seed is served from the cache without re-rendering") {
        const auto first = adapters::predict_perturbed(adapter, data.manifest, identity,
                                                       Task::valence, workdir, cache, assets);
        // Remove the rendered audio; a cache hit must not need it.
        fs::remove_all(workdir / "audio");
        const auto second = adapters::predict_perturbed(adapter, data.manifest, identity,
                                                        Task::valence, workdir, cache, assets);
        CHECK(!fs::exists(workdir / "audio"));
        REQUIRE(second.predictions.size() == first.predictions.size());
        for (const auto& [id, label] : first.predictions)
            CHECK(second.predictions.at(id).value() == label.value());
    }
    SUBCASE("disabled cache renders again but stays deterministic") {
        adapters::PredictionCache off(workdir / "cache-off", false);
        const auto first = adapters::predict_perturbed(adapter, data.manifest, identity,
                                                       Task::valence, workdir, off, assets);
        fs::remove_all(workdir / "audio");
        const auto second = adapters::predict_perturbed(adapter, data.manifest, identity,
                                                        Task::valence, workdir, off, assets);
        CHECK(fs::exists(workdir / "audio"));
        for (const auto& [id, label] : first.predictions)
            CHECK(second.predictions.at(id).value() == label.value());
    }
}

TEST_CASE("file prediction provider layout") {
    const fs::path root = fs::temp_directory_path() / "sertest-file-preds";
    fs::remove_all(root);
    fs::create_directories(root / "d");
    fs::create_directories(root / "d__boundary");
    auto write_preds = [](const fs::path& path, double value) {
        std::ofstream out(path);
        out << R"({"id":"s0","value":)" << value << "}\n";
        out << R"({"id":"s1","value":)" << value << "}\n";
    };
    write_preds(root / "d" / "valence.jsonl", 0.5);
    write_preds(root / "d" / "valence__gain.jsonl", 0.52);
    write_preds(root / "d__boundary" / "valence.jsonl", 0.55);

    adapters::FilePredictionProvider provider(root, "m");
    const auto* clean = provider.clean("d", Task::valence);
    REQUIRE(clean);
    CHECK(clean->predictions.at("s0").value() == 0.5);
    CHECK(provider.clean("d", Task::arousal) == nullptr);

    suite::TestSpec spec;
    spec.task = Task::valence;
    spec.category = suite::Category::robustness;
    perturb::PerturbationSpec pspec;
    pspec.name = "gain";
    pspec.kind = "gain";
    spec.perturbation = pspec;
    const auto plain = provider.robustness(spec, "d");
    REQUIRE(plain.skip_reason.empty());
    CHECK(plain.variants.size() == 1);
    CHECK(plain.variants[0].second->predictions.at("s0").value() == 0.52);

    spec.perturbation->kind = "recorded";
    spec.perturbation->params = {{"role", "boundary"}};
    const auto recorded = provider.robustness(spec, "d");
    REQUIRE(recorded.skip_reason.empty());
    CHECK(recorded.variants[0].second->predictions.at("s0").value() == 0.55);

    spec.perturbation->params = {{"role", "mobile"}};
    const auto missing = provider.robustness(spec, "d");
    CHECK(!missing.skip_reason.empty());
}

namespace {

report::RunReport tiny_report() {
    report::RunReport run;
    run.model_id = "m";
    run.seed = 9;
    run.registry_hash = "abc";
    run.thresholds_hash = "def";
    run.tasks = {Task::valence};
    suite::TestResult r;
    r.spec_id = "t/valence/ccc";
    r.test = "T";
    r.category = suite::Category::correctness;
    r.task = Task::valence;
    r.metric = "CCC";
    r.comparison = suite::Comparison::greater;
    suite::Instance pass;
    pass.dataset = "d";
    pass.value = 0.7;
    pass.threshold = 0.5;
    pass.passed = true;
    pass.info["n"] = 12.0;
    suite::Instance skip;
    skip.dataset = "e";
    skip.skipped = true;
    skip.reason = "dataset not bound";
    r.instances = {pass, skip};
    r.finalize();
    run.results = {r};
    run.aggregates = suite::aggregate(run.results);
    return run;
}

}  // namespace

TEST_CASE("structured reports round trip") {
    const auto run = tiny_report();
    const std::string text = report::render_structured(run);
    const auto parsed = report::parse_structured(text);
    CHECK(parsed == run);
    CHECK(report::render_structured(parsed) == text);
}

TEST_CASE("human report lists every test with its fraction") {
    const auto run = tiny_report();
    const std::string text = report::render_human(run);
    CHECK(text.find("T [valence]") != std::string::npos);
    CHECK(text.find("1.000") != std::string::npos);
    CHECK(text.find("model: m") != std::string::npos);
}

TEST_CASE("aggregate tampering is refused") {
    auto run = tiny_report();
    run.aggregates.overall = 0.123;
    CHECK_THROWS_AS(report::render_structured(run), ValidationError);
}

TEST_CASE("reports compare only with matching hashes") {
    const auto a = tiny_report();
    auto b = tiny_report();
    CHECK(report::comparable(a, b));
    b.registry_hash = "zzz";
    CHECK(!report::comparable(a, b));
}
