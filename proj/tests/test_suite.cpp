#include "sertest/suite.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

#include "doctest.h"
#include "sertest/metrics.hpp"
#include "sertest/random.hpp"

using namespace sertest;
using namespace sertest::suite;

namespace {

const TestSpec* find_spec(const std::vector<TestSpec>& specs, const std::string& test, Task task,
                          const std::string& metric, const std::string& variant = {}) {
    for (const auto& s : specs) {
        if (s.test != test || s.task != task || s.metric != metric) continue;
        if (!variant.empty() && (!s.perturbation || s.perturbation->name != variant)) continue;
        return &s;
    }
    return nullptr;
}

/// In-memory fixture: one manifest + per-task predictions.
struct Fixture {
    std::map<std::string, DatasetManifest> manifests;
    std::map<std::pair<std::string, Task>, PredictionSet> predictions;

    EvalContext context() const {
        EvalContext ctx;
        ctx.manifest = [this](const std::string& name) -> const DatasetManifest* {
            auto it = manifests.find(name);
            return it == manifests.end() ? nullptr : &it->second;
        };
        ctx.predictions = [this](const std::string& dataset, Task task) -> const PredictionSet* {
            auto it = predictions.find({dataset, task});
            return it == predictions.end() ? nullptr : &it->second;
        };
        ctx.thresholds = &sim::ThresholdTable::bundled();
        ctx.seed = 7;
        return ctx;
    }
};

TestSpec basic_spec(const std::string& test, Category category, Task task,
                    const std::string& metric, Comparison comparison, double threshold,
                    std::vector<std::string> datasets = {"d"}) {
    TestSpec spec;
    spec.id = test + "/" + to_string(task) + "/" + metric;
    spec.test = test;
    spec.category = category;
    spec.task = task;
    spec.metric = metric;
    spec.comparison = comparison;
    spec.threshold = threshold;
    spec.datasets = std::move(datasets);
    return spec;
}

}  // namespace

TEST_CASE("default registry reproduces the catalogued conditions") {
    const auto specs = default_registry();

    const auto* ccc = find_spec(specs, "Correctness Regression", Task::arousal, "CCC");
    REQUIRE(ccc);
    CHECK(ccc->comparison == Comparison::greater);
    CHECK(ccc->threshold == 0.5);

    const auto* mae = find_spec(specs, "Correctness Regression", Task::valence, "MAE");
    REQUIRE(mae);
    CHECK(mae->comparison == Comparison::less);
    CHECK(mae->threshold == 0.1);

    const auto* sex_uar = find_spec(specs, "Fairness Sex", Task::categories, "Diff. UAR");
    REQUIRE(sex_uar);
    CHECK(sex_uar->comparison == Comparison::abs_less);
    CHECK(sex_uar->threshold == 0.075);

    const auto* tilt_uar =
        find_spec(specs, "Robustness Spectral Tilt", Task::categories, "Change UAR", "tilt-up");
    REQUIRE(tilt_uar);
    CHECK(tilt_uar->comparison == Comparison::greater);
    CHECK(tilt_uar->threshold == -0.02);

    // Unchanged-prediction thresholds: 0.9 / 0.5 / 0.8 / 0.8 / 0.95 / 0.8.
    CHECK(find_spec(specs, "Robustness Background Noise", Task::arousal,
                    "Perc. Unchanged Predictions", "babble")
              ->threshold == 0.9);
    CHECK(find_spec(specs, "Robustness Low Quality Phone", Task::arousal,
                    "Perc. Unchanged Predictions", "phone")
              ->threshold == 0.5);
    CHECK(find_spec(specs, "Robustness Rec. Condition", Task::arousal,
                    "Perc. Unchanged Predictions", "boundary-mic")
              ->threshold == 0.8);
    CHECK(find_spec(specs, "Robustness Sim. Rec. Condition", Task::arousal,
                    "Perc. Unchanged Predictions", "ir-position")
              ->threshold == 0.8);
    CHECK(find_spec(specs, "Robustness Small Changes", Task::arousal,
                    "Perc. Unchanged Predictions", "gain")
              ->threshold == 0.95);
    CHECK(find_spec(specs, "Robustness Spectral Tilt", Task::valence,
                    "Perc. Unchanged Predictions", "tilt-down")
              ->threshold == 0.8);

    // Fairness Pitch dimensional lookup: Diff. CCC under 0.1.
    const auto* pitch_ccc = find_spec(specs, "Fairness Pitch", Task::valence, "Diff. CCC");
    REQUIRE(pitch_ccc);
    CHECK(pitch_ccc->comparison == Comparison::abs_less);
    CHECK(pitch_ccc->threshold == 0.1);
    CHECK(pitch_ccc->balance_n == 1000);

    // Accent per-bin rows carry the small-group bin floor.
    const auto* accent_bin =
        find_spec(specs, "Fairness Accent", Task::valence, "Relative Diff. Per Bin");
    REQUIRE(accent_bin);
    CHECK(accent_bin->n_min == 4);
    CHECK(accent_bin->threshold == 0.225);
    const auto* language_bin =
        find_spec(specs, "Fairness Language", Task::valence, "Relative Diff. Per Bin");
    REQUIRE(language_bin);
    CHECK(language_bin->n_min == 67);

    // Classification correctness covers all four metrics over ten sets.
    for (const char* metric : {"PPC", "RPC", "UAP", "UAR"}) {
        const auto* spec =
            find_spec(specs, "Correctness Classification", Task::categories, metric);
        REQUIRE(spec);
        CHECK(spec->threshold == 0.5);
        CHECK(spec->datasets.size() == 10);
    }

    // Every spec id is unique.
    std::set<std::string> ids;
    for (const auto& s : specs) CHECK(ids.insert(s.id).second);
}

TEST_CASE("registry file round trip and parse errors") {
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "sertest-registry.json";
    const auto specs = default_registry();
    save_registry(specs, path);
    const auto loaded = load_registry(path);
    REQUIRE(loaded.size() == specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        CHECK(loaded[i].id == specs[i].id);
        CHECK(loaded[i].threshold == specs[i].threshold);
        CHECK(loaded[i].comparison == specs[i].comparison);
        CHECK(loaded[i].datasets == specs[i].datasets);
        CHECK(loaded[i].n_min == specs[i].n_min);
        CHECK(loaded[i].balance_n == specs[i].balance_n);
    }
    CHECK(registry_hash(loaded) == registry_hash(specs));

    const auto bad = fs::temp_directory_path() / "sertest-registry-bad.json";
    std::ofstream(bad) << R"({"tests":[{"id":"x","test":"T","category":"correctness",)"
                       << R"("task":"arousal","metric":"CCC","datasets":[],)"
                       << R"("comparison":"greater","threshold":0.5},{"id":"y"}]})";
    CHECK_THROWS_WITH_AS(load_registry(bad), doctest::Contains("row 1"), ParseError);
}

TEST_CASE("expected range table") {
    const auto anger_arousal = expected_range("anger", Task::arousal);
    REQUIRE(anger_arousal);
    CHECK(anger_arousal->first == 0.55);
    CHECK(anger_arousal->second == 1.0);
    CHECK(!expected_range("happiness", Task::arousal).has_value());
    const auto neutral_valence = expected_range("neutral", Task::valence);
    REQUIRE(neutral_valence);
    CHECK(neutral_valence->first == 0.3);
    CHECK(neutral_valence->second == 0.6);
    CHECK(!expected_range("curiosity", Task::valence).has_value());
}

TEST_CASE("pitch groups") {
    CHECK(pitch_group_assign(140.0) == PitchGroup::low);
    CHECK(pitch_group_assign(145.0) == PitchGroup::low);
    CHECK(pitch_group_assign(160.0) == PitchGroup::medium);
    CHECK(pitch_group_assign(190.0) == PitchGroup::medium);
    CHECK(pitch_group_assign(200.0) == PitchGroup::high);
}

TEST_CASE("pitch partition excludes sparse speakers and outliers") {
    DatasetManifest manifest;
    manifest.name = "p";
    auto add_speaker = [&](const std::string& speaker, double f0, int count) {
        for (int i = 0; i < count; ++i) {
            Sample s;
            s.id = speaker + "-" + std::to_string(i);
            s.speaker = speaker;
            s.attrs.emplace("mean_f0_hz", AttrValue::of(f0));
            manifest.samples.push_back(std::move(s));
        }
    };
    add_speaker("low", 120.0, 30);
    add_speaker("high", 220.0, 30);
    add_speaker("sparse", 150.0, 10);  // fewer than 25 samples
    const auto partition = pitch_partition(manifest);
    CHECK(partition.groups.at("low").size() == 30);
    CHECK(partition.groups.at("high").size() == 30);
    CHECK(!partition.groups.count("medium"));
    CHECK(partition.excluded.size() == 10);
}

TEST_CASE("comparison semantics") {
    CHECK(compare(0.62, Comparison::greater, 0.5));
    CHECK(!compare(0.5, Comparison::greater, 0.5));
    CHECK(compare(0.05, Comparison::less, 0.1));
    CHECK(compare(-0.07, Comparison::abs_less, 0.075));
    CHECK(!compare(-0.10, Comparison::abs_less, 0.075));
    CHECK(compare(-0.9, Comparison::abs_greater, 0.7));
}

TEST_CASE("correctness regression evaluation") {
    Fixture fx;
    DatasetManifest manifest;
    manifest.name = "d";
    PredictionSet preds;
    preds.task = Task::valence;
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        Sample s;
        s.id = "s" + std::to_string(i);
        const double truth = 0.1 + 0.8 * i / 49.0;
        s.gold.emplace(Task::valence, Label::of_value(truth));
        manifest.samples.push_back(std::move(s));
        const double pred = std::clamp(truth + 0.05 * rng.normal(), 0.0, 1.0);
        preds.predictions.emplace("s" + std::to_string(i), Label::of_value(pred));
    }
    fx.manifests["d"] = manifest;
    fx.predictions[{"d", Task::valence}] = preds;
    const auto ctx = fx.context();

    auto spec = basic_spec("Correctness Regression", Category::correctness, Task::valence, "CCC",
                           Comparison::greater, 0.5);
    const auto result = evaluate_test(spec, ctx);
    REQUIRE(result.instances.size() == 1);
    CHECK(result.instances[0].passed);
    CHECK(result.instances[0].value > 0.9);
    CHECK(result.pass_fraction == 1.0);

    // Rerunning yields identical results.
    const auto again = evaluate_test(spec, ctx);
    CHECK(again.instances[0].value == result.instances[0].value);

    // Unbound datasets are reported as skipped, not crashed.
    spec.datasets = {"d", "missing"};
    const auto partial = evaluate_test(spec, ctx);
    REQUIRE(partial.instances.size() == 2);
    CHECK(partial.instances[1].skipped);
    CHECK(partial.n_skipped == 1);
}

TEST_CASE("speaker prerequisites skip the instance") {
    Fixture fx;
    DatasetManifest manifest;
    manifest.name = "d";
    PredictionSet preds;
    preds.task = Task::valence;
    for (int spk = 0; spk < 5; ++spk)
        for (int i = 0; i < 12; ++i) {
            Sample s;
            s.id = "s" + std::to_string(spk) + "_" + std::to_string(i);
            s.speaker = "spk" + std::to_string(spk);
            s.gold.emplace(Task::valence, Label::of_value(0.3 + 0.1 * spk));
            preds.predictions.emplace(s.id, Label::of_value(0.35 + 0.1 * spk));
            manifest.samples.push_back(std::move(s));
        }
    fx.manifests["d"] = manifest;
    fx.predictions[{"d", Task::valence}] = preds;

    const auto spec = basic_spec("Correctness Speaker Average", Category::correctness,
                                 Task::valence, "MAE", Comparison::less, 0.1);
    const auto result = evaluate_test(spec, fx.context());
    REQUIRE(result.instances.size() == 1);
    CHECK(result.instances[0].skipped);
    CHECK(result.instances[0].reason.find("5 qualifying") != std::string::npos);
}

namespace {

/// Dataset with two groups whose (truth, prediction) multisets are exact
/// copies, so every group metric equals the pool metric.
Fixture identical_groups_fixture(Task task, int per_group, std::uint64_t seed) {
    Fixture fx;
    DatasetManifest manifest;
    manifest.name = "d";
    PredictionSet vpreds, cpreds;
    vpreds.task = Task::valence;
    cpreds.task = Task::categories;
    Rng rng(seed);
    const char* classes[4] = {"anger", "happiness", "neutral", "sadness"};
    for (int i = 0; i < per_group; ++i) {
        // unique truth values so nearest-neighbour matching is exact
        const double truth = (i + 0.5) / per_group;
        const double pred = std::clamp(truth + 0.1 * rng.normal(), 0.0, 1.0);
        const char* cls_truth = classes[i % 4];
        const char* cls_pred = classes[(i + (i % 5 == 0 ? 1 : 0)) % 4];
        for (const std::string group : {"g1", "g2"}) {
            Sample s;
            s.id = group + "-" + std::to_string(i);
            s.attrs.emplace("grp", AttrValue::of(group));
            s.gold.emplace(Task::valence, Label::of_value(truth));
            s.gold.emplace(Task::categories, Label::of_class(cls_truth));
            vpreds.predictions.emplace(s.id, Label::of_value(pred));
            cpreds.predictions.emplace(s.id, Label::of_class(cls_pred));
            manifest.samples.push_back(std::move(s));
        }
    }
    fx.manifests["d"] = manifest;
    fx.predictions[{"d", Task::valence}] = vpreds;
    fx.predictions[{"d", Task::categories}] = cpreds;
    (void)task;
    return fx;
}

}  // namespace

TEST_CASE("fairness: groups identical to the pool always pass") {
    const auto fx = identical_groups_fixture(Task::valence, 120, 17);
    const auto ctx = fx.context();

    auto check_all_zero_and_pass = [&](TestSpec spec) {
        spec.grouping = "grp";
        const auto result = evaluate_test(spec, ctx);
        bool any = false;
        for (const auto& inst : result.instances) {
            if (inst.skipped) continue;
            any = true;
            CHECK(inst.value == doctest::Approx(0.0).epsilon(1e-12));
            CHECK(inst.passed);
        }
        CHECK(any);
        CHECK(result.n_failed == 0);
    };

    check_all_zero_and_pass(basic_spec("Fairness X", Category::fairness, Task::valence,
                                       "Diff. Mean Value", Comparison::abs_less, 0.075));
    check_all_zero_and_pass(basic_spec("Fairness X", Category::fairness, Task::valence,
                                       "Diff. CCC", Comparison::abs_less, 0.075));
    auto bins = basic_spec("Fairness X", Category::fairness, Task::valence,
                           "Relative Diff. Per Bin", Comparison::abs_less, 0.1);
    bins.bin_spec = BinSpec{4};
    bins.n_min = 2;
    check_all_zero_and_pass(bins);
    auto recall = basic_spec("Fairness X", Category::fairness, Task::valence,
                             "Diff. Recall Per Bin", Comparison::abs_less, 0.1);
    recall.bin_spec = BinSpec{4};
    recall.n_min = 2;
    check_all_zero_and_pass(recall);
    check_all_zero_and_pass(basic_spec("Fairness X", Category::fairness, Task::categories,
                                       "Diff. UAR", Comparison::abs_less, 0.075));
    check_all_zero_and_pass(basic_spec("Fairness X", Category::fairness, Task::categories,
                                       "Diff. RPC", Comparison::abs_less, 0.175));
    check_all_zero_and_pass(basic_spec("Fairness X", Category::fairness, Task::categories,
                                       "Relative Diff. Per Class", Comparison::abs_less, 0.1));

    // With balancing enabled the exact-copy structure survives.
    auto balanced = basic_spec("Fairness X", Category::fairness, Task::valence, "Diff. CCC",
                               Comparison::abs_less, 0.075);
    balanced.grouping = "grp";
    balanced.balance_n = 120;
    const auto result = evaluate_test(balanced, ctx);
    for (const auto& inst : result.instances) {
        CHECK(!inst.skipped);
        CHECK(inst.value == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("fairness: a degraded group fails") {
    Fixture fx;
    DatasetManifest manifest;
    manifest.name = "d";
    PredictionSet preds;
    preds.task = Task::categories;
    const char* classes[2] = {"anger", "neutral"};
    for (int i = 0; i < 200; ++i) {
        Sample s;
        s.id = "s" + std::to_string(i);
        const bool first_group = i < 100;
        s.attrs.emplace("grp", AttrValue::of(std::string(first_group ? "good" : "bad")));
        const char* truth = classes[i % 2];
        s.gold.emplace(Task::categories, Label::of_class(truth));
        // good group: always right; bad group: wrong 40% of the time
        const char* pred = first_group ? truth : (i % 5 < 2 ? classes[(i + 1) % 2] : truth);
        preds.predictions.emplace(s.id, Label::of_class(pred));
        manifest.samples.push_back(std::move(s));
    }
    fx.manifests["d"] = manifest;
    fx.predictions[{"d", Task::categories}] = preds;

    auto spec = basic_spec("Fairness X", Category::fairness, Task::categories, "Diff. UAR",
                           Comparison::abs_less, 0.075);
    spec.grouping = "grp";
    const auto result = evaluate_test(spec, fx.context());
    REQUIRE(result.instances.size() == 2);
    CHECK(result.n_failed == 2);  // both groups sit ~0.2 away from the pool
    for (const auto& inst : result.instances) CHECK(std::abs(inst.value) > 0.075);
}

TEST_CASE("fairness sentiment evaluation") {
    Fixture fx;
    DatasetManifest manifest;
    manifest.name = "d";
    PredictionSet preds;
    preds.task = Task::valence;
    int counter = 0;
    auto add_cell = [&](const std::string& lang, const std::string& sent, double mean) {
        for (int i = 0; i < 20; ++i) {
            Sample s;
            s.id = "s" + std::to_string(counter++);
            s.attrs.emplace("language", AttrValue::of(lang));
            s.attrs.emplace("sentiment", AttrValue::of(sent));
            preds.predictions.emplace(
                s.id, Label::of_value(std::clamp(mean + 0.01 * (i - 10), 0.0, 1.0)));
            manifest.samples.push_back(std::move(s));
        }
    };
    // Sentiment moves both languages the same way: scores cancel.
    add_cell("de", "negative", 0.4);
    add_cell("de", "positive", 0.6);
    add_cell("en", "negative", 0.4);
    add_cell("en", "positive", 0.6);
    fx.manifests["d"] = manifest;
    fx.predictions[{"d", Task::valence}] = preds;

    auto spec = basic_spec("Fairness Linguistic Sentiment", Category::fairness, Task::valence,
                           "Diff. Mean Shift", Comparison::abs_less, 0.025);
    spec.grouping = "sentiment";
    const auto result = evaluate_test(spec, fx.context());
    CHECK(result.instances.size() == 4);
    for (const auto& inst : result.instances) {
        CHECK(!inst.skipped);
        CHECK(inst.value == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(inst.passed);
    }
}

TEST_CASE("robustness evaluation") {
    Fixture fx;
    DatasetManifest manifest;
    manifest.name = "d";
    PredictionSet clean;
    clean.task = Task::valence;
    Rng rng(5);
    for (int i = 0; i < 40; ++i) {
        Sample s;
        s.id = "s" + std::to_string(i);
        s.gold.emplace(Task::valence, Label::of_value((i + 0.5) / 40.0));
        clean.predictions.emplace(s.id, Label::of_value((i + 0.5) / 40.0));
        manifest.samples.push_back(std::move(s));
    }
    fx.manifests["d"] = manifest;
    fx.predictions[{"d", Task::valence}] = clean;

    auto spec = basic_spec("Robustness X", Category::robustness, Task::valence,
                           "Perc. Unchanged Predictions", Comparison::greater, 0.95);
    perturb::PerturbationSpec pspec;
    pspec.name = "identity";
    pspec.kind = "gain";
    pspec.params = {{"db", 0.0}};
    spec.perturbation = pspec;

    SUBCASE("identical perturbed predictions pass everything") {
        auto ctx = fx.context();
        ctx.robustness = [&](const TestSpec&, const std::string&) {
            RobustnessData data;
            data.baseline = &fx.predictions.at({"d", Task::valence});
            data.variants.emplace_back("identity", data.baseline);
            return data;
        };
        const auto unchanged = evaluate_test(spec, ctx);
        REQUIRE(unchanged.instances.size() == 1);
        CHECK(unchanged.instances[0].value == 1.0);
        CHECK(unchanged.instances[0].passed);

        auto change = basic_spec("Robustness X", Category::robustness, Task::valence,
                                 "Change CCC", Comparison::greater, -0.05);
        change.perturbation = pspec;
        const auto change_result = evaluate_test(change, ctx);
        REQUIRE(change_result.instances.size() == 1);
        CHECK(change_result.instances[0].value == 0.0);
        CHECK(change_result.instances[0].passed);
    }
    SUBCASE("a perturbed set that moved everything fails") {
        PredictionSet moved;
        moved.task = Task::valence;
        for (const auto& [id, label] : clean.predictions)
            moved.predictions.emplace(id, Label::of_value(std::min(1.0, label.value() + 0.2)));
        auto ctx = fx.context();
        ctx.robustness = [&](const TestSpec&, const std::string&) {
            RobustnessData data;
            data.baseline = &fx.predictions.at({"d", Task::valence});
            data.variants.emplace_back("moved", &moved);
            return data;
        };
        const auto result = evaluate_test(spec, ctx);
        CHECK(result.instances[0].value < 0.2);
        CHECK(!result.instances[0].passed);
    }
    SUBCASE("missing robustness data skips") {
        auto ctx = fx.context();
        ctx.robustness = [](const TestSpec&, const std::string&) {
            RobustnessData data;
            data.skip_reason = "noise pool not bound";
            return data;
        };
        const auto result = evaluate_test(spec, ctx);
        CHECK(result.instances[0].skipped);
        CHECK(result.n_skipped == 1);
    }
}

TEST_CASE("aggregation") {
    auto make_result = [](const std::string& test, Task task, Category category, long passed,
                          long failed, long skipped) {
        TestResult r;
        r.spec_id = test + "#spec";
        r.test = test;
        r.task = task;
        r.category = category;
        for (long i = 0; i < passed; ++i) {
            Instance inst;
            inst.passed = true;
            r.instances.push_back(inst);
        }
        for (long i = 0; i < failed; ++i) r.instances.push_back(Instance{});
        for (long i = 0; i < skipped; ++i) {
            Instance inst;
            inst.skipped = true;
            r.instances.push_back(inst);
        }
        r.finalize();
        return r;
    };

    SUBCASE("skipped instances leave the denominator") {
        const auto r = make_result("T", Task::arousal, Category::correctness, 6, 2, 4);
        CHECK(r.pass_fraction == doctest::Approx(0.75));
    }
    SUBCASE("category mean ignores instance counts") {
        std::vector<TestResult> results = {
            make_result("A", Task::arousal, Category::correctness, 100, 0, 0),
            make_result("B", Task::arousal, Category::correctness, 1, 1, 0),
        };
        const auto agg = aggregate(results);
        CHECK(agg.per_category.at({Task::arousal, Category::correctness}) ==
              doctest::Approx(0.75));
        CHECK(agg.per_task.at(Task::arousal) == doctest::Approx(0.75));
        CHECK(agg.overall == doctest::Approx(0.75));
    }
    SUBCASE("fully skipped tests are excluded") {
        std::vector<TestResult> results = {
            make_result("A", Task::arousal, Category::correctness, 1, 0, 0),
            make_result("B", Task::arousal, Category::correctness, 0, 0, 5),
        };
        const auto agg = aggregate(results);
        CHECK(agg.per_test.size() == 1);
        CHECK(agg.per_task.at(Task::arousal) == doctest::Approx(1.0));
    }
    SUBCASE("overall averages the task averages") {
        std::vector<TestResult> results = {
            make_result("A", Task::arousal, Category::correctness, 1, 0, 0),
            make_result("B", Task::valence, Category::correctness, 0, 1, 0),
        };
        const auto agg = aggregate(results);
        CHECK(agg.overall == doctest::Approx(0.5));
    }
    SUBCASE("permutation invariance: rows merged by test name") {
        std::vector<TestResult> results = {
            make_result("A", Task::arousal, Category::correctness, 3, 1, 0),
            make_result("A", Task::arousal, Category::correctness, 0, 4, 0),
        };
        const auto forward = aggregate(results);
        std::swap(results[0], results[1]);
        const auto backward = aggregate(results);
        CHECK(forward.per_test.at({Task::arousal, "A"}) == doctest::Approx(3.0 / 8.0));
        CHECK(forward.per_test == backward.per_test);
    }
}

TEST_CASE("threshold resolution") {
    const auto& table = sim::ThresholdTable::bundled();
    CHECK(resolve_fairness_threshold("Diff. Mean Value", 6, 2000, table, false, 7) ==
          doctest::Approx(0.03));
    CHECK(resolve_fairness_threshold("Relative Diff. Per Class", 31, 60, table, false, 7) ==
          doctest::Approx(0.225));

    // Missing entries fall back to a simulation and land in the cache.
    sim::ThresholdTable cache;
    const double simulated =
        resolve_fairness_threshold("Diff. Mean Value", 5, 40, table, true, 7, &cache);
    CHECK(simulated > 0.0);
    CHECK(cache.lookup("diff-mean", 5, 40) == doctest::Approx(simulated));
    // Second resolution is served from the cache (same value).
    CHECK(resolve_fairness_threshold("Diff. Mean Value", 5, 40, table, true, 7, &cache) ==
          doctest::Approx(simulated));
    CHECK_THROWS_AS(resolve_fairness_threshold("Diff. Mean Value", 5, 40, table, false, 7),
                    ValidationError);
}

TEST_CASE("run_suite ordering and dataset binding") {
    auto fx = identical_groups_fixture(Task::valence, 30, 4);
    std::vector<TestSpec> specs;
    specs.push_back(basic_spec("Correctness Regression", Category::correctness, Task::valence,
                               "CCC", Comparison::greater, 0.0));
    auto fair = basic_spec("Fairness X", Category::fairness, Task::valence, "Diff. Mean Value",
                           Comparison::abs_less, 0.075);
    fair.grouping = "grp";
    specs.push_back(fair);
    std::swap(specs[0], specs[1]);  // out of order on purpose

    const auto results = run_suite(specs, fx.context());
    REQUIRE(results.size() == 2);
    CHECK(results[0].category == Category::correctness);
    CHECK(results[1].category == Category::fairness);

    // Removing the dataset removes exactly its instances.
    auto two_sets = basic_spec("Correctness Regression", Category::correctness, Task::valence,
                               "CCC", Comparison::greater, 0.0, {"d", "other"});
    const auto with_missing = evaluate_test(two_sets, fx.context());
    CHECK(with_missing.instances.size() == 2);
    CHECK(with_missing.n_skipped == 1);
}

TEST_CASE("shipped data files match the built-in defaults") {
    const fs::path root = SERTEST_SOURCE_DIR;
    const auto file_specs = load_registry(root / "data" / "registry.json");
    const auto builtin = default_registry();
    CHECK(registry_hash(file_specs) == registry_hash(builtin));

    const auto table = sim::ThresholdTable::load(root / "data" / "thresholds.tsv");
    const auto& bundled = sim::ThresholdTable::bundled();
    REQUIRE(table.entries().size() == bundled.entries().size());
    for (const auto& [key, entry] : bundled.entries()) {
        auto it = table.entries().find(key);
        REQUIRE(it != table.entries().end());
        CHECK(it->second.threshold == entry.threshold);
        // The file also records what the simulation itself produced.
        CHECK(it->second.simulated.has_value());
    }
}

TEST_CASE("auto thresholds resolve per dataset layout") {
    auto fx = identical_groups_fixture(Task::valence, 40, 23);
    auto spec = basic_spec("Fairness Auto", Category::fairness, Task::valence,
                           "Diff. Mean Value", Comparison::abs_less, 0.0);
    spec.grouping = "grp";
    spec.auto_threshold = true;
    sim::ThresholdTable cache;
    auto ctx = fx.context();
    ctx.simulated_cache = &cache;
    const auto result = evaluate_test(spec, ctx);
    REQUIRE(result.instances.size() == 2);
    for (const auto& inst : result.instances) {
        CHECK(inst.threshold > 0.0);  // simulated, not the row's 0.0
        CHECK(inst.passed);           // identical groups have zero disparity
    }
    CHECK(cache.lookup("diff-mean", 2, 40).has_value());
}

TEST_CASE("default registry covers the whole catalogue") {
    const auto specs = default_registry();
    std::map<std::string, std::set<std::string>> variants;  // test -> variant names
    std::set<std::string> tests;
    for (const auto& s : specs) {
        tests.insert(s.test);
        if (s.perturbation) variants[s.test].insert(s.perturbation->name);
    }
    for (const char* name :
         {"Correctness Classification", "Correctness Consistency", "Correctness Distribution",
          "Correctness Regression", "Correctness Speaker Average", "Correctness Speaker Ranking",
          "Fairness Accent", "Fairness Language", "Fairness Linguistic Sentiment",
          "Fairness Pitch", "Fairness Sex", "Robustness Background Noise",
          "Robustness Low Quality Phone", "Robustness Rec. Condition",
          "Robustness Sim. Rec. Condition", "Robustness Small Changes",
          "Robustness Spectral Tilt"})
        CHECK(tests.count(name) == 1);
    CHECK(variants["Robustness Background Noise"].size() == 6);   // babble .. white noise
    CHECK(variants["Robustness Small Changes"].size() == 10);     // tone .. white noise
    CHECK(variants["Robustness Spectral Tilt"].size() == 2);
    CHECK(variants["Robustness Rec. Condition"].size() == 2);
    CHECK(variants["Robustness Sim. Rec. Condition"].size() == 2);

    // Dimensional tests expand over all three dimensions.
    std::set<Task> regression_tasks;
    for (const auto& s : specs)
        if (s.test == "Correctness Regression") regression_tasks.insert(s.task);
    CHECK(regression_tasks ==
          std::set<Task>{Task::arousal, Task::dominance, Task::valence});
}
