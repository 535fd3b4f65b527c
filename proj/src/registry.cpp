#include <cmath>
#include <fstream>

#include "json.hpp"
#include "sertest/random.hpp"
#include "sertest/suite.hpp"

using nlohmann::json;

namespace sertest::suite {

const char* to_string(Category c) {
    switch (c) {
        case Category::correctness: return "correctness";
        case Category::fairness: return "fairness";
        case Category::robustness: return "robustness";
    }
    return "?";
}

Category category_from_string(const std::string& s) {
    if (s == "correctness") return Category::correctness;
    if (s == "fairness") return Category::fairness;
    if (s == "robustness") return Category::robustness;
    throw ValidationError("unknown category: '" + s + "'");
}

const char* to_string(Comparison c) {
    switch (c) {
        case Comparison::greater: return "greater";
        case Comparison::less: return "less";
        case Comparison::abs_less: return "abs_less";
        case Comparison::abs_greater: return "abs_greater";
    }
    return "?";
}

Comparison comparison_from_string(const std::string& s) {
    if (s == "greater") return Comparison::greater;
    if (s == "less") return Comparison::less;
    if (s == "abs_less") return Comparison::abs_less;
    if (s == "abs_greater") return Comparison::abs_greater;
    throw ValidationError("unknown comparison: '" + s + "'");
}

bool compare(double value, Comparison comparison, double threshold) {
    switch (comparison) {
        case Comparison::greater: return value > threshold;
        case Comparison::less: return value < threshold;
        case Comparison::abs_less: return std::abs(value) < threshold;
        case Comparison::abs_greater: return std::abs(value) > threshold;
    }
    return false;
}

std::optional<std::pair<double, double>> expected_range(const std::string& category,
                                                        Task dimension) {
    static constexpr std::pair<double, double> kLow{0.0, 0.45};
    static constexpr std::pair<double, double> kNeutral{0.3, 0.6};
    static constexpr std::pair<double, double> kHigh{0.55, 1.0};
    // category -> {valence, arousal, dominance}; nullopt = no established
    // correspondence.
    using Cell = std::optional<std::pair<double, double>>;
    static const std::map<std::string, std::array<Cell, 3>> table = {
        {"anger", {Cell{kLow}, Cell{kHigh}, Cell{kHigh}}},
        {"boredom", {Cell{kNeutral}, Cell{kLow}, Cell{}}},
        {"disgust", {Cell{kLow}, Cell{}, Cell{}}},
        {"fear", {Cell{kLow}, Cell{kHigh}, Cell{kLow}}},
        {"frustration", {Cell{kLow}, Cell{}, Cell{}}},
        {"happiness", {Cell{kHigh}, Cell{}, Cell{kNeutral}}},
        {"neutral", {Cell{kNeutral}, Cell{kNeutral}, Cell{kNeutral}}},
        {"sadness", {Cell{kLow}, Cell{kLow}, Cell{kLow}}},
        {"surprise", {Cell{}, Cell{kHigh}, Cell{kNeutral}}},
    };
    auto it = table.find(category);
    if (it == table.end()) return std::nullopt;
    switch (dimension) {
        case Task::valence: return it->second[0];
        case Task::arousal: return it->second[1];
        case Task::dominance: return it->second[2];
        case Task::categories: break;
    }
    return std::nullopt;
}

const char* to_string(PitchGroup g) {
    switch (g) {
        case PitchGroup::low: return "low";
        case PitchGroup::medium: return "medium";
        case PitchGroup::high: return "high";
    }
    return "?";
}

PitchGroup pitch_group_assign(double mean_f0_hz) {
    if (mean_f0_hz <= 145.0) return PitchGroup::low;
    if (mean_f0_hz <= 190.0) return PitchGroup::medium;
    return PitchGroup::high;
}

GroupPartition pitch_partition(const DatasetManifest& manifest, int min_speaker_samples) {
    struct SpeakerAcc {
        double f0_sum = 0.0;
        long f0_count = 0;
        std::vector<const Sample*> samples;
    };
    std::map<std::string, SpeakerAcc> speakers;
    GroupPartition partition;
    partition.attribute = "pitch";
    for (const auto& s : manifest.samples) {
        auto f0 = s.attr_number("mean_f0_hz");
        if (s.speaker.empty() || !f0) {
            partition.excluded.push_back(s.id);
            continue;
        }
        auto& acc = speakers[s.speaker];
        acc.samples.push_back(&s);
        if (*f0 >= 50.0 && *f0 <= 350.0) {  // drop pitch-tracking outliers
            acc.f0_sum += *f0;
            ++acc.f0_count;
        }
    }
    for (const auto& [speaker, acc] : speakers) {
        const bool usable = acc.f0_count > 0 &&
                            acc.samples.size() >= static_cast<std::size_t>(min_speaker_samples);
        if (!usable) {
            for (const auto* s : acc.samples) partition.excluded.push_back(s->id);
            continue;
        }
        const double mean_f0 = acc.f0_sum / static_cast<double>(acc.f0_count);
        const std::string group = to_string(pitch_group_assign(mean_f0));
        for (const auto* s : acc.samples) partition.groups[group].push_back(s->id);
    }
    if (partition.groups.empty())
        throw ValidationError("no speaker with usable pitch data in '" + manifest.name + "'");
    return partition;
}

namespace {

std::string slug(const std::string& metric) {
    std::string out;
    for (char c : metric) {
        if (c == '.') continue;
        if (c == ' ') {
            if (!out.empty() && out.back() != '-') out.push_back('-');
        } else {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

const std::vector<Task> kDimensions = {Task::arousal, Task::dominance, Task::valence};

struct RegistryBuilder {
    std::vector<TestSpec> specs;

    void add(const std::string& test, Category category, Task task, const std::string& metric,
             std::vector<std::string> datasets, Comparison comparison, double threshold,
             const std::function<void(TestSpec&)>& tweak = nullptr) {
        TestSpec spec;
        spec.test = test;
        spec.category = category;
        spec.task = task;
        spec.metric = metric;
        spec.datasets = std::move(datasets);
        spec.comparison = comparison;
        spec.threshold = threshold;
        spec.id = slug(test) + "/" + to_string(task) + "/" + slug(metric);
        if (tweak) tweak(spec);
        specs.push_back(std::move(spec));
    }

    void add_dims(const std::string& test, Category category, const std::string& metric,
                  const std::vector<std::string>& datasets, Comparison comparison,
                  double threshold, const std::function<void(TestSpec&)>& tweak = nullptr) {
        for (Task t : kDimensions)
            add(test, category, t, metric, datasets, comparison, threshold, tweak);
    }
};

perturb::PerturbationSpec make_perturbation(const std::string& name, const std::string& kind,
                                            json params) {
    perturb::PerturbationSpec p;
    p.name = name;
    p.kind = kind;
    p.params = std::move(params);
    p.seed = 0;  // bound to the run seed at orchestration time
    return p;
}

void add_robustness(RegistryBuilder& b, const std::string& test,
                    const std::vector<std::string>& cat_sets,
                    const std::vector<std::string>& dim_sets,
                    const std::vector<perturb::PerturbationSpec>& variants,
                    std::optional<double> change_threshold_cat,
                    std::optional<double> change_threshold_dim, double unchanged_threshold) {
    for (const auto& variant : variants) {
        auto attach = [&variant](TestSpec& spec) {
            spec.perturbation = variant;
            spec.id += "/" + variant.name;
        };
        if (change_threshold_cat && !cat_sets.empty())
            b.add(test, Category::robustness, Task::categories, "Change UAR", cat_sets,
                  Comparison::greater, *change_threshold_cat, attach);
        if (!cat_sets.empty())
            b.add(test, Category::robustness, Task::categories, "Perc. Unchanged Predictions",
                  cat_sets, Comparison::greater, unchanged_threshold, attach);
        if (change_threshold_dim && !dim_sets.empty())
            b.add_dims(test, Category::robustness, "Change CCC", dim_sets, Comparison::greater,
                       *change_threshold_dim, attach);
        if (!dim_sets.empty())
            b.add_dims(test, Category::robustness, "Perc. Unchanged Predictions", dim_sets,
                       Comparison::greater, unchanged_threshold, attach);
    }
}

}  // namespace

std::vector<TestSpec> default_registry() {
    RegistryBuilder b;

    const std::vector<std::string> all_cat_sets = {
        "crema-d", "des",  "emodb",             "emovo",             "iemocap",
        "meld",    "msppodcast-test-1", "msppodcast-test-2", "pesd", "ravdess"};
    const std::vector<std::string> consistency_sets = {"crema-d", "des",  "emodb", "emovo",
                                                       "iemocap", "meld", "pesd",  "ravdess"};
    const std::vector<std::string> regression_sets = {"iemocap", "msppodcast-test-1",
                                                      "msppodcast-test-2"};

    // Correctness.
    for (const char* metric : {"PPC", "RPC", "UAP", "UAR"})
        b.add("Correctness Classification", Category::correctness, Task::categories, metric,
              all_cat_sets, Comparison::greater, 0.5);
    b.add_dims("Correctness Consistency", Category::correctness, "Samples in Expected Range",
               consistency_sets, Comparison::greater, 0.75);
    b.add("Correctness Distribution", Category::correctness, Task::categories,
          "Relative Diff. Per Class", all_cat_sets, Comparison::abs_less, 0.15);
    b.add_dims("Correctness Distribution", Category::correctness, "Jensen-Shannon Distance",
               regression_sets, Comparison::less, 0.2,
               [](TestSpec& s) { s.bin_spec = BinSpec{10}; });
    b.add_dims("Correctness Regression", Category::correctness, "CCC", regression_sets,
               Comparison::greater, 0.5);
    b.add_dims("Correctness Regression", Category::correctness, "MAE", regression_sets,
               Comparison::less, 0.1);
    b.add_dims("Correctness Regression", Category::correctness, "PCC", regression_sets,
               Comparison::greater, 0.5);
    b.add("Correctness Speaker Average", Category::correctness, Task::categories,
          "Class Proportion MAE", {"iemocap", "meld", "msppodcast-test-1"}, Comparison::less, 0.1);
    b.add_dims("Correctness Speaker Average", Category::correctness, "MAE",
               {"iemocap-full", "msppodcast-test-1"}, Comparison::less, 0.1);
    b.add("Correctness Speaker Ranking", Category::correctness, Task::categories, "Spearmans Rho",
          {"meld", "msppodcast-test-1"}, Comparison::abs_greater, 0.7);
    b.add_dims("Correctness Speaker Ranking", Category::correctness, "Spearmans Rho",
               {"msppodcast-test-1", "msppodcast-test-2"}, Comparison::abs_greater, 0.7);

    // Fairness. n_min values follow the calibrated per-group sample counts.
    auto grouped = [](const std::string& attribute, int balance_n = 0,
                      std::optional<int> n_min = std::nullopt) {
        return [=](TestSpec& s) {
            s.grouping = attribute;
            s.balance_n = balance_n;
            if (n_min) {
                s.n_min = n_min;
                s.bin_spec = BinSpec{4};
            }
        };
    };
    b.add("Fairness Accent", Category::fairness, Task::categories, "Relative Diff. Per Class",
          {"speech-accent-archive"}, Comparison::abs_less, 0.225, grouped("accent"));
    b.add_dims("Fairness Accent", Category::fairness, "Diff. Mean Value",
               {"speech-accent-archive"}, Comparison::abs_less, 0.075, grouped("accent"));
    b.add_dims("Fairness Accent", Category::fairness, "Relative Diff. Per Bin",
               {"speech-accent-archive"}, Comparison::abs_less, 0.225, grouped("accent", 0, 4));
    b.add("Fairness Language", Category::fairness, Task::categories, "Relative Diff. Per Class",
          {"common-voice"}, Comparison::abs_less, 0.1, grouped("language"));
    b.add_dims("Fairness Language", Category::fairness, "Diff. Mean Value", {"common-voice"},
               Comparison::abs_less, 0.03, grouped("language"));
    b.add_dims("Fairness Language", Category::fairness, "Relative Diff. Per Bin", {"common-voice"},
               Comparison::abs_less, 0.1, grouped("language", 0, 67));
    b.add("Fairness Linguistic Sentiment", Category::fairness, Task::categories,
          "Diff. Class Proportion Shift", {"checklist"}, Comparison::abs_less, 0.075,
          grouped("sentiment"));
    b.add_dims("Fairness Linguistic Sentiment", Category::fairness, "Diff. Bin Proportion Shift",
               {"checklist"}, Comparison::abs_less, 0.075, grouped("sentiment", 0, 67));
    b.add_dims("Fairness Linguistic Sentiment", Category::fairness, "Diff. Mean Shift",
               {"checklist"}, Comparison::abs_less, 0.025, grouped("sentiment"));
    b.add("Fairness Pitch", Category::fairness, Task::categories, "Diff. PPC",
          {"msppodcast-test-1"}, Comparison::abs_less, 0.1, grouped("pitch", 1000));
    b.add("Fairness Pitch", Category::fairness, Task::categories, "Diff. RPC",
          {"msppodcast-test-1"}, Comparison::abs_less, 0.225, grouped("pitch", 1000));
    b.add("Fairness Pitch", Category::fairness, Task::categories, "Diff. UAR",
          {"msppodcast-test-1"}, Comparison::abs_less, 0.075, grouped("pitch", 1000));
    b.add_dims("Fairness Pitch", Category::fairness, "Diff. CCC", {"msppodcast-test-1"},
               Comparison::abs_less, 0.1, grouped("pitch", 1000));
    b.add_dims("Fairness Pitch", Category::fairness, "Diff. Precision Per Bin",
               {"msppodcast-test-1"}, Comparison::abs_less, 0.125, grouped("pitch", 1000, 67));
    b.add_dims("Fairness Pitch", Category::fairness, "Diff. Recall Per Bin",
               {"msppodcast-test-1"}, Comparison::abs_less, 0.125, grouped("pitch", 1000, 67));
    b.add("Fairness Sex", Category::fairness, Task::categories, "Diff. PPC",
          {"iemocap", "msppodcast-test-1"}, Comparison::abs_less, 0.075, grouped("sex", 1000));
    b.add("Fairness Sex", Category::fairness, Task::categories, "Diff. RPC",
          {"iemocap", "msppodcast-test-1"}, Comparison::abs_less, 0.175, grouped("sex", 1000));
    b.add("Fairness Sex", Category::fairness, Task::categories, "Diff. UAR",
          {"iemocap", "msppodcast-test-1"}, Comparison::abs_less, 0.075, grouped("sex", 1000));
    b.add_dims("Fairness Sex", Category::fairness, "Diff. CCC",
               {"iemocap-full", "msppodcast-test-1"}, Comparison::abs_less, 0.075,
               grouped("sex", 1000));
    b.add_dims("Fairness Sex", Category::fairness, "Diff. Precision Per Bin",
               {"iemocap-full", "msppodcast-test-1"}, Comparison::abs_less, 0.1,
               grouped("sex", 1000, 67));
    b.add_dims("Fairness Sex", Category::fairness, "Diff. Recall Per Bin",
               {"iemocap-full", "msppodcast-test-1"}, Comparison::abs_less, 0.1,
               grouped("sex", 1000, 67));

    // Robustness.
    const std::vector<std::string> rob_cat_sets = {"crema-d", "emovo", "iemocap", "meld",
                                                   "msppodcast-test-1"};
    const std::vector<std::string> rob_dim_sets = {"iemocap", "msppodcast-test-1"};

    add_robustness(
        b, "Robustness Background Noise", rob_cat_sets, rob_dim_sets,
        {
            make_perturbation("babble", "babble",
                              {{"pool_role", "noise-speech"}, {"snr_db", 20.0}}),
            make_perturbation("environmental", "mix-noise",
                              {{"pool_role", "noise-sound"}, {"snr_db", 20.0}}),
            make_perturbation("music", "mix-noise",
                              {{"pool_role", "noise-music"}, {"snr_db", 20.0}}),
            make_perturbation("coughing", "mix-event",
                              {{"pool_role", "noise-cough"}, {"snr_db", 10.0}}),
            make_perturbation("sneezing", "mix-event",
                              {{"pool_role", "noise-sneeze"}, {"snr_db", 10.0}}),
            make_perturbation("white-noise", "white-noise", {{"snr_db", 20.0}}),
        },
        -0.05, -0.05, 0.9);
    add_robustness(b, "Robustness Low Quality Phone", rob_cat_sets, rob_dim_sets,
                   {make_perturbation("phone", "phone", json::object())}, -0.05, -0.05, 0.5);
    add_robustness(b, "Robustness Rec. Condition", {"nsc"}, {"nsc"},
                   {
                       make_perturbation("boundary-mic", "recorded", {{"role", "boundary"}}),
                       make_perturbation("mobile-phone", "recorded", {{"role", "mobile"}}),
                   },
                   std::nullopt, std::nullopt, 0.8);
    add_robustness(b, "Robustness Sim. Rec. Condition", {"emovo", "nsc", "timit"},
                   {"emovo", "nsc", "timit"},
                   {
                       make_perturbation("ir-position", "impulse-response",
                                         {{"pool_role", "irs-position"}}),
                       make_perturbation("ir-room", "impulse-response",
                                         {{"pool_role", "irs-room"}}),
                   },
                   std::nullopt, std::nullopt, 0.8);
    add_robustness(
        b, "Robustness Small Changes", rob_cat_sets, rob_dim_sets,
        {
            make_perturbation("additive-tone", "tone",
                              {{"freq_min_hz", 5000.0},
                               {"freq_max_hz", 7000.0},
                               {"snr_choices_db", json::array({40.0, 45.0, 50.0})}}),
            make_perturbation("append-zeros", "edit",
                              {{"mode", "append_zeros"},
                               {"n_choices", json::array({100, 500, 1000})}}),
            make_perturbation("prepend-zeros", "edit",
                              {{"mode", "prepend_zeros"},
                               {"n_choices", json::array({100, 500, 1000})}}),
            make_perturbation("clip", "clip",
                              {{"p_choices", json::array({0.001, 0.002, 0.003})}}),
            make_perturbation("crop-beginning", "edit",
                              {{"mode", "crop_start"},
                               {"n_choices", json::array({100, 500, 1000})}}),
            make_perturbation("crop-end", "edit",
                              {{"mode", "crop_end"},
                               {"n_choices", json::array({100, 500, 1000})}}),
            make_perturbation("gain", "gain",
                              {{"db_choices", json::array({-2.0, -1.0, 1.0, 2.0})}}),
            make_perturbation("highpass", "filter",
                              {{"filter", "highpass"},
                               {"cutoff_choices_hz", json::array({50.0, 100.0, 150.0})}}),
            make_perturbation("lowpass", "filter",
                              {{"filter", "lowpass"},
                               {"cutoff_choices_hz", json::array({7500.0, 7000.0, 6500.0})}}),
            make_perturbation("white-noise", "white-noise",
                              {{"snr_choices_db", json::array({35.0, 40.0, 45.0})}}),
        },
        std::nullopt, std::nullopt, 0.95);
    add_robustness(b, "Robustness Spectral Tilt", rob_cat_sets, rob_dim_sets,
                   {
                       make_perturbation("tilt-up", "tilt", {{"slope_db_per_octave", 2.0}}),
                       make_perturbation("tilt-down", "tilt", {{"slope_db_per_octave", -2.0}}),
                   },
                   -0.02, -0.05, 0.8);

    return b.specs;
}

namespace {

json spec_to_json(const TestSpec& spec) {
    json row;
    row["id"] = spec.id;
    row["test"] = spec.test;
    row["category"] = to_string(spec.category);
    row["task"] = to_string(spec.task);
    row["metric"] = spec.metric;
    row["datasets"] = spec.datasets;
    row["comparison"] = to_string(spec.comparison);
    row["threshold"] = spec.threshold;
    if (spec.auto_threshold) row["auto_threshold"] = true;
    if (spec.bin_spec) row["bins"] = spec.bin_spec->n_bins;
    if (spec.n_min) row["n_min"] = *spec.n_min;
    if (!spec.grouping.empty()) row["grouping"] = spec.grouping;
    if (spec.balance_n > 0) row["balance_n"] = spec.balance_n;
    if (spec.perturbation) {
        json p;
        p["name"] = spec.perturbation->name;
        p["kind"] = spec.perturbation->kind;
        p["params"] = spec.perturbation->params;
        if (spec.perturbation->seed) p["seed"] = spec.perturbation->seed;
        row["perturbation"] = p;
    }
    const Prerequisites defaults;
    if (spec.prereqs.min_speakers != defaults.min_speakers ||
        spec.prereqs.min_samples_regression != defaults.min_samples_regression ||
        spec.prereqs.min_samples_per_class != defaults.min_samples_per_class) {
        row["prereqs"] = {{"min_speakers", spec.prereqs.min_speakers},
                          {"min_samples_regression", spec.prereqs.min_samples_regression},
                          {"min_samples_per_class", spec.prereqs.min_samples_per_class}};
    }
    return row;
}

TestSpec spec_from_json(const json& row, std::size_t index) {
    auto fail = [&](const std::string& what) -> ParseError {
        return ParseError("registry row " + std::to_string(index) + ": " + what);
    };
    if (!row.is_object()) throw fail("expected an object");
    TestSpec spec;
    try {
        spec.id = row.at("id").get<std::string>();
        spec.test = row.at("test").get<std::string>();
        spec.category = category_from_string(row.at("category").get<std::string>());
        spec.task = task_from_string(row.at("task").get<std::string>());
        spec.metric = row.at("metric").get<std::string>();
        spec.datasets = row.at("datasets").get<std::vector<std::string>>();
        spec.comparison = comparison_from_string(row.at("comparison").get<std::string>());
        if (row.contains("auto_threshold")) spec.auto_threshold = row["auto_threshold"].get<bool>();
        if (row.contains("threshold"))
            spec.threshold = row["threshold"].get<double>();
        else if (!spec.auto_threshold)
            throw fail("missing threshold");
        if (row.contains("bins")) spec.bin_spec = BinSpec{row["bins"].get<int>()};
        if (row.contains("n_min")) {
            spec.n_min = row["n_min"].get<int>();
            if (!spec.bin_spec) spec.bin_spec = BinSpec{4};
        }
        if (row.contains("grouping")) spec.grouping = row["grouping"].get<std::string>();
        if (row.contains("balance_n")) spec.balance_n = row["balance_n"].get<int>();
        if (row.contains("perturbation")) {
            const auto& p = row["perturbation"];
            perturb::PerturbationSpec ps;
            ps.name = p.at("name").get<std::string>();
            ps.kind = p.at("kind").get<std::string>();
            if (p.contains("params")) ps.params = p["params"];
            if (p.contains("seed")) ps.seed = p["seed"].get<std::uint64_t>();
            spec.perturbation = std::move(ps);
        }
        if (row.contains("prereqs")) {
            const auto& q = row["prereqs"];
            if (q.contains("min_speakers"))
                spec.prereqs.min_speakers = q["min_speakers"].get<int>();
            if (q.contains("min_samples_regression"))
                spec.prereqs.min_samples_regression = q["min_samples_regression"].get<int>();
            if (q.contains("min_samples_per_class"))
                spec.prereqs.min_samples_per_class = q["min_samples_per_class"].get<int>();
        }
    } catch (const json::exception& e) {
        throw fail(e.what());
    }
    if (!std::isfinite(spec.threshold)) throw fail("threshold must be finite");
    return spec;
}

}  // namespace

std::vector<TestSpec> load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open registry: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("tests") || !doc["tests"].is_array())
        throw ParseError(path.string() + ": expected an object with a 'tests' array");
    std::vector<TestSpec> specs;
    std::set<std::string> ids;
    std::size_t index = 0;
    for (const auto& row : doc["tests"]) {
        TestSpec spec = spec_from_json(row, index++);
        if (!ids.insert(spec.id).second)
            throw ValidationError(path.string() + ": duplicate test id '" + spec.id + "'");
        specs.push_back(std::move(spec));
    }
    return specs;
}

void save_registry(const std::vector<TestSpec>& specs, const std::filesystem::path& path) {
    json doc;
    doc["version"] = 1;
    auto& tests = doc["tests"] = json::array();
    for (const auto& spec : specs) tests.push_back(spec_to_json(spec));
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write registry: " + path.string());
    out << doc.dump(2) << "\n";
}

std::string registry_hash(const std::vector<TestSpec>& specs) {
    json tests = json::array();
    for (const auto& spec : specs) tests.push_back(spec_to_json(spec));
    const std::uint64_t h = fnv1a(tests.dump());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace sertest::suite
