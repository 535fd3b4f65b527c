#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sertest/core.hpp"
#include "sertest/fairness_sim.hpp"
#include "sertest/perturb.hpp"

namespace sertest::suite {

enum class Category { correctness, fairness, robustness };

const char* to_string(Category c);
Category category_from_string(const std::string& s);

enum class Comparison { greater, less, abs_less, abs_greater };

const char* to_string(Comparison c);
Comparison comparison_from_string(const std::string& s);
bool compare(double value, Comparison comparison, double threshold);

struct Prerequisites {
    int min_speakers = 6;
    int min_samples_regression = 10;
    int min_samples_per_class = 8;
};

/// One testable condition: a metric with a passing threshold, applied to a
/// list of dataset roles. Rows sharing the same `test` name are aggregated
/// together.
struct TestSpec {
    std::string id;    // unique, e.g. "correctness-regression/arousal/ccc"
    std::string test;  // display name, e.g. "Correctness Regression"
    Category category = Category::correctness;
    Task task = Task::arousal;
    std::string metric;  // display name, e.g. "CCC" or "Diff. Mean Value"
    std::vector<std::string> datasets;
    Comparison comparison = Comparison::greater;
    double threshold = 0.0;
    bool auto_threshold = false;  // resolve via threshold table / simulation
    std::optional<BinSpec> bin_spec;
    std::optional<int> n_min;
    std::string grouping;  // fairness partition attribute
    int balance_n = 0;     // fairness group balancing target; 0 = off
    std::optional<perturb::PerturbationSpec> perturbation;
    Prerequisites prereqs;
};

struct Instance {
    std::string dataset;
    std::string key;  // group, class, bin, speaker scope, ...
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
    bool skipped = false;
    std::string reason;                  // skip reason or note
    std::map<std::string, double> info;  // auxiliary non-gating values
};

struct TestResult {
    std::string spec_id;
    std::string test;
    Category category = Category::correctness;
    Task task = Task::arousal;
    std::string metric;
    Comparison comparison = Comparison::greater;
    std::vector<Instance> instances;
    long n_passed = 0;
    long n_failed = 0;
    long n_skipped = 0;
    double pass_fraction = 0.0;  // skipped instances excluded

    void finalize();
};

/// The registry rows shipped with the harness.
std::vector<TestSpec> default_registry();
std::vector<TestSpec> load_registry(const std::filesystem::path& path);
void save_registry(const std::vector<TestSpec>& specs, const std::filesystem::path& path);
std::string registry_hash(const std::vector<TestSpec>& specs);

/// Expected dimensional range for samples of a categorical emotion;
/// nullopt when no correspondence is established.
std::optional<std::pair<double, double>> expected_range(const std::string& category,
                                                        Task dimension);

enum class PitchGroup { low, medium, high };
const char* to_string(PitchGroup g);

/// low <= 145 Hz < medium <= 190 Hz < high. Callers must exclude speakers
/// whose mean F0 lies outside [50, 350] Hz beforehand.
PitchGroup pitch_group_assign(double mean_f0_hz);

/// Speaker-level pitch partition: per-speaker mean of the samples'
/// mean_f0_hz attribute (values outside [50, 350] Hz dropped), speakers
/// with fewer than min_speaker_samples samples excluded.
GroupPartition pitch_partition(const DatasetManifest& manifest, int min_speaker_samples = 25);

/// Prediction sets for one robustness comparison: a baseline and one or
/// more perturbed/alternative renderings of the same samples.
struct RobustnessData {
    const PredictionSet* baseline = nullptr;
    std::vector<std::pair<std::string, const PredictionSet*>> variants;
    std::string skip_reason;  // set when the comparison cannot be served
};

/// Everything evaluate_test may pull on. Callbacks may return nullptr /
/// a skip_reason; the affected instances are then reported as skipped.
struct EvalContext {
    std::function<const DatasetManifest*(const std::string& dataset)> manifest;
    std::function<const PredictionSet*(const std::string& dataset, Task task)> predictions;
    std::function<RobustnessData(const TestSpec& spec, const std::string& dataset)> robustness;
    const sim::ThresholdTable* thresholds = nullptr;
    bool simulate_missing_thresholds = true;
    sim::ThresholdTable* simulated_cache = nullptr;  // optional, filled by fallback runs
    std::uint64_t seed = 0;
};

TestResult evaluate_test(const TestSpec& spec, const EvalContext& ctx);

/// Evaluates all specs; results ordered by (category, spec id).
std::vector<TestResult> run_suite(const std::vector<TestSpec>& specs, const EvalContext& ctx);

struct Aggregates {
    // Pass fraction per (task, test display name); tests whose instances
    // all skipped are absent.
    std::map<std::pair<Task, std::string>, double> per_test;
    std::map<std::pair<Task, Category>, double> per_category;  // mean over tests
    std::map<Task, double> per_task;                           // mean over tests of the task
    double overall = 0.0;  // mean over the per-task values
    bool has_any = false;

    bool operator==(const Aggregates&) const = default;
};

Aggregates aggregate(const std::vector<TestResult>& results);

/// Threshold for a fairness metric given the actual group layout: table
/// lookup with samples_per_group rounded down to the grid, falling back to
/// a fresh simulation (cached when a cache table is supplied).
double resolve_fairness_threshold(const std::string& metric_id, int n_groups,
                                  int samples_per_group, const sim::ThresholdTable& table,
                                  bool allow_simulation, std::uint64_t seed,
                                  sim::ThresholdTable* cache = nullptr);

}  // namespace sertest::suite
