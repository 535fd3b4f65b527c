#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sertest/core.hpp"
#include "sertest/random.hpp"

namespace sertest::sim {

enum class RandomModelKind { gaussian_truncated, categorical_uniform, categorical_sparse };

/// Distribution a random (bias-free) model draws its predictions from.
struct RandomModelConfig {
    RandomModelKind kind = RandomModelKind::gaussian_truncated;
    double mean = 0.5;
    double stddev = 1.0 / 6.0;
    double lo = 0.0;
    double hi = 1.0;
    int n_classes = 4;
    std::vector<double> class_probs;  // sparse kind only

    static RandomModelConfig gaussian();
    static RandomModelConfig uniform(int n_classes = 4);
    static RandomModelConfig sparse();  // class probabilities (0.05, 0.05, 0.3, 0.6)

    std::string id() const;  // table key, e.g. "gaussian", "uniform4", "sparse4"
    static RandomModelConfig from_id(const std::string& id);
};

std::vector<Label> sample_random_predictions(const RandomModelConfig& config, int n,
                                             std::uint64_t seed);

/// Raw samplers used by the simulation loops.
std::vector<double> sample_values(const RandomModelConfig& config, int n, Rng& rng);
std::vector<int> sample_classes(const RandomModelConfig& config, int n, Rng& rng);

/// Minimum samples per bin: the expected count of the first of four bins
/// under a normal with mean 0.5 and stddev 1/6, i.e. round(Phi(-1.5) * n).
int n_min_bin(long n);

/// Fairness metrics the simulator knows. Accepts the registry display
/// names ("Diff. Mean Value") as well as the canonical kebab-case ids.
/// Returns the canonical id or throws for unsupported metrics.
std::string canonical_sim_metric(const std::string& metric_id);
bool sim_metric_needs_truth(const std::string& canonical_id);

/// Worst-case group disparity of a random model: for every repeat, draw a
/// pool of n_groups*samples_per_group predictions (plus truths where the
/// metric needs them), split it into groups, and take the largest
/// |metric(group) - metric(pool)| over groups and metric components. The
/// returned threshold is the maximum over all repeats. Deterministic for a
/// fixed seed; repeats use independent derived streams.
double simulate_threshold(const std::string& metric_id, int n_groups, int samples_per_group,
                          const RandomModelConfig& model,
                          const std::optional<RandomModelConfig>& truth, int repeats,
                          std::uint64_t seed, int threads = 0);

struct ThresholdKey {
    std::string metric;  // canonical id
    int n_groups = 0;
    int samples_per_group = 0;
    std::string model;
    std::string truth;  // "-" when the metric ignores truth
    auto operator<=>(const ThresholdKey&) const = default;
};

struct ThresholdEntry {
    double threshold = 0.0;              // value used by the suite
    std::optional<double> simulated;     // raw simulation output, informational
    int repeats = 0;
    std::uint64_t seed = 0;
};

class ThresholdTable {
public:
    void insert(const ThresholdKey& key, const ThresholdEntry& entry) { entries_[key] = entry; }

    /// Lookup with samples_per_group rounded down to the table grid for the
    /// given metric and group count.
    std::optional<double> lookup(const std::string& metric_id, int n_groups,
                                 int samples_per_group) const;

    const std::map<ThresholdKey, ThresholdEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    static ThresholdTable load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    std::string dump() const;

    /// Table shipped with the harness; see data/thresholds.tsv.
    static const ThresholdTable& bundled();

private:
    std::map<ThresholdKey, ThresholdEntry> entries_;
};

/// Equalizes group sizes so that truth distributions match across groups:
/// the smallest group is downsampled uniformly to target_n and every other
/// group is reduced to target_n samples with similar truth values (greedy
/// nearest-neighbour on the gold value for dimensional tasks, class
/// proportion matching for categories). Throws ValidationError when the
/// smallest group has fewer than target_n usable samples.
GroupPartition balance_groups(const DatasetManifest& manifest, const GroupPartition& partition,
                              Task task, int target_n, std::uint64_t seed);

}  // namespace sertest::sim
