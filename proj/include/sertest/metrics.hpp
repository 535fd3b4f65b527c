#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sertest/core.hpp"

namespace sertest::metrics {

/// Thrown when a metric is mathematically undefined on its input
/// (e.g. Pearson correlation of a constant sequence).
struct UndefinedMetric : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double mean(std::span<const double> xs);

/// Population (biased) variance; all moment-based metrics in this module
/// use population moments.
double variance(std::span<const double> xs);
double covariance(std::span<const double> xs, std::span<const double> ys);

/// Concordance correlation: 2*cov / (var_t + var_p + (mean_t - mean_p)^2).
/// Degenerate case: both sequences constant and equal -> 1.
double concordance_corr(std::span<const double> truth, std::span<const double> pred);

/// Pearson correlation on population moments; throws UndefinedMetric when
/// either sequence has zero variance.
double pearson_corr(std::span<const double> truth, std::span<const double> pred);

double mean_absolute_error(std::span<const double> truth, std::span<const double> pred);

/// Pearson correlation of fractional ranks; ties receive the average rank.
double spearman_rho(std::span<const double> a, std::span<const double> b);

struct ClassMetrics {
    std::map<std::string, double> recall_per_class;     // classes present in truth
    std::map<std::string, double> precision_per_class;  // classes predicted at least once
    double uar = 0.0;                                   // mean of defined recalls
    double uap = 0.0;                                   // mean of defined precisions
};

/// Confusion-matrix metrics. Recall is undefined for classes absent from
/// the truth and precision for classes never predicted; undefined entries
/// are excluded from the unweighted averages.
ClassMetrics class_metrics(const std::vector<std::string>& truth,
                           const std::vector<std::string>& pred,
                           const std::set<std::string>& classes);

std::vector<long> bin_values(std::span<const double> values, const BinSpec& spec);

/// Square root of the Jensen-Shannon divergence between the binned value
/// distributions, log base 2, so the result lies in [0,1].
double jensen_shannon_distance(std::span<const double> truth, std::span<const double> pred,
                               const BinSpec& spec = BinSpec{10});

enum class DisparityMode { diff_mean, rel_diff_per_class, rel_diff_per_bin };

struct DisparityReport {
    DisparityMode mode = DisparityMode::diff_mean;
    std::map<std::string, double> values;  // "mean", class name, or bin index
    std::set<std::string> skipped;         // bins under the reference count floor
};

/// Disparity of a group against a reference pool. diff_mean is the shift in
/// mean value; the rel_diff modes are signed proportion differences per
/// class or per bin. Bins whose reference count falls below n_min are
/// reported as skipped.
DisparityReport group_disparity(const std::vector<Label>& group,
                                const std::vector<Label>& reference, DisparityMode mode,
                                std::optional<BinSpec> spec = std::nullopt,
                                std::optional<int> n_min = std::nullopt);

struct BinnedClassMetrics {
    std::map<int, double> recall_per_bin;
    std::map<int, double> precision_per_bin;
    std::set<int> skipped_bins;  // truth count below n_min
};

/// Treats bin indices as classes and computes per-bin recall/precision.
BinnedClassMetrics binned_class_metrics(std::span<const double> truth,
                                        std::span<const double> pred, const BinSpec& spec,
                                        int n_min);

/// Fraction of common ids whose prediction survives a perturbation:
/// identical class, or |delta| < 0.05 (strict) for dimensional tasks.
/// n_common, when given, receives the size of the id intersection.
double unchanged_fraction(const PredictionSet& clean, const PredictionSet& perturbed, Task task,
                          std::size_t* n_common = nullptr);

constexpr double kUnchangedValueTolerance = 0.05;

/// Fraction of values inside [lo, hi] (inclusive); nullopt on empty input.
std::optional<double> in_range_fraction(std::span<const double> preds, double lo, double hi);

struct SpeakerStats {
    // Regression: average value per qualifying speaker.
    std::map<std::string, double> mean_truth;
    std::map<std::string, double> mean_pred;
    // Classification: per-class sample proportions per qualifying speaker.
    std::map<std::string, std::map<std::string, double>> prop_truth;
    std::map<std::string, std::map<std::string, double>> prop_pred;
    int excluded_speakers = 0;
};

/// Per-speaker aggregates over samples that have both gold and a
/// prediction. A speaker qualifies with >= min_samples such samples for
/// regression, or >= min_per_class gold samples of every observed class
/// for classification.
SpeakerStats speaker_stats(const DatasetManifest& manifest, const PredictionSet& preds, Task task,
                           int min_samples, int min_per_class);

/// Per class: mean over speakers of |true proportion - predicted proportion|.
std::map<std::string, double> class_proportion_mae(
    const std::map<std::string, std::map<std::string, double>>& truth_props,
    const std::map<std::string, std::map<std::string, double>>& pred_props);

struct SentimentKey {
    std::string language;
    std::string sentiment;
    std::string key;  // class name, bin index, or "mean"
    auto operator<=>(const SentimentKey&) const = default;
};

struct SentimentShiftScores {
    std::map<SentimentKey, double> values;
    std::set<SentimentKey> skipped;  // bins under the reference count floor
};

/// Sentiment-conditioned prediction shift per language, centred on the
/// cross-language average so that models affected equally everywhere score
/// zero. shift is the change in class/bin proportion (or mean value) of the
/// sentiment subset against the language's full set.
SentimentShiftScores sentiment_shift_scores(
    const std::map<std::pair<std::string, std::string>, std::vector<Label>>& by_language_sentiment,
    const std::map<std::string, std::vector<Label>>& by_language, Task task,
    const BinSpec& spec = BinSpec{4}, std::optional<int> n_min = std::nullopt);

}  // namespace sertest::metrics
