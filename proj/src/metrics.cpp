#include "sertest/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sertest::metrics {

namespace {

void require_equal_lengths(std::span<const double> a, std::span<const double> b,
                           std::size_t min_len) {
    if (a.size() != b.size())
        throw std::invalid_argument("sequence length mismatch: " + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()));
    if (a.size() < min_len)
        throw std::invalid_argument("need at least " + std::to_string(min_len) + " elements");
}

std::vector<double> fractional_ranks(std::span<const double> xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

std::map<std::string, double> class_proportions(const std::vector<Label>& labels) {
    std::map<std::string, double> props;
    for (const auto& l : labels) props[l.cls()] += 1.0;
    for (auto& [cls, count] : props) count /= static_cast<double>(labels.size());
    return props;
}

std::vector<double> values_of(const std::vector<Label>& labels) {
    std::vector<double> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(l.value());
    return out;
}

}  // namespace

double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty sequence");
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
    const double m = mean(xs);
    double sum = 0.0;
    for (double x : xs) sum += (x - m) * (x - m);
    return sum / static_cast<double>(xs.size());
}

double covariance(std::span<const double> xs, std::span<const double> ys) {
    require_equal_lengths(xs, ys, 1);
    const double mx = mean(xs), my = mean(ys);
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) sum += (xs[i] - mx) * (ys[i] - my);
    return sum / static_cast<double>(xs.size());
}

double concordance_corr(std::span<const double> truth, std::span<const double> pred) {
    require_equal_lengths(truth, pred, 2);
    const double mt = mean(truth), mp = mean(pred);
    const double vt = variance(truth), vp = variance(pred);
    const double cov = covariance(truth, pred);
    const double denom = vt + vp + (mt - mp) * (mt - mp);
    if (denom == 0.0) return 1.0;  // both constant and equal
    return 2.0 * cov / denom;
}

double pearson_corr(std::span<const double> truth, std::span<const double> pred) {
    require_equal_lengths(truth, pred, 2);
    const double vt = variance(truth), vp = variance(pred);
    if (vt == 0.0 || vp == 0.0) throw UndefinedMetric("Pearson correlation of constant sequence");
    return covariance(truth, pred) / std::sqrt(vt * vp);
}

double mean_absolute_error(std::span<const double> truth, std::span<const double> pred) {
    require_equal_lengths(truth, pred, 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sum += std::abs(truth[i] - pred[i]);
    return sum / static_cast<double>(truth.size());
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
    require_equal_lengths(a, b, 2);
    const auto ra = fractional_ranks(a);
    const auto rb = fractional_ranks(b);
    return pearson_corr(ra, rb);
}

ClassMetrics class_metrics(const std::vector<std::string>& truth,
                           const std::vector<std::string>& pred,
                           const std::set<std::string>& classes) {
    if (truth.size() != pred.size()) throw std::invalid_argument("sequence length mismatch");
    if (truth.empty()) throw std::invalid_argument("empty label sequences");
    for (const auto& t : truth)
        if (!classes.count(t)) throw std::invalid_argument("unknown truth label '" + t + "'");
    for (const auto& p : pred)
        if (!classes.count(p)) throw std::invalid_argument("unknown predicted label '" + p + "'");

    std::map<std::string, long> truth_count, pred_count, hit_count;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++truth_count[truth[i]];
        ++pred_count[pred[i]];
        if (truth[i] == pred[i]) ++hit_count[truth[i]];
    }

    ClassMetrics out;
    for (const auto& cls : classes) {
        if (auto it = truth_count.find(cls); it != truth_count.end())
            out.recall_per_class[cls] =
                static_cast<double>(hit_count[cls]) / static_cast<double>(it->second);
        if (auto it = pred_count.find(cls); it != pred_count.end())
            out.precision_per_class[cls] =
                static_cast<double>(hit_count[cls]) / static_cast<double>(it->second);
    }
    double sum = 0.0;
    for (const auto& [cls, r] : out.recall_per_class) sum += r;
    out.uar = out.recall_per_class.empty() ? 0.0 : sum / out.recall_per_class.size();
    sum = 0.0;
    for (const auto& [cls, p] : out.precision_per_class) sum += p;
    out.uap = out.precision_per_class.empty() ? 0.0 : sum / out.precision_per_class.size();
    return out;
}

std::vector<long> bin_values(std::span<const double> values, const BinSpec& spec) {
    std::vector<long> counts(spec.n_bins, 0);
    for (double v : values) ++counts[bin_index(v, spec)];
    return counts;
}

double jensen_shannon_distance(std::span<const double> truth, std::span<const double> pred,
                               const BinSpec& spec) {
    if (truth.empty() || pred.empty())
        throw std::invalid_argument("jensen_shannon_distance on empty input");
    const auto ct = bin_values(truth, spec);
    const auto cp = bin_values(pred, spec);
    double divergence = 0.0;
    for (int b = 0; b < spec.n_bins; ++b) {
        const double p = static_cast<double>(ct[b]) / static_cast<double>(truth.size());
        const double q = static_cast<double>(cp[b]) / static_cast<double>(pred.size());
        const double m = 0.5 * (p + q);
        if (p > 0.0) divergence += 0.5 * p * std::log2(p / m);
        if (q > 0.0) divergence += 0.5 * q * std::log2(q / m);
    }
    if (divergence < 0.0) divergence = 0.0;  // guard against rounding
    return std::sqrt(divergence);
}

DisparityReport group_disparity(const std::vector<Label>& group,
                                const std::vector<Label>& reference, DisparityMode mode,
                                std::optional<BinSpec> spec, std::optional<int> n_min) {
    if (group.empty()) throw std::invalid_argument("group_disparity on empty group");
    if (reference.empty()) throw std::invalid_argument("group_disparity on empty reference");

    DisparityReport report;
    report.mode = mode;
    switch (mode) {
        case DisparityMode::diff_mean: {
            const auto g = values_of(group);
            const auto r = values_of(reference);
            report.values["mean"] = mean(g) - mean(r);
            break;
        }
        case DisparityMode::rel_diff_per_class: {
            const auto pg = class_proportions(group);
            const auto pr = class_proportions(reference);
            std::set<std::string> classes;
            for (const auto& [cls, p] : pg) classes.insert(cls);
            for (const auto& [cls, p] : pr) classes.insert(cls);
            for (const auto& cls : classes) {
                const double g = pg.count(cls) ? pg.at(cls) : 0.0;
                const double r = pr.count(cls) ? pr.at(cls) : 0.0;
                report.values[cls] = g - r;
            }
            break;
        }
        case DisparityMode::rel_diff_per_bin: {
            if (!spec) throw std::invalid_argument("rel_diff_per_bin requires a BinSpec");
            const auto cg = bin_values(values_of(group), *spec);
            const auto cr = bin_values(values_of(reference), *spec);
            for (int b = 0; b < spec->n_bins; ++b) {
                const std::string key = std::to_string(b);
                if (n_min && cr[b] < *n_min) {
                    report.skipped.insert(key);
                    continue;
                }
                report.values[key] =
                    static_cast<double>(cg[b]) / static_cast<double>(group.size()) -
                    static_cast<double>(cr[b]) / static_cast<double>(reference.size());
            }
            break;
        }
    }
    return report;
}

BinnedClassMetrics binned_class_metrics(std::span<const double> truth,
                                        std::span<const double> pred, const BinSpec& spec,
                                        int n_min) {
    require_equal_lengths(truth, pred, 1);
    std::vector<long> truth_count(spec.n_bins, 0), pred_count(spec.n_bins, 0),
        hit_count(spec.n_bins, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int tb = bin_index(truth[i], spec);
        const int pb = bin_index(pred[i], spec);
        ++truth_count[tb];
        ++pred_count[pb];
        if (tb == pb) ++hit_count[tb];
    }
    BinnedClassMetrics out;
    for (int b = 0; b < spec.n_bins; ++b) {
        if (truth_count[b] < n_min) {
            out.skipped_bins.insert(b);
            continue;
        }
        if (truth_count[b] > 0)
            out.recall_per_bin[b] =
                static_cast<double>(hit_count[b]) / static_cast<double>(truth_count[b]);
        if (pred_count[b] > 0)
            out.precision_per_bin[b] =
                static_cast<double>(hit_count[b]) / static_cast<double>(pred_count[b]);
    }
    return out;
}

double unchanged_fraction(const PredictionSet& clean, const PredictionSet& perturbed, Task task,
                          std::size_t* n_common) {
    std::size_t common = 0, unchanged = 0;
    for (const auto& [id, clean_label] : clean.predictions) {
        auto it = perturbed.predictions.find(id);
        if (it == perturbed.predictions.end()) continue;
        ++common;
        if (is_dimensional(task)) {
            if (std::abs(clean_label.value() - it->second.value()) < kUnchangedValueTolerance)
                ++unchanged;
        } else if (clean_label.cls() == it->second.cls()) {
            ++unchanged;
        }
    }
    if (n_common) *n_common = common;
    if (common == 0) throw std::invalid_argument("no common ids between prediction sets");
    return static_cast<double>(unchanged) / static_cast<double>(common);
}

std::optional<double> in_range_fraction(std::span<const double> preds, double lo, double hi) {
    if (preds.empty()) return std::nullopt;
    std::size_t inside = 0;
    for (double v : preds)
        if (v >= lo && v <= hi) ++inside;
    return static_cast<double>(inside) / static_cast<double>(preds.size());
}

SpeakerStats speaker_stats(const DatasetManifest& manifest, const PredictionSet& preds, Task task,
                           int min_samples, int min_per_class) {
    struct Acc {
        std::vector<double> truth_values, pred_values;
        std::map<std::string, long> truth_classes, pred_classes;
        long n = 0;
    };
    std::map<std::string, Acc> by_speaker;
    std::set<std::string> all_classes;
    for (const auto& s : manifest.samples) {
        if (s.speaker.empty()) continue;
        const Label* gold = s.gold_for(task);
        auto it = preds.predictions.find(s.id);
        if (!gold || it == preds.predictions.end()) continue;
        Acc& acc = by_speaker[s.speaker];
        ++acc.n;
        if (is_dimensional(task)) {
            acc.truth_values.push_back(gold->value());
            acc.pred_values.push_back(it->second.value());
        } else {
            ++acc.truth_classes[gold->cls()];
            ++acc.pred_classes[it->second.cls()];
            all_classes.insert(gold->cls());
        }
    }

    SpeakerStats out;
    for (const auto& [speaker, acc] : by_speaker) {
        bool qualifies;
        if (is_dimensional(task)) {
            qualifies = acc.n >= min_samples;
        } else {
            qualifies = true;
            for (const auto& cls : all_classes) {
                auto it = acc.truth_classes.find(cls);
                if (it == acc.truth_classes.end() || it->second < min_per_class) {
                    qualifies = false;
                    break;
                }
            }
        }
        if (!qualifies) {
            ++out.excluded_speakers;
            continue;
        }
        if (is_dimensional(task)) {
            out.mean_truth[speaker] = mean(acc.truth_values);
            out.mean_pred[speaker] = mean(acc.pred_values);
        } else {
            for (const auto& cls : all_classes) {
                const double n = static_cast<double>(acc.n);
                out.prop_truth[speaker][cls] =
                    static_cast<double>(acc.truth_classes.count(cls) ? acc.truth_classes.at(cls)
                                                                     : 0) /
                    n;
                out.prop_pred[speaker][cls] =
                    static_cast<double>(acc.pred_classes.count(cls) ? acc.pred_classes.at(cls)
                                                                    : 0) /
                    n;
            }
        }
    }
    return out;
}

std::map<std::string, double> class_proportion_mae(
    const std::map<std::string, std::map<std::string, double>>& truth_props,
    const std::map<std::string, std::map<std::string, double>>& pred_props) {
    std::map<std::string, double> sums;
    std::map<std::string, long> counts;
    for (const auto& [speaker, props] : truth_props) {
        auto pit = pred_props.find(speaker);
        if (pit == pred_props.end()) continue;
        for (const auto& [cls, t] : props) {
            const double p = pit->second.count(cls) ? pit->second.at(cls) : 0.0;
            sums[cls] += std::abs(t - p);
            ++counts[cls];
        }
    }
    std::map<std::string, double> out;
    for (const auto& [cls, sum] : sums) out[cls] = sum / static_cast<double>(counts[cls]);
    return out;
}

SentimentShiftScores sentiment_shift_scores(
    const std::map<std::pair<std::string, std::string>, std::vector<Label>>& by_language_sentiment,
    const std::map<std::string, std::vector<Label>>& by_language, Task task, const BinSpec& spec,
    std::optional<int> n_min) {
    if (by_language.size() < 2)
        throw std::invalid_argument("sentiment shift requires at least 2 languages");
    for (const auto& [key, labels] : by_language_sentiment)
        if (labels.empty())
            throw std::invalid_argument("empty cell for language '" + key.first +
                                        "', sentiment '" + key.second + "'");

    // shift per (language, sentiment, key); key is a class, bin, or "mean".
    std::map<std::string, std::map<std::pair<std::string, std::string>, double>> shifts;
    std::set<std::pair<std::string, std::string>> skipped_cells;  // (language, key)

    for (const auto& [cell, labels] : by_language_sentiment) {
        const auto& [language, sentiment] = cell;
        auto lit = by_language.find(language);
        if (lit == by_language.end())
            throw std::invalid_argument("language '" + language + "' missing from language map");
        const auto& full = lit->second;
        if (is_dimensional(task)) {
            const auto subset_values = values_of(labels);
            const auto full_values = values_of(full);
            shifts["mean"][cell] = mean(subset_values) - mean(full_values);
            const auto cs = bin_values(subset_values, spec);
            const auto cf = bin_values(full_values, spec);
            for (int b = 0; b < spec.n_bins; ++b) {
                const std::string key = std::to_string(b);
                if (n_min && cf[b] < *n_min) {
                    skipped_cells.insert({language, key});
                    continue;
                }
                shifts[key][cell] =
                    static_cast<double>(cs[b]) / static_cast<double>(labels.size()) -
                    static_cast<double>(cf[b]) / static_cast<double>(full.size());
            }
        } else {
            const auto ps = class_proportions(labels);
            const auto pf = class_proportions(full);
            std::set<std::string> classes;
            for (const auto& [cls, p] : ps) classes.insert(cls);
            for (const auto& [cls, p] : pf) classes.insert(cls);
            for (const auto& cls : classes) {
                const double a = ps.count(cls) ? ps.at(cls) : 0.0;
                const double b = pf.count(cls) ? pf.at(cls) : 0.0;
                shifts[cls][cell] = a - b;
            }
        }
    }

    // Centre each (sentiment, key) on its cross-language average.
    SentimentShiftScores out;
    for (const auto& [key, cells] : shifts) {
        std::map<std::string, double> sum_by_sentiment;
        std::map<std::string, long> count_by_sentiment;
        for (const auto& [cell, shift] : cells) {
            sum_by_sentiment[cell.second] += shift;
            ++count_by_sentiment[cell.second];
        }
        for (const auto& [cell, shift] : cells) {
            const double avg =
                sum_by_sentiment[cell.second] / static_cast<double>(count_by_sentiment[cell.second]);
            out.values[{cell.first, cell.second, key}] = shift - avg;
        }
    }
    for (const auto& [cell, labels] : by_language_sentiment)
        for (const auto& [language, key] : skipped_cells)
            if (cell.first == language) out.skipped.insert({cell.first, cell.second, key});
    return out;
}

}  // namespace sertest::metrics
