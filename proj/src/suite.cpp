#include "sertest/suite.hpp"

#include <algorithm>
#include <cmath>

#include "sertest/metrics.hpp"
#include "sertest/random.hpp"

namespace sertest::suite {

void TestResult::finalize() {
    n_passed = n_failed = n_skipped = 0;
    for (const auto& inst : instances) {
        if (inst.skipped)
            ++n_skipped;
        else if (inst.passed)
            ++n_passed;
        else
            ++n_failed;
    }
    const long judged = n_passed + n_failed;
    pass_fraction = judged == 0 ? 0.0 : static_cast<double>(n_passed) / judged;
}

namespace {

using metrics::DisparityMode;

struct Pair {
    double truth;
    double pred;
};

void add_skip(TestResult& result, const std::string& dataset, const std::string& key,
              const std::string& reason) {
    Instance inst;
    inst.dataset = dataset;
    inst.key = key;
    inst.skipped = true;
    inst.reason = reason;
    result.instances.push_back(std::move(inst));
}

void add_value(TestResult& result, const TestSpec& spec, const std::string& dataset,
               const std::string& key, double value, double threshold,
               std::map<std::string, double> info = {}, const std::string& note = {}) {
    Instance inst;
    inst.dataset = dataset;
    inst.key = key;
    inst.value = value;
    inst.threshold = threshold;
    inst.passed = compare(value, spec.comparison, threshold);
    inst.reason = note;
    inst.info = std::move(info);
    result.instances.push_back(std::move(inst));
}

/// Gold label + prediction pairs for the samples covered by both.
struct PairedData {
    std::vector<double> truth_values, pred_values;      // dimensional tasks
    std::vector<std::string> truth_classes, pred_classes;  // categories
    std::set<std::string> classes;
    long n_missing_gold = 0;
    long n_missing_pred = 0;

    std::size_t size() const {
        return truth_values.empty() ? truth_classes.size() : truth_values.size();
    }
};

PairedData collect_pairs(const DatasetManifest& manifest, const PredictionSet& preds, Task task) {
    PairedData data;
    for (const auto& s : manifest.samples) {
        const Label* gold = s.gold_for(task);
        auto it = preds.predictions.find(s.id);
        if (!gold) {
            ++data.n_missing_gold;
            continue;
        }
        if (it == preds.predictions.end()) {
            ++data.n_missing_pred;
            continue;
        }
        if (is_dimensional(task)) {
            data.truth_values.push_back(gold->value());
            data.pred_values.push_back(it->second.value());
        } else {
            data.truth_classes.push_back(gold->cls());
            data.pred_classes.push_back(it->second.cls());
            data.classes.insert(gold->cls());
            data.classes.insert(it->second.cls());
        }
    }
    return data;
}

// ---------------------------------------------------------------------------
// Correctness

void eval_classification(const TestSpec& spec, const std::string& dataset,
                         const PairedData& data, TestResult& result) {
    if (data.truth_classes.empty()) {
        add_skip(result, dataset, "", "no samples with both gold and prediction");
        return;
    }
    const auto cm = metrics::class_metrics(data.truth_classes, data.pred_classes, data.classes);
    std::map<std::string, double> info{{"n", static_cast<double>(data.size())}};
    if (spec.metric == "UAR") {
        add_value(result, spec, dataset, "", cm.uar, spec.threshold, info);
    } else if (spec.metric == "UAP") {
        add_value(result, spec, dataset, "", cm.uap, spec.threshold, info);
    } else if (spec.metric == "RPC") {
        for (const auto& [cls, recall] : cm.recall_per_class)
            add_value(result, spec, dataset, cls, recall, spec.threshold);
    } else if (spec.metric == "PPC") {
        for (const auto& [cls, precision] : cm.precision_per_class)
            add_value(result, spec, dataset, cls, precision, spec.threshold);
    }
}

void eval_consistency(const TestSpec& spec, const std::string& dataset,
                      const DatasetManifest& manifest, const PredictionSet& preds,
                      TestResult& result) {
    // Dimensional predictions grouped by the samples' categorical label.
    std::map<std::string, std::vector<double>> by_category;
    for (const auto& s : manifest.samples) {
        auto it = preds.predictions.find(s.id);
        if (it == preds.predictions.end()) continue;
        std::string category;
        if (const Label* gold = s.gold_for(Task::categories))
            category = gold->cls();
        else if (auto attr = s.attr_string("category"))
            category = *attr;
        if (category.empty()) continue;
        by_category[category].push_back(it->second.value());
    }
    if (by_category.empty()) {
        add_skip(result, dataset, "", "no samples with categorical annotation");
        return;
    }
    for (const auto& [category, values] : by_category) {
        const auto range = expected_range(category, spec.task);
        if (!range) continue;  // no established correspondence
        const auto fraction = metrics::in_range_fraction(values, range->first, range->second);
        if (!fraction) continue;
        add_value(result, spec, dataset, category, *fraction, spec.threshold,
                  {{"n", static_cast<double>(values.size())},
                   {"lo", range->first},
                   {"hi", range->second}});
    }
}

void eval_distribution(const TestSpec& spec, const std::string& dataset, const PairedData& data,
                       TestResult& result) {
    if (data.size() == 0) {
        add_skip(result, dataset, "", "no samples with both gold and prediction");
        return;
    }
    if (spec.task == Task::categories) {
        std::map<std::string, double> truth_prop, pred_prop;
        for (const auto& c : data.truth_classes) truth_prop[c] += 1.0;
        for (const auto& c : data.pred_classes) pred_prop[c] += 1.0;
        const double n = static_cast<double>(data.size());
        for (const auto& cls : data.classes) {
            const double t = truth_prop.count(cls) ? truth_prop[cls] / n : 0.0;
            const double p = pred_prop.count(cls) ? pred_prop[cls] / n : 0.0;
            add_value(result, spec, dataset, cls, p - t, spec.threshold);
        }
    } else {
        const BinSpec bins = spec.bin_spec.value_or(BinSpec{10});
        const double jsd =
            metrics::jensen_shannon_distance(data.truth_values, data.pred_values, bins);
        // The shift in mean value is reported alongside but does not gate.
        const double mean_diff =
            std::abs(metrics::mean(data.pred_values) - metrics::mean(data.truth_values));
        add_value(result, spec, dataset, "", jsd, spec.threshold,
                  {{"abs_mean_diff", mean_diff}, {"n", static_cast<double>(data.size())}});
    }
}

void eval_regression(const TestSpec& spec, const std::string& dataset, const PairedData& data,
                     TestResult& result) {
    if (data.truth_values.size() < 2) {
        add_skip(result, dataset, "", "fewer than 2 samples with both gold and prediction");
        return;
    }
    std::map<std::string, double> info{{"n", static_cast<double>(data.size())}};
    if (spec.metric == "CCC") {
        add_value(result, spec, dataset, "",
                  metrics::concordance_corr(data.truth_values, data.pred_values), spec.threshold,
                  info);
    } else if (spec.metric == "MAE") {
        add_value(result, spec, dataset, "",
                  metrics::mean_absolute_error(data.truth_values, data.pred_values),
                  spec.threshold, info);
    } else if (spec.metric == "PCC") {
        try {
            add_value(result, spec, dataset, "",
                      metrics::pearson_corr(data.truth_values, data.pred_values), spec.threshold,
                      info);
        } catch (const metrics::UndefinedMetric&) {
            Instance inst;
            inst.dataset = dataset;
            inst.value = 0.0;
            inst.threshold = spec.threshold;
            inst.passed = false;
            inst.reason = "undefined: zero variance";
            result.instances.push_back(std::move(inst));
        }
    }
}

void eval_speaker_test(const TestSpec& spec, const std::string& dataset,
                       const DatasetManifest& manifest, const PredictionSet& preds,
                       TestResult& result) {
    const auto stats =
        metrics::speaker_stats(manifest, preds, spec.task, spec.prereqs.min_samples_regression,
                               spec.prereqs.min_samples_per_class);
    const std::size_t n_speakers =
        is_dimensional(spec.task) ? stats.mean_truth.size() : stats.prop_truth.size();
    if (n_speakers < static_cast<std::size_t>(spec.prereqs.min_speakers)) {
        add_skip(result, dataset, "",
                 "only " + std::to_string(n_speakers) + " qualifying speakers (need " +
                     std::to_string(spec.prereqs.min_speakers) + ")");
        return;
    }
    std::map<std::string, double> info{
        {"n_speakers", static_cast<double>(n_speakers)},
        {"excluded_speakers", static_cast<double>(stats.excluded_speakers)}};

    const bool ranking = spec.test == "Correctness Speaker Ranking";
    if (is_dimensional(spec.task)) {
        std::vector<double> truth_means, pred_means;
        for (const auto& [speaker, t] : stats.mean_truth) {
            truth_means.push_back(t);
            pred_means.push_back(stats.mean_pred.at(speaker));
        }
        if (ranking) {
            try {
                const double rho = metrics::spearman_rho(truth_means, pred_means);
                add_value(result, spec, dataset, "", rho, spec.threshold, info,
                          rho < 0 ? "negative rank correlation" : "");
            } catch (const metrics::UndefinedMetric&) {
                Instance inst;
                inst.dataset = dataset;
                inst.threshold = spec.threshold;
                inst.passed = false;
                inst.reason = "undefined: tied speaker averages";
                result.instances.push_back(std::move(inst));
            }
        } else {
            add_value(result, spec, dataset, "",
                      metrics::mean_absolute_error(truth_means, pred_means), spec.threshold, info);
        }
        return;
    }

    // Categories: one instance per class over speaker proportions.
    if (ranking) {
        std::set<std::string> classes;
        for (const auto& [speaker, props] : stats.prop_truth)
            for (const auto& [cls, p] : props) classes.insert(cls);
        for (const auto& cls : classes) {
            std::vector<double> truth_props, pred_props;
            for (const auto& [speaker, props] : stats.prop_truth) {
                truth_props.push_back(props.count(cls) ? props.at(cls) : 0.0);
                const auto& pp = stats.prop_pred.at(speaker);
                pred_props.push_back(pp.count(cls) ? pp.at(cls) : 0.0);
            }
            try {
                const double rho = metrics::spearman_rho(truth_props, pred_props);
                add_value(result, spec, dataset, cls, rho, spec.threshold, info,
                          rho < 0 ? "negative rank correlation" : "");
            } catch (const metrics::UndefinedMetric&) {
                Instance inst;
                inst.dataset = dataset;
                inst.key = cls;
                inst.threshold = spec.threshold;
                inst.passed = false;
                inst.reason = "undefined: tied speaker proportions";
                result.instances.push_back(std::move(inst));
            }
        }
    } else {
        for (const auto& [cls, mae] : metrics::class_proportion_mae(stats.prop_truth,
                                                                    stats.prop_pred))
            add_value(result, spec, dataset, cls, mae, spec.threshold, info);
    }
}

void eval_correctness(const TestSpec& spec, const std::string& dataset,
                      const DatasetManifest& manifest, const PredictionSet& preds,
                      TestResult& result) {
    if (spec.test == "Correctness Consistency") {
        eval_consistency(spec, dataset, manifest, preds, result);
        return;
    }
    if (spec.test == "Correctness Speaker Average" || spec.test == "Correctness Speaker Ranking") {
        eval_speaker_test(spec, dataset, manifest, preds, result);
        return;
    }
    const PairedData data = collect_pairs(manifest, preds, spec.task);
    if (spec.test == "Correctness Classification")
        eval_classification(spec, dataset, data, result);
    else if (spec.test == "Correctness Distribution")
        eval_distribution(spec, dataset, data, result);
    else if (spec.test == "Correctness Regression")
        eval_regression(spec, dataset, data, result);
    else
        add_skip(result, dataset, "", "unknown correctness test '" + spec.test + "'");
}

// ---------------------------------------------------------------------------
// Fairness

bool fairness_metric_needs_gold(const std::string& metric) {
    return metric == "Diff. CCC" || metric == "Diff. UAR" || metric == "Diff. RPC" ||
           metric == "Diff. PPC" || metric == "Diff. Recall Per Bin" ||
           metric == "Diff. Precision Per Bin";
}

struct GroupData {
    std::string name;
    std::vector<double> truth_values, pred_values;
    std::vector<std::string> truth_classes, pred_classes;
    std::size_t size() const {
        return is_values() ? pred_values.size() : pred_classes.size();
    }
    bool is_values() const { return truth_classes.empty() && pred_classes.empty(); }
};

double resolve_threshold_for(const TestSpec& spec, const EvalContext& ctx, int n_groups,
                             int samples_per_group) {
    if (!spec.auto_threshold) return spec.threshold;
    static const sim::ThresholdTable empty;
    const sim::ThresholdTable& table = ctx.thresholds ? *ctx.thresholds : empty;
    return resolve_fairness_threshold(spec.metric, n_groups, samples_per_group, table,
                                      ctx.simulate_missing_thresholds, ctx.seed,
                                      ctx.simulated_cache);
}

void eval_sentiment(const TestSpec& spec, const std::string& dataset,
                    const DatasetManifest& manifest, const PredictionSet& preds,
                    TestResult& result) {
    std::map<std::pair<std::string, std::string>, std::vector<Label>> by_cell;
    std::map<std::string, std::vector<Label>> by_language;
    for (const auto& s : manifest.samples) {
        auto it = preds.predictions.find(s.id);
        if (it == preds.predictions.end()) continue;
        auto language = s.attr_string("language");
        if (!language) continue;
        by_language[*language].push_back(it->second);
        if (auto sentiment = s.attr_string("sentiment"))
            by_cell[{*language, *sentiment}].push_back(it->second);
    }
    if (by_language.size() < 2) {
        add_skip(result, dataset, "", "sentiment shift needs at least 2 languages");
        return;
    }
    if (by_cell.empty()) {
        add_skip(result, dataset, "", "no samples carry a sentiment attribute");
        return;
    }
    const BinSpec bins = spec.bin_spec.value_or(BinSpec{4});
    const auto scores =
        metrics::sentiment_shift_scores(by_cell, by_language, spec.task, bins, spec.n_min);

    const bool mean_metric = spec.metric == "Diff. Mean Shift";
    for (const auto& [key, score] : scores.values) {
        if (mean_metric != (key.key == "mean")) continue;
        add_value(result, spec, dataset, key.language + "/" + key.sentiment +
                      (key.key == "mean" ? "" : "/" + key.key),
                  score, spec.threshold);
    }
    for (const auto& key : scores.skipped) {
        if (mean_metric != (key.key == "mean")) continue;
        add_skip(result, dataset, key.language + "/" + key.sentiment + "/" + key.key,
                 "bin below n_min in the language reference");
    }
}

void eval_fairness(const TestSpec& spec, const std::string& dataset,
                   const DatasetManifest& manifest, const PredictionSet& preds,
                   const EvalContext& ctx, TestResult& result) {
    if (spec.grouping.empty()) {
        add_skip(result, dataset, "", "fairness spec lacks a grouping attribute");
        return;
    }
    if (spec.grouping == "sentiment") {
        eval_sentiment(spec, dataset, manifest, preds, result);
        return;
    }

    GroupPartition partition;
    try {
        partition = spec.grouping == "pitch" ? pitch_partition(manifest)
                                             : partition_by_attribute(manifest, spec.grouping);
    } catch (const ValidationError& e) {
        add_skip(result, dataset, "", e.what());
        return;
    }

    const bool needs_gold = fairness_metric_needs_gold(spec.metric);
    std::map<std::string, const Sample*> index;
    for (const auto& s : manifest.samples) index[s.id] = &s;

    // Keep only samples usable for this metric.
    GroupPartition usable;
    usable.attribute = partition.attribute;
    for (const auto& [group, ids] : partition.groups) {
        for (const auto& id : ids) {
            const Sample* s = index.at(id);
            if (!preds.predictions.count(id)) continue;
            if (needs_gold && !s->gold_for(spec.task)) continue;
            usable.groups[group].push_back(id);
        }
        if (usable.groups.count(group) && usable.groups[group].empty())
            usable.groups.erase(group);
    }
    if (usable.groups.size() < 2) {
        add_skip(result, dataset, "", "fewer than 2 groups with usable samples");
        return;
    }

    if (spec.balance_n > 0) {
        try {
            usable = sim::balance_groups(manifest, usable, spec.task, spec.balance_n,
                                         mix_seed(ctx.seed, fnv1a(spec.id + "/" + dataset)));
        } catch (const ValidationError& e) {
            add_skip(result, dataset, "", std::string("balancing: ") + e.what());
            return;
        }
    }

    std::vector<GroupData> groups;
    GroupData combined;
    combined.name = "combined";
    std::size_t min_group = 0;
    for (const auto& [name, ids] : usable.groups) {
        GroupData g;
        g.name = name;
        for (const auto& id : ids) {
            const Sample* s = index.at(id);
            const Label& pred = preds.predictions.at(id);
            if (is_dimensional(spec.task)) {
                g.pred_values.push_back(pred.value());
                if (const Label* gold = s->gold_for(spec.task))
                    g.truth_values.push_back(gold->value());
            } else {
                g.pred_classes.push_back(pred.cls());
                if (const Label* gold = s->gold_for(spec.task))
                    g.truth_classes.push_back(gold->cls());
            }
        }
        combined.pred_values.insert(combined.pred_values.end(), g.pred_values.begin(),
                                    g.pred_values.end());
        combined.truth_values.insert(combined.truth_values.end(), g.truth_values.begin(),
                                     g.truth_values.end());
        combined.pred_classes.insert(combined.pred_classes.end(), g.pred_classes.begin(),
                                     g.pred_classes.end());
        combined.truth_classes.insert(combined.truth_classes.end(), g.truth_classes.begin(),
                                      g.truth_classes.end());
        min_group = min_group == 0 ? g.size() : std::min(min_group, g.size());
        groups.push_back(std::move(g));
    }

    const double threshold = resolve_threshold_for(spec, ctx, static_cast<int>(groups.size()),
                                                   static_cast<int>(min_group));
    const BinSpec bins = spec.bin_spec.value_or(BinSpec{4});
    const int n_min = spec.n_min.value_or(0);

    for (const auto& g : groups) {
        if (spec.metric == "Diff. Mean Value") {
            add_value(result, spec, dataset, g.name,
                      metrics::mean(g.pred_values) - metrics::mean(combined.pred_values),
                      threshold);
        } else if (spec.metric == "Relative Diff. Per Class") {
            std::map<std::string, double> gp, cp;
            for (const auto& c : g.pred_classes) gp[c] += 1.0;
            for (const auto& c : combined.pred_classes) cp[c] += 1.0;
            std::set<std::string> classes;
            for (const auto& [c, v] : cp) classes.insert(c);
            for (const auto& [c, v] : gp) classes.insert(c);
            for (const auto& cls : classes) {
                const double a = gp.count(cls) ? gp[cls] / g.pred_classes.size() : 0.0;
                const double b = cp.count(cls) ? cp[cls] / combined.pred_classes.size() : 0.0;
                add_value(result, spec, dataset, g.name + "/" + cls, a - b, threshold);
            }
        } else if (spec.metric == "Relative Diff. Per Bin") {
            const auto gc = metrics::bin_values(g.pred_values, bins);
            const auto cc = metrics::bin_values(combined.pred_values, bins);
            for (int b = 0; b < bins.n_bins; ++b) {
                const std::string key = g.name + "/bin" + std::to_string(b);
                if (cc[b] < n_min) {
                    add_skip(result, dataset, key, "bin below n_min in the combined data");
                    continue;
                }
                add_value(result, spec, dataset, key,
                          static_cast<double>(gc[b]) / g.pred_values.size() -
                              static_cast<double>(cc[b]) / combined.pred_values.size(),
                          threshold);
            }
        } else if (spec.metric == "Diff. CCC") {
            if (g.truth_values.size() < 2) {
                add_skip(result, dataset, g.name, "fewer than 2 labelled samples in group");
                continue;
            }
            add_value(result, spec, dataset, g.name,
                      metrics::concordance_corr(g.truth_values, g.pred_values) -
                          metrics::concordance_corr(combined.truth_values, combined.pred_values),
                      threshold);
        } else if (spec.metric == "Diff. UAR" || spec.metric == "Diff. RPC" ||
                   spec.metric == "Diff. PPC") {
            std::set<std::string> classes;
            for (const auto& c : combined.truth_classes) classes.insert(c);
            for (const auto& c : combined.pred_classes) classes.insert(c);
            const auto gm = metrics::class_metrics(g.truth_classes, g.pred_classes, classes);
            const auto cm =
                metrics::class_metrics(combined.truth_classes, combined.pred_classes, classes);
            if (spec.metric == "Diff. UAR") {
                add_value(result, spec, dataset, g.name, gm.uar - cm.uar, threshold);
            } else {
                const auto& gv =
                    spec.metric == "Diff. RPC" ? gm.recall_per_class : gm.precision_per_class;
                const auto& cv =
                    spec.metric == "Diff. RPC" ? cm.recall_per_class : cm.precision_per_class;
                for (const auto& cls : classes) {
                    const std::string key = g.name + "/" + cls;
                    auto git = gv.find(cls);
                    auto cit = cv.find(cls);
                    if (git == gv.end() || cit == cv.end()) {
                        add_skip(result, dataset, key, "metric undefined for this class");
                        continue;
                    }
                    add_value(result, spec, dataset, key, git->second - cit->second, threshold);
                }
            }
        } else if (spec.metric == "Diff. Recall Per Bin" ||
                   spec.metric == "Diff. Precision Per Bin") {
            const auto gm = metrics::binned_class_metrics(g.truth_values, g.pred_values, bins,
                                                          n_min);
            const auto cm = metrics::binned_class_metrics(combined.truth_values,
                                                          combined.pred_values, bins, n_min);
            const bool recall = spec.metric == "Diff. Recall Per Bin";
            const auto& gv = recall ? gm.recall_per_bin : gm.precision_per_bin;
            const auto& cv = recall ? cm.recall_per_bin : cm.precision_per_bin;
            for (int b = 0; b < bins.n_bins; ++b) {
                const std::string key = g.name + "/bin" + std::to_string(b);
                if (gm.skipped_bins.count(b) || cm.skipped_bins.count(b)) {
                    add_skip(result, dataset, key, "bin below n_min");
                    continue;
                }
                auto git = gv.find(b);
                auto cit = cv.find(b);
                if (git == gv.end() || cit == cv.end()) {
                    add_skip(result, dataset, key, "metric undefined for this bin");
                    continue;
                }
                add_value(result, spec, dataset, key, git->second - cit->second, threshold);
            }
        } else {
            add_skip(result, dataset, g.name, "unknown fairness metric '" + spec.metric + "'");
        }
    }
}

// ---------------------------------------------------------------------------
// Robustness

void eval_robustness(const TestSpec& spec, const std::string& dataset,
                     const DatasetManifest& manifest, const EvalContext& ctx,
                     TestResult& result) {
    if (!ctx.robustness) {
        add_skip(result, dataset, "", "no robustness data source configured");
        return;
    }
    const RobustnessData data = ctx.robustness(spec, dataset);
    if (!data.skip_reason.empty()) {
        add_skip(result, dataset, "", data.skip_reason);
        return;
    }
    if (!data.baseline || data.variants.empty()) {
        add_skip(result, dataset, "", "missing baseline or perturbed predictions");
        return;
    }

    if (spec.metric == "Perc. Unchanged Predictions") {
        // Pool the pairs over all variants of the comparison.
        double unchanged_weighted = 0.0;
        std::size_t total = 0;
        for (const auto& [label, variant] : data.variants) {
            std::size_t n = 0;
            try {
                const double fraction =
                    metrics::unchanged_fraction(*data.baseline, *variant, spec.task, &n);
                unchanged_weighted += fraction * static_cast<double>(n);
                total += n;
            } catch (const std::invalid_argument&) {
                // no common ids for this variant; contributes nothing
            }
        }
        if (total == 0) {
            add_skip(result, dataset, "", "no common ids between baseline and variants");
            return;
        }
        add_value(result, spec, dataset, "", unchanged_weighted / static_cast<double>(total),
                  spec.threshold, {{"n_pairs", static_cast<double>(total)}});
        return;
    }

    // Change metrics compare correctness before and after the perturbation.
    const auto& [label, variant] = data.variants.front();
    std::vector<double> truth_v, base_v, pert_v;
    std::vector<std::string> truth_c, base_c, pert_c;
    std::set<std::string> classes;
    for (const auto& s : manifest.samples) {
        const Label* gold = s.gold_for(spec.task);
        if (!gold) continue;
        auto bit = data.baseline->predictions.find(s.id);
        auto pit = variant->predictions.find(s.id);
        if (bit == data.baseline->predictions.end() || pit == variant->predictions.end()) continue;
        if (is_dimensional(spec.task)) {
            truth_v.push_back(gold->value());
            base_v.push_back(bit->second.value());
            pert_v.push_back(pit->second.value());
        } else {
            truth_c.push_back(gold->cls());
            base_c.push_back(bit->second.cls());
            pert_c.push_back(pit->second.cls());
            classes.insert(gold->cls());
            classes.insert(bit->second.cls());
            classes.insert(pit->second.cls());
        }
    }
    if (spec.metric == "Change CCC") {
        if (truth_v.size() < 2) {
            add_skip(result, dataset, "", "fewer than 2 labelled pairs");
            return;
        }
        add_value(result, spec, dataset, "",
                  metrics::concordance_corr(truth_v, pert_v) -
                      metrics::concordance_corr(truth_v, base_v),
                  spec.threshold, {{"n", static_cast<double>(truth_v.size())}});
    } else if (spec.metric == "Change UAR") {
        if (truth_c.empty()) {
            add_skip(result, dataset, "", "no labelled pairs");
            return;
        }
        const auto before = metrics::class_metrics(truth_c, base_c, classes);
        const auto after = metrics::class_metrics(truth_c, pert_c, classes);
        add_value(result, spec, dataset, "", after.uar - before.uar, spec.threshold,
                  {{"n", static_cast<double>(truth_c.size())}});
    } else {
        add_skip(result, dataset, "", "unknown robustness metric '" + spec.metric + "'");
    }
}

}  // namespace

TestResult evaluate_test(const TestSpec& spec, const EvalContext& ctx) {
    TestResult result;
    result.spec_id = spec.id;
    result.test = spec.test;
    result.category = spec.category;
    result.task = spec.task;
    result.metric = spec.metric;
    result.comparison = spec.comparison;

    for (const auto& dataset : spec.datasets) {
        const DatasetManifest* manifest = ctx.manifest ? ctx.manifest(dataset) : nullptr;
        if (!manifest) {
            add_skip(result, dataset, "", "dataset not bound");
            continue;
        }
        if (spec.category == Category::robustness) {
            eval_robustness(spec, dataset, *manifest, ctx, result);
            continue;
        }
        const PredictionSet* preds = ctx.predictions ? ctx.predictions(dataset, spec.task) : nullptr;
        if (!preds) {
            add_skip(result, dataset, "", "no predictions for task " +
                                              std::string(to_string(spec.task)));
            continue;
        }
        if (spec.category == Category::correctness)
            eval_correctness(spec, dataset, *manifest, *preds, result);
        else
            eval_fairness(spec, dataset, *manifest, *preds, ctx, result);
    }
    result.finalize();
    return result;
}

std::vector<TestResult> run_suite(const std::vector<TestSpec>& specs, const EvalContext& ctx) {
    std::vector<TestResult> results;
    results.reserve(specs.size());
    for (const auto& spec : specs) results.push_back(evaluate_test(spec, ctx));
    std::sort(results.begin(), results.end(), [](const TestResult& a, const TestResult& b) {
        if (a.category != b.category) return static_cast<int>(a.category) < static_cast<int>(b.category);
        return a.spec_id < b.spec_id;
    });
    return results;
}

Aggregates aggregate(const std::vector<TestResult>& results) {
    Aggregates agg;

    // Pass fractions are pooled per (task, test name) so that a test's
    // score covers all of its metrics, datasets, and variants.
    struct Tally {
        long passed = 0;
        long failed = 0;
        Category category = Category::correctness;
    };
    std::map<std::pair<Task, std::string>, Tally> tallies;
    for (const auto& r : results) {
        auto& tally = tallies[{r.task, r.test}];
        tally.passed += r.n_passed;
        tally.failed += r.n_failed;
        tally.category = r.category;
    }
    std::map<std::pair<Task, Category>, std::pair<double, long>> category_acc;
    std::map<Task, std::pair<double, long>> task_acc;
    for (const auto& [key, tally] : tallies) {
        const long judged = tally.passed + tally.failed;
        if (judged == 0) continue;  // fully skipped tests are excluded
        const double fraction = static_cast<double>(tally.passed) / judged;
        agg.per_test[key] = fraction;
        auto& cat = category_acc[{key.first, tally.category}];
        cat.first += fraction;
        ++cat.second;
        auto& task = task_acc[key.first];
        task.first += fraction;
        ++task.second;
    }
    for (const auto& [key, acc] : category_acc)
        agg.per_category[key] = acc.first / static_cast<double>(acc.second);
    double overall = 0.0;
    for (const auto& [task, acc] : task_acc) {
        agg.per_task[task] = acc.first / static_cast<double>(acc.second);
        overall += agg.per_task[task];
    }
    if (!task_acc.empty()) {
        agg.overall = overall / static_cast<double>(task_acc.size());
        agg.has_any = true;
    }
    return agg;
}

double resolve_fairness_threshold(const std::string& metric_id, int n_groups,
                                  int samples_per_group, const sim::ThresholdTable& table,
                                  bool allow_simulation, std::uint64_t seed,
                                  sim::ThresholdTable* cache) {
    if (auto hit = table.lookup(metric_id, n_groups, samples_per_group)) return *hit;
    if (cache)
        if (auto hit = cache->lookup(metric_id, n_groups, samples_per_group)) return *hit;
    if (!allow_simulation)
        throw ValidationError("no threshold table entry for metric '" + metric_id + "' with " +
                              std::to_string(n_groups) + " groups");

    const std::string metric = sim::canonical_sim_metric(metric_id);
    sim::RandomModelConfig model = sim::RandomModelConfig::gaussian();
    std::optional<sim::RandomModelConfig> truth;
    if (metric == "rel-diff-per-class" || metric == "diff-uar" || metric == "diff-rpc" ||
        metric == "diff-ppc")
        model = sim::RandomModelConfig::uniform();
    if (metric == "diff-ccc" || metric == "diff-recall-per-bin" ||
        metric == "diff-precision-per-bin")
        truth = sim::RandomModelConfig::gaussian();
    if (metric == "diff-uar" || metric == "diff-rpc" || metric == "diff-ppc")
        truth = sim::RandomModelConfig::sparse();

    const int repeats = 1000;
    const std::uint64_t sim_seed = mix_seed(seed, fnv1a(metric));
    const double value = sim::simulate_threshold(metric, n_groups, samples_per_group, model, truth,
                                                 repeats, sim_seed);
    if (cache)
        cache->insert({metric, n_groups, samples_per_group, model.id(),
                       truth ? truth->id() : "-"},
                      {value, value, repeats, sim_seed});
    return value;
}

}  // namespace sertest::suite
