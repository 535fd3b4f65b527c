#include "sertest/fairness_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <thread>

#include "sertest/metrics.hpp"

namespace sertest::sim {

RandomModelConfig RandomModelConfig::gaussian() { return {}; }

RandomModelConfig RandomModelConfig::uniform(int n_classes) {
    RandomModelConfig c;
    c.kind = RandomModelKind::categorical_uniform;
    c.n_classes = n_classes;
    return c;
}

RandomModelConfig RandomModelConfig::sparse() {
    RandomModelConfig c;
    c.kind = RandomModelKind::categorical_sparse;
    c.n_classes = 4;
    c.class_probs = {0.05, 0.05, 0.3, 0.6};
    return c;
}

std::string RandomModelConfig::id() const {
    switch (kind) {
        case RandomModelKind::gaussian_truncated: return "gaussian";
        case RandomModelKind::categorical_uniform: return "uniform" + std::to_string(n_classes);
        case RandomModelKind::categorical_sparse: return "sparse" + std::to_string(n_classes);
    }
    return "?";
}

RandomModelConfig RandomModelConfig::from_id(const std::string& id) {
    if (id == "gaussian") return gaussian();
    if (id.rfind("uniform", 0) == 0) {
        int n = id.size() > 7 ? std::stoi(id.substr(7)) : 4;
        return uniform(n);
    }
    if (id.rfind("sparse", 0) == 0) return sparse();
    throw ValidationError("unknown random model id: '" + id + "'");
}

std::vector<double> sample_values(const RandomModelConfig& config, int n, Rng& rng) {
    if (config.kind != RandomModelKind::gaussian_truncated)
        throw std::invalid_argument("categorical model cannot produce values");
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
        double v;
        do {
            v = config.mean + config.stddev * rng.normal();
        } while (v < config.lo || v > config.hi);
        out[i] = v;
    }
    return out;
}

std::vector<int> sample_classes(const RandomModelConfig& config, int n, Rng& rng) {
    std::vector<int> out(n);
    if (config.kind == RandomModelKind::categorical_uniform) {
        for (int i = 0; i < n; ++i)
            out[i] = static_cast<int>(rng.uniform_int(config.n_classes));
        return out;
    }
    if (config.kind == RandomModelKind::categorical_sparse) {
        double total = 0.0;
        for (double p : config.class_probs) total += p;
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("class probabilities must sum to 1");
        for (int i = 0; i < n; ++i) {
            double u = rng.uniform01();
            int cls = config.n_classes - 1;
            double cum = 0.0;
            for (int c = 0; c < config.n_classes; ++c) {
                cum += config.class_probs[c];
                if (u < cum) {
                    cls = c;
                    break;
                }
            }
            out[i] = cls;
        }
        return out;
    }
    throw std::invalid_argument("gaussian model cannot produce classes");
}

std::vector<Label> sample_random_predictions(const RandomModelConfig& config, int n,
                                             std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    Rng rng(seed);
    std::vector<Label> out;
    out.reserve(n);
    if (config.kind == RandomModelKind::gaussian_truncated) {
        for (double v : sample_values(config, n, rng)) out.push_back(Label::of_value(v));
    } else {
        for (int c : sample_classes(config, n, rng))
            out.push_back(Label::of_class("class" + std::to_string(c)));
    }
    return out;
}

int n_min_bin(long n) {
    if (n <= 0) return 0;
    const double phi = 0.5 * std::erfc(1.5 / std::sqrt(2.0));  // P(X <= 0.25), X ~ N(0.5, 1/6)
    return static_cast<int>(std::lround(phi * static_cast<double>(n)));
}

std::string canonical_sim_metric(const std::string& metric_id) {
    static const std::map<std::string, std::string> aliases = {
        {"diff-mean", "diff-mean"},
        {"Diff. Mean Value", "diff-mean"},
        {"rel-diff-per-class", "rel-diff-per-class"},
        {"Relative Diff. Per Class", "rel-diff-per-class"},
        {"rel-diff-per-bin", "rel-diff-per-bin"},
        {"Relative Diff. Per Bin", "rel-diff-per-bin"},
        {"diff-ccc", "diff-ccc"},
        {"Diff. CCC", "diff-ccc"},
        {"diff-uar", "diff-uar"},
        {"Diff. UAR", "diff-uar"},
        {"diff-rpc", "diff-rpc"},
        {"Diff. RPC", "diff-rpc"},
        {"diff-ppc", "diff-ppc"},
        {"Diff. PPC", "diff-ppc"},
        {"diff-recall-per-bin", "diff-recall-per-bin"},
        {"Diff. Recall Per Bin", "diff-recall-per-bin"},
        {"diff-precision-per-bin", "diff-precision-per-bin"},
        {"Diff. Precision Per Bin", "diff-precision-per-bin"},
    };
    auto it = aliases.find(metric_id);
    if (it == aliases.end())
        throw ValidationError("unsupported fairness simulation metric: '" + metric_id + "'");
    return it->second;
}

bool sim_metric_needs_truth(const std::string& canonical_id) {
    return canonical_id == "diff-ccc" || canonical_id == "diff-uar" || canonical_id == "diff-rpc" ||
           canonical_id == "diff-ppc" || canonical_id == "diff-recall-per-bin" ||
           canonical_id == "diff-precision-per-bin";
}

namespace {

// Numeric twins of the metrics-module kernels, specialized for the hot
// simulation loop (classes and bins as small ints). Cross-checked against
// the metrics module in the unit tests.

double mean_of(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double ccc_of(std::span<const double> t, std::span<const double> p) {
    const double mt = mean_of(t), mp = mean_of(p);
    double vt = 0.0, vp = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        vt += (t[i] - mt) * (t[i] - mt);
        vp += (p[i] - mp) * (p[i] - mp);
        cov += (t[i] - mt) * (p[i] - mp);
    }
    const double n = static_cast<double>(t.size());
    vt /= n;
    vp /= n;
    cov /= n;
    const double denom = vt + vp + (mt - mp) * (mt - mp);
    if (denom == 0.0) return 1.0;
    return 2.0 * cov / denom;
}

struct IntConfusion {
    std::vector<long> truth_count, pred_count, hit_count;
    explicit IntConfusion(int k) : truth_count(k, 0), pred_count(k, 0), hit_count(k, 0) {}
    void add(int t, int p) {
        ++truth_count[t];
        ++pred_count[p];
        if (t == p) ++hit_count[t];
    }
    // Recall/precision with the same undefined-entry conventions as
    // metrics::class_metrics: absent classes yield no entry.
    std::vector<double> recalls() const {
        std::vector<double> r(truth_count.size(),
                              std::numeric_limits<double>::quiet_NaN());
        for (std::size_t c = 0; c < truth_count.size(); ++c)
            if (truth_count[c] > 0)
                r[c] = static_cast<double>(hit_count[c]) / static_cast<double>(truth_count[c]);
        return r;
    }
    std::vector<double> precisions() const {
        std::vector<double> p(pred_count.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t c = 0; c < pred_count.size(); ++c)
            if (pred_count[c] > 0)
                p[c] = static_cast<double>(hit_count[c]) / static_cast<double>(pred_count[c]);
        return p;
    }
    double uar() const {
        double s = 0.0;
        long k = 0;
        for (std::size_t c = 0; c < truth_count.size(); ++c)
            if (truth_count[c] > 0) {
                s += static_cast<double>(hit_count[c]) / static_cast<double>(truth_count[c]);
                ++k;
            }
        return k == 0 ? 0.0 : s / static_cast<double>(k);
    }
};

int value_bin(double v, int n_bins) {
    int b = static_cast<int>(v * n_bins);
    return b >= n_bins ? n_bins - 1 : b;
}

// One repeat of the simulation: the largest |metric(group) - metric(pool)|
// over all groups and metric components.
double repeat_max_disparity(const std::string& metric, int n_groups, int spg,
                            const RandomModelConfig& model,
                            const std::optional<RandomModelConfig>& truth, Rng& rng) {
    const int pool_n = n_groups * spg;
    const int bins = 4;
    const int floor_group = n_min_bin(spg);
    const int floor_pool = n_min_bin(pool_n);
    double worst = 0.0;
    auto update = [&](double group_value, double pool_value) {
        if (std::isnan(group_value) || std::isnan(pool_value)) return;
        worst = std::max(worst, std::abs(group_value - pool_value));
    };

    if (metric == "diff-mean") {
        const auto preds = sample_values(model, pool_n, rng);
        const double pool_mean = mean_of(preds);
        for (int g = 0; g < n_groups; ++g)
            update(mean_of(std::span(preds).subspan(g * spg, spg)), pool_mean);
    } else if (metric == "rel-diff-per-class") {
        const auto preds = sample_classes(model, pool_n, rng);
        const int k = model.n_classes;
        std::vector<long> pool_count(k, 0);
        for (int c : preds) ++pool_count[c];
        for (int g = 0; g < n_groups; ++g) {
            std::vector<long> count(k, 0);
            for (int i = g * spg; i < (g + 1) * spg; ++i) ++count[preds[i]];
            for (int c = 0; c < k; ++c)
                update(static_cast<double>(count[c]) / spg,
                       static_cast<double>(pool_count[c]) / pool_n);
        }
    } else if (metric == "rel-diff-per-bin") {
        const auto preds = sample_values(model, pool_n, rng);
        std::vector<long> pool_count(bins, 0);
        for (double v : preds) ++pool_count[value_bin(v, bins)];
        for (int g = 0; g < n_groups; ++g) {
            std::vector<long> count(bins, 0);
            for (int i = g * spg; i < (g + 1) * spg; ++i) ++count[value_bin(preds[i], bins)];
            for (int b = 0; b < bins; ++b) {
                if (pool_count[b] < floor_group) continue;  // reference rule
                update(static_cast<double>(count[b]) / spg,
                       static_cast<double>(pool_count[b]) / pool_n);
            }
        }
    } else if (metric == "diff-ccc") {
        const auto truths = sample_values(*truth, pool_n, rng);
        const auto preds = sample_values(model, pool_n, rng);
        const double pool_ccc = ccc_of(truths, preds);
        for (int g = 0; g < n_groups; ++g)
            update(ccc_of(std::span(truths).subspan(g * spg, spg),
                          std::span(preds).subspan(g * spg, spg)),
                   pool_ccc);
    } else if (metric == "diff-uar" || metric == "diff-rpc" || metric == "diff-ppc") {
        const auto truths = sample_classes(*truth, pool_n, rng);
        const auto preds = sample_classes(model, pool_n, rng);
        const int k = std::max(model.n_classes, truth->n_classes);
        IntConfusion pool(k);
        for (int i = 0; i < pool_n; ++i) pool.add(truths[i], preds[i]);
        for (int g = 0; g < n_groups; ++g) {
            IntConfusion gc(k);
            for (int i = g * spg; i < (g + 1) * spg; ++i) gc.add(truths[i], preds[i]);
            if (metric == "diff-uar") {
                update(gc.uar(), pool.uar());
            } else {
                const auto gv = metric == "diff-rpc" ? gc.recalls() : gc.precisions();
                const auto pv = metric == "diff-rpc" ? pool.recalls() : pool.precisions();
                for (int c = 0; c < k; ++c) update(gv[c], pv[c]);
            }
        }
    } else if (metric == "diff-recall-per-bin" || metric == "diff-precision-per-bin") {
        const auto truths = sample_values(*truth, pool_n, rng);
        const auto preds = sample_values(model, pool_n, rng);
        IntConfusion pool(bins);
        std::vector<int> tb(pool_n), pb(pool_n);
        for (int i = 0; i < pool_n; ++i) {
            tb[i] = value_bin(truths[i], bins);
            pb[i] = value_bin(preds[i], bins);
            pool.add(tb[i], pb[i]);
        }
        const bool recall = metric == "diff-recall-per-bin";
        const auto pool_values = recall ? pool.recalls() : pool.precisions();
        for (int g = 0; g < n_groups; ++g) {
            IntConfusion gc(bins);
            for (int i = g * spg; i < (g + 1) * spg; ++i) gc.add(tb[i], pb[i]);
            const auto group_values = recall ? gc.recalls() : gc.precisions();
            for (int b = 0; b < bins; ++b) {
                if (gc.truth_count[b] < floor_group || pool.truth_count[b] < floor_pool) continue;
                update(group_values[b], pool_values[b]);
            }
        }
    } else {
        throw ValidationError("unsupported fairness simulation metric: '" + metric + "'");
    }
    return worst;
}

}  // namespace

double simulate_threshold(const std::string& metric_id, int n_groups, int samples_per_group,
                          const RandomModelConfig& model,
                          const std::optional<RandomModelConfig>& truth, int repeats,
                          std::uint64_t seed, int threads) {
    const std::string metric = canonical_sim_metric(metric_id);
    if (n_groups < 1 || samples_per_group < 1 || repeats < 1)
        throw std::invalid_argument("n_groups, samples_per_group, and repeats must be >= 1");
    if (sim_metric_needs_truth(metric) && !truth)
        throw std::invalid_argument("metric '" + metric + "' requires a truth configuration");

    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    threads = std::min(threads, repeats);

    std::vector<double> partial(threads, 0.0);
    auto worker = [&](int w) {
        double worst = 0.0;
        for (int r = w; r < repeats; r += threads) {
            Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
            worst = std::max(worst, repeat_max_disparity(metric, n_groups, samples_per_group,
                                                         model, truth, rng));
        }
        partial[w] = worst;
    };
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
        for (auto& t : pool) t.join();
    }
    return *std::max_element(partial.begin(), partial.end());
}

std::optional<double> ThresholdTable::lookup(const std::string& metric_id, int n_groups,
                                             int samples_per_group) const {
    std::string metric;
    try {
        metric = canonical_sim_metric(metric_id);
    } catch (const ValidationError&) {
        metric = metric_id;
    }
    const ThresholdEntry* best = nullptr;
    int best_spg = -1;
    for (const auto& [key, entry] : entries_) {
        if (key.metric != metric || key.n_groups != n_groups) continue;
        if (key.samples_per_group > samples_per_group) continue;
        if (key.samples_per_group > best_spg) {
            best_spg = key.samples_per_group;
            best = &entry;
        }
    }
    if (!best) return std::nullopt;
    return best->threshold;
}

std::string ThresholdTable::dump() const {
    std::ostringstream out;
    out << "metric\tn_groups\tsamples_per_group\tmodel\ttruth\tthreshold\tsimulated\trepeats\tseed\n";
    for (const auto& [key, entry] : entries_) {
        out << key.metric << '\t' << key.n_groups << '\t' << key.samples_per_group << '\t'
            << key.model << '\t' << key.truth << '\t';
        std::ostringstream t;
        t.precision(17);
        t << entry.threshold;
        out << t.str() << '\t';
        if (entry.simulated) {
            std::ostringstream s;
            s.precision(17);
            s << *entry.simulated;
            out << s.str();
        } else {
            out << '-';
        }
        out << '\t' << entry.repeats << '\t' << entry.seed << '\n';
    }
    return out.str();
}

void ThresholdTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write threshold table: " + path.string());
    out << dump();
}

ThresholdTable ThresholdTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open threshold table: " + path.string());
    ThresholdTable table;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (lineno == 1 && line.rfind("metric\t", 0) == 0) continue;  // header
        std::istringstream row(line);
        ThresholdKey key;
        ThresholdEntry entry;
        std::string threshold_s, simulated_s, repeats_s, seed_s, n_groups_s, spg_s;
        if (!std::getline(row, key.metric, '\t') || !std::getline(row, n_groups_s, '\t') ||
            !std::getline(row, spg_s, '\t') || !std::getline(row, key.model, '\t') ||
            !std::getline(row, key.truth, '\t') || !std::getline(row, threshold_s, '\t') ||
            !std::getline(row, simulated_s, '\t') || !std::getline(row, repeats_s, '\t') ||
            !std::getline(row, seed_s, '\t'))
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": expected 9 tab-separated columns");
        try {
            key.n_groups = std::stoi(n_groups_s);
            key.samples_per_group = std::stoi(spg_s);
            entry.threshold = std::stod(threshold_s);
            if (simulated_s != "-") entry.simulated = std::stod(simulated_s);
            entry.repeats = std::stoi(repeats_s);
            entry.seed = std::stoull(seed_s);
        } catch (const std::exception&) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
        }
        if (entry.threshold < 0.0)
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": negative threshold");
        table.insert(key, entry);
    }
    return table;
}

const ThresholdTable& ThresholdTable::bundled() {
    // Published fairness thresholds, keyed by the group layouts they were
    // calibrated for. Raw simulation outputs for the same keys live in
    // data/thresholds.tsv.
    static const ThresholdTable table = [] {
        ThresholdTable t;
        const int repeats = 1000;
        const std::uint64_t seed = 20240101;
        auto add = [&](const std::string& metric, int groups, int spg, const std::string& model,
                       const std::string& truth, double threshold) {
            t.insert({metric, groups, spg, model, truth}, {threshold, std::nullopt, repeats, seed});
        };
        // 31 accent groups, 60 samples each.
        add("rel-diff-per-class", 31, 60, "uniform4", "-", 0.225);
        add("diff-mean", 31, 60, "gaussian", "-", 0.075);
        add("rel-diff-per-bin", 31, 60, "gaussian", "-", 0.225);
        // 6 languages, 2000 samples each.
        add("rel-diff-per-class", 6, 2000, "uniform4", "-", 0.1);
        add("diff-mean", 6, 2000, "gaussian", "-", 0.03);
        add("rel-diff-per-bin", 6, 2000, "gaussian", "-", 0.1);
        // 3 pitch groups, balanced to 1000 samples each.
        add("diff-ppc", 3, 1000, "uniform4", "sparse4", 0.1);
        add("diff-rpc", 3, 1000, "uniform4", "sparse4", 0.225);
        add("diff-uar", 3, 1000, "uniform4", "sparse4", 0.075);
        add("diff-ccc", 3, 1000, "gaussian", "gaussian", 0.1);
        add("diff-precision-per-bin", 3, 1000, "gaussian", "gaussian", 0.125);
        add("diff-recall-per-bin", 3, 1000, "gaussian", "gaussian", 0.125);
        // 2 sex groups, balanced to 1000 samples each.
        add("diff-ppc", 2, 1000, "uniform4", "sparse4", 0.075);
        add("diff-rpc", 2, 1000, "uniform4", "sparse4", 0.175);
        add("diff-uar", 2, 1000, "uniform4", "sparse4", 0.075);
        add("diff-ccc", 2, 1000, "gaussian", "gaussian", 0.075);
        add("diff-precision-per-bin", 2, 1000, "gaussian", "gaussian", 0.1);
        add("diff-recall-per-bin", 2, 1000, "gaussian", "gaussian", 0.1);
        return t;
    }();
    return table;
}

GroupPartition balance_groups(const DatasetManifest& manifest, const GroupPartition& partition,
                              Task task, int target_n, std::uint64_t seed) {
    if (target_n < 1) throw std::invalid_argument("target_n must be >= 1");

    // Per group: (id, gold) pairs, manifest order.
    struct Member {
        std::string id;
        Label gold;
    };
    std::map<std::string, std::vector<Member>> members;
    std::map<std::string, const Sample*> index;
    for (const auto& s : manifest.samples) index[s.id] = &s;
    for (const auto& [group, ids] : partition.groups) {
        auto& list = members[group];
        for (const auto& id : ids) {
            auto it = index.find(id);
            if (it == index.end())
                throw ValidationError("partition id '" + id + "' not in manifest");
            const Label* gold = it->second->gold_for(task);
            if (gold) list.push_back({id, *gold});
        }
    }

    const std::string* smallest = nullptr;
    for (const auto& [group, list] : members)
        if (!smallest || list.size() < members.at(*smallest).size()) smallest = &group;
    if (!smallest || members.at(*smallest).size() < static_cast<std::size_t>(target_n))
        throw ValidationError("smallest group has fewer than " + std::to_string(target_n) +
                              " labelled samples");

    GroupPartition out;
    out.attribute = partition.attribute;
    out.excluded = partition.excluded;

    // Reference selection: uniform subsample of the smallest group.
    Rng ref_rng(mix_seed(seed, fnv1a(*smallest)));
    const auto& ref_members = members.at(*smallest);
    auto ref_idx = ref_rng.sample_indices(ref_members.size(), target_n);
    std::vector<const Member*> reference;
    reference.reserve(target_n);
    for (auto i : ref_idx) reference.push_back(&ref_members[i]);
    {
        std::vector<std::string> ids;
        for (const auto* m : reference) ids.push_back(m->id);
        std::sort(ids.begin(), ids.end());
        out.groups[*smallest] = std::move(ids);
    }

    for (const auto& [group, list] : members) {
        if (group == *smallest) continue;
        if (list.size() < static_cast<std::size_t>(target_n))
            throw ValidationError("group '" + group + "' has fewer than " +
                                  std::to_string(target_n) + " labelled samples");
        Rng rng(mix_seed(seed, fnv1a(group)));
        std::vector<std::string> selected;
        selected.reserve(target_n);

        if (is_dimensional(task)) {
            // Greedy nearest-neighbour matching on the gold value, visiting
            // the reference in random order, drawing without replacement.
            std::multimap<double, std::size_t> candidates;
            for (std::size_t i = 0; i < list.size(); ++i)
                candidates.emplace(list[i].gold.value(), i);
            std::vector<std::size_t> order(reference.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            rng.shuffle(order);
            for (std::size_t oi : order) {
                const double want = reference[oi]->gold.value();
                auto hi = candidates.lower_bound(want);
                auto pick = candidates.end();
                if (hi == candidates.end()) {
                    pick = std::prev(hi);
                } else if (hi == candidates.begin()) {
                    pick = hi;
                } else {
                    auto lo = std::prev(hi);
                    pick = (want - lo->first) <= (hi->first - want) ? lo : hi;
                }
                selected.push_back(list[pick->second].id);
                candidates.erase(pick);
            }
        } else {
            // Match the reference class counts; fill any deficit from the
            // remaining pool so the group still reaches target_n.
            std::map<std::string, long> want;
            for (const auto* m : reference) ++want[m->gold.cls()];
            std::map<std::string, std::vector<std::size_t>> by_class;
            for (std::size_t i = 0; i < list.size(); ++i)
                by_class[list[i].gold.cls()].push_back(i);
            std::vector<std::size_t> leftovers;
            for (auto& [cls, pool] : by_class) {
                rng.shuffle(pool);
                const long take =
                    std::min<long>(want.count(cls) ? want.at(cls) : 0, static_cast<long>(pool.size()));
                for (long i = 0; i < take; ++i) selected.push_back(list[pool[i]].id);
                for (std::size_t i = take; i < pool.size(); ++i) leftovers.push_back(pool[i]);
            }
            rng.shuffle(leftovers);
            for (std::size_t i = 0; selected.size() < static_cast<std::size_t>(target_n); ++i)
                selected.push_back(list[leftovers[i]].id);
        }
        std::sort(selected.begin(), selected.end());
        out.groups[group] = std::move(selected);
    }
    return out;
}

}  // namespace sertest::sim
