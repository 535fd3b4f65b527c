#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sertest/core.hpp"
#include "sertest/perturb.hpp"
#include "sertest/suite.hpp"

namespace sertest::adapters {

struct SubprocessConfig {
    std::string command;   // run via /bin/sh -c
    int batch_size = 0;    // paths per invocation; 0 = all at once
    double timeout_s = 600.0;
};

/// Runs the model command once per batch: newline-delimited audio paths on
/// stdin, one {"id": ..., "value"|"class": ...} record per line on stdout.
/// Records may carry the sample id or the path stem. Throws on nonzero
/// exit, timeout, malformed output, or ids left unanswered.
PredictionSet predict_subprocess(const SubprocessConfig& config, Task task,
                                 const std::vector<std::pair<std::string, std::string>>& id_paths,
                                 const std::string& model_id);

/// Black-box access to the model under test.
class ModelAdapter {
public:
    virtual ~ModelAdapter() = default;
    virtual PredictionSet predict(
        Task task, const std::vector<std::pair<std::string, std::string>>& id_paths) = 0;
    virtual const std::string& model_id() const = 0;
    virtual bool answers(Task task) const = 0;
};

class SubprocessAdapter final : public ModelAdapter {
public:
    SubprocessAdapter(std::map<Task, SubprocessConfig> commands, std::string model_id)
        : commands_(std::move(commands)), model_id_(std::move(model_id)) {}

    PredictionSet predict(
        Task task, const std::vector<std::pair<std::string, std::string>>& id_paths) override;
    const std::string& model_id() const override { return model_id_; }
    bool answers(Task task) const override { return commands_.count(task) > 0; }

private:
    std::map<Task, SubprocessConfig> commands_;
    std::string model_id_;
};

/// Disk-backed prediction store keyed by (model, dataset, task,
/// perturbation fingerprint). Hits return the stored records unchanged.
class PredictionCache {
public:
    PredictionCache(std::filesystem::path root, bool enabled)
        : root_(std::move(root)), enabled_(enabled) {}

    std::optional<PredictionSet> get(const std::string& model, const std::string& dataset,
                                     Task task, const std::string& fingerprint) const;
    void put(const std::string& model, const std::string& dataset, Task task,
             const std::string& fingerprint, const PredictionSet& preds) const;
    bool enabled() const { return enabled_; }

private:
    std::filesystem::path entry_path(const std::string& model, const std::string& dataset,
                                     Task task, const std::string& fingerprint) const;
    std::filesystem::path root_;
    bool enabled_;
};

/// Renders the perturbed audio for every manifest sample into
/// workdir/audio/<dataset>/<fingerprint>/ and runs the adapter on it.
/// Identical spec+seed combinations are served from the cache without
/// re-rendering.
PredictionSet predict_perturbed(ModelAdapter& adapter, const DatasetManifest& manifest,
                                const perturb::PerturbationSpec& spec, Task task,
                                const std::filesystem::path& workdir,
                                const PredictionCache& cache, const perturb::AssetStore& assets);

/// Serves the suite's prediction needs. Implementations own the returned
/// sets; pointers stay valid for the provider's lifetime.
class PredictionProvider {
public:
    virtual ~PredictionProvider() = default;
    virtual const PredictionSet* clean(const std::string& dataset, Task task) = 0;
    virtual suite::RobustnessData robustness(const suite::TestSpec& spec,
                                             const std::string& dataset) = 0;
};

/// Predictions precomputed by the user:
///   <root>/<dataset>/<task>.jsonl                clean predictions
///   <root>/<dataset>/<task>__<variant>.jsonl     perturbed predictions
///   <root>/<dataset>__<role>/<task>.jsonl        alternative recordings
class FilePredictionProvider final : public PredictionProvider {
public:
    FilePredictionProvider(std::filesystem::path root, std::string model_id)
        : root_(std::move(root)), model_id_(std::move(model_id)) {}

    const PredictionSet* clean(const std::string& dataset, Task task) override;
    suite::RobustnessData robustness(const suite::TestSpec& spec,
                                     const std::string& dataset) override;

private:
    const PredictionSet* load(const std::string& dataset, Task task, const std::string& variant);
    std::filesystem::path root_;
    std::string model_id_;
    std::map<std::string, std::optional<PredictionSet>> store_;
};

/// Live predictions through a model adapter, with perturbation rendering,
/// caching, and paired-manifest handling.
class ModelPredictionProvider final : public PredictionProvider {
public:
    ModelPredictionProvider(ModelAdapter& adapter,
                            const std::map<std::string, DatasetManifest>* manifests,
                            perturb::AssetStore assets, std::filesystem::path workdir,
                            std::uint64_t run_seed, bool cache_enabled)
        : adapter_(adapter),
          manifests_(manifests),
          assets_(std::move(assets)),
          workdir_(std::move(workdir)),
          cache_(workdir_ / "cache", cache_enabled),
          run_seed_(run_seed) {}

    const PredictionSet* clean(const std::string& dataset, Task task) override;
    suite::RobustnessData robustness(const suite::TestSpec& spec,
                                     const std::string& dataset) override;

    /// Effective perturbation for a spec: registry recipes carry seed 0 and
    /// get a deterministic per-(test, variant) stream of the run seed.
    perturb::PerturbationSpec bind_seed(const suite::TestSpec& spec) const;

private:
    const PredictionSet* perturbed(const std::string& dataset, Task task,
                                   const perturb::PerturbationSpec& pspec);
    ModelAdapter& adapter_;
    const std::map<std::string, DatasetManifest>* manifests_;
    perturb::AssetStore assets_;
    std::filesystem::path workdir_;
    PredictionCache cache_;
    std::uint64_t run_seed_;
    std::map<std::string, PredictionSet> store_;
};

}  // namespace sertest::adapters
