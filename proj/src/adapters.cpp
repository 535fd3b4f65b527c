#include "sertest/adapters.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <sstream>

#include "json.hpp"
#include "sertest/random.hpp"

using nlohmann::json;

namespace sertest::adapters {

namespace {

std::string path_stem(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

struct SubprocessResult {
    int exit_code = -1;
    std::string out;
    std::string err;
    bool timed_out = false;
};

/// Runs `/bin/sh -c command`, feeding `input` to stdin while draining
/// stdout/stderr, with a wall-clock deadline.
SubprocessResult run_subprocess(const std::string& command, const std::string& input,
                                double timeout_s) {
    // A child that exits before consuming its stdin must surface as an
    // error, not kill the harness with SIGPIPE.
    static const bool sigpipe_ignored = [] {
        signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)sigpipe_ignored;

    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0 || pipe(err_pipe) != 0)
        throw std::runtime_error("pipe() failed: " + std::string(std::strerror(errno)));

    const pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork() failed: " + std::string(std::strerror(errno)));
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]})
            close(fd);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[1]);
    fcntl(in_pipe[1], F_SETFL, O_NONBLOCK);

    SubprocessResult result;
    std::size_t written = 0;
    bool stdin_open = true;
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    std::vector<char> buf(1 << 16);

    bool out_open = true, err_open = true;
    while (out_open || err_open || stdin_open) {
        std::vector<pollfd> fds;
        if (out_open) fds.push_back({out_pipe[0], POLLIN, 0});
        if (err_open) fds.push_back({err_pipe[0], POLLIN, 0});
        if (stdin_open) fds.push_back({in_pipe[1], POLLOUT, 0});

        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            result.timed_out = true;
            break;
        }
        const int wait_ms = static_cast<int>(std::min<std::int64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count(), 1000));
        const int ready = poll(fds.data(), fds.size(), wait_ms);
        if (ready < 0 && errno != EINTR)
            throw std::runtime_error("poll() failed: " + std::string(std::strerror(errno)));
        if (ready <= 0) continue;

        for (const auto& fd : fds) {
            if (fd.fd == out_pipe[0] && (fd.revents & (POLLIN | POLLHUP))) {
                const ssize_t n = read(out_pipe[0], buf.data(), buf.size());
                if (n > 0)
                    result.out.append(buf.data(), static_cast<std::size_t>(n));
                else if (n == 0 || (n < 0 && errno != EAGAIN && errno != EINTR)) {
                    close(out_pipe[0]);
                    out_open = false;
                }
            } else if (fd.fd == err_pipe[0] && (fd.revents & (POLLIN | POLLHUP))) {
                const ssize_t n = read(err_pipe[0], buf.data(), buf.size());
                if (n > 0)
                    result.err.append(buf.data(), static_cast<std::size_t>(n));
                else if (n == 0 || (n < 0 && errno != EAGAIN && errno != EINTR)) {
                    close(err_pipe[0]);
                    err_open = false;
                }
            } else if (fd.fd == in_pipe[1] && (fd.revents & (POLLOUT | POLLERR | POLLHUP))) {
                if (fd.revents & (POLLERR | POLLHUP)) {
                    close(in_pipe[1]);
                    stdin_open = false;
                    continue;
                }
                const ssize_t n =
                    write(in_pipe[1], input.data() + written, input.size() - written);
                if (n > 0) written += static_cast<std::size_t>(n);
                if (written == input.size() || (n < 0 && errno != EAGAIN && errno != EINTR)) {
                    close(in_pipe[1]);
                    stdin_open = false;
                }
            }
        }
    }
    if (stdin_open) close(in_pipe[1]);
    if (out_open) close(out_pipe[0]);
    if (err_open) close(err_pipe[0]);

    if (result.timed_out) {
        kill(pid, SIGKILL);
        waitpid(pid, nullptr, 0);
        return result;
    }
    int status = 0;
    waitpid(pid, &status, 0);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

}  // namespace

PredictionSet predict_subprocess(const SubprocessConfig& config, Task task,
                                 const std::vector<std::pair<std::string, std::string>>& id_paths,
                                 const std::string& model_id) {
    PredictionSet set;
    set.model_id = model_id;
    set.task = task;

    // Records may answer by sample id or by path stem.
    std::map<std::string, std::string> stem_to_id;
    std::set<std::string> expected;
    for (const auto& [id, path] : id_paths) {
        expected.insert(id);
        stem_to_id[path_stem(path)] = id;
    }

    const std::size_t batch =
        config.batch_size > 0 ? static_cast<std::size_t>(config.batch_size) : id_paths.size();
    for (std::size_t start = 0; start < id_paths.size(); start += batch) {
        std::string input;
        for (std::size_t i = start; i < std::min(start + batch, id_paths.size()); ++i)
            input += id_paths[i].second + "\n";
        const SubprocessResult run = run_subprocess(config.command, input, config.timeout_s);
        if (run.timed_out)
            throw std::runtime_error("model command timed out after " +
                                     std::to_string(config.timeout_s) + " s: " + config.command);
        if (run.exit_code != 0)
            throw std::runtime_error("model command exited with status " +
                                     std::to_string(run.exit_code) + ": " + config.command +
                                     (run.err.empty() ? "" : "\nstderr: " + run.err));

        std::istringstream lines(run.out);
        std::string line;
        int lineno = 0;
        while (std::getline(lines, line)) {
            ++lineno;
            if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json rec;
            try {
                rec = json::parse(line);
            } catch (const json::exception& e) {
                throw std::runtime_error("malformed model output line " + std::to_string(lineno) +
                                         ": " + e.what());
            }
            if (!rec.contains("id"))
                throw std::runtime_error("model output line " + std::to_string(lineno) +
                                         " lacks 'id'");
            std::string id = rec["id"].get<std::string>();
            if (!expected.count(id)) {
                auto it = stem_to_id.find(id);
                if (it != stem_to_id.end()) id = it->second;
            }
            if (rec.contains("value"))
                set.predictions.insert_or_assign(id, Label::of_value(rec["value"].get<double>()));
            else if (rec.contains("class"))
                set.predictions.insert_or_assign(
                    id, Label::of_class(canonical_class(rec["class"].get<std::string>())));
            else
                throw std::runtime_error("model output line " + std::to_string(lineno) +
                                         " needs 'value' or 'class'");
        }
    }

    std::vector<std::string> missing;
    for (const auto& id : expected)
        if (!set.predictions.count(id)) missing.push_back(id);
    if (!missing.empty()) {
        std::string names;
        for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i)
            names += (i ? ", " : "") + missing[i];
        if (missing.size() > 10) names += ", ...";
        throw std::runtime_error("model answered " + std::to_string(set.predictions.size()) +
                                 " of " + std::to_string(expected.size()) +
                                 " inputs; missing ids: " + names);
    }
    return set;
}

PredictionSet SubprocessAdapter::predict(
    Task task, const std::vector<std::pair<std::string, std::string>>& id_paths) {
    auto it = commands_.find(task);
    if (it == commands_.end())
        throw std::runtime_error("no model command configured for task " +
                                 std::string(to_string(task)));
    return predict_subprocess(it->second, task, id_paths, model_id_);
}

std::filesystem::path PredictionCache::entry_path(const std::string& model,
                                                  const std::string& dataset, Task task,
                                                  const std::string& fingerprint) const {
    return root_ / model / dataset / (std::string(to_string(task)) + "__" + fingerprint + ".jsonl");
}

std::optional<PredictionSet> PredictionCache::get(const std::string& model,
                                                  const std::string& dataset, Task task,
                                                  const std::string& fingerprint) const {
    if (!enabled_) return std::nullopt;
    const auto path = entry_path(model, dataset, task, fingerprint);
    if (!std::filesystem::exists(path)) return std::nullopt;
    PredictionSet set = load_predictions(path, task);
    set.model_id = model;
    return set;
}

void PredictionCache::put(const std::string& model, const std::string& dataset, Task task,
                          const std::string& fingerprint, const PredictionSet& preds) const {
    if (!enabled_) return;
    const auto path = entry_path(model, dataset, task, fingerprint);
    std::filesystem::create_directories(path.parent_path());
    save_predictions(preds, path);
}

PredictionSet predict_perturbed(ModelAdapter& adapter, const DatasetManifest& manifest,
                                const perturb::PerturbationSpec& spec, Task task,
                                const std::filesystem::path& workdir,
                                const PredictionCache& cache, const perturb::AssetStore& assets) {
    const std::string fp = perturb::fingerprint(spec);
    if (auto hit = cache.get(adapter.model_id(), manifest.name, task, fp)) return *hit;

    const auto audio_dir = workdir / "audio" / manifest.name / fp;
    std::filesystem::create_directories(audio_dir);
    std::vector<std::pair<std::string, std::string>> id_paths;
    for (const auto& s : manifest.samples) {
        if (s.audio_path.empty())
            throw std::runtime_error("sample '" + s.id + "' of '" + manifest.name +
                                     "' has no audio path");
        const auto out_path = audio_dir / (s.id + ".wav");
        if (!cache.enabled() || !std::filesystem::exists(out_path)) {
            const audio::AudioBuffer input = audio::read_wav(s.audio_path);
            audio::write_wav(perturb::apply_perturbation(spec, input, s.id, assets), out_path);
        }
        id_paths.emplace_back(s.id, out_path.string());
    }
    PredictionSet preds = adapter.predict(task, id_paths);
    cache.put(adapter.model_id(), manifest.name, task, fp, preds);
    return preds;
}

// ---------------------------------------------------------------------------
// FilePredictionProvider

const PredictionSet* FilePredictionProvider::load(const std::string& dataset, Task task,
                                                  const std::string& variant) {
    const std::string key =
        dataset + "/" + to_string(task) + (variant.empty() ? "" : "__" + variant);
    auto it = store_.find(key);
    if (it != store_.end()) return it->second ? &*it->second : nullptr;

    const auto path = root_ / dataset /
                      (std::string(to_string(task)) + (variant.empty() ? "" : "__" + variant) +
                       ".jsonl");
    if (!std::filesystem::exists(path)) {
        store_[key] = std::nullopt;
        return nullptr;
    }
    PredictionSet set = load_predictions(path, task);
    if (set.model_id.empty()) set.model_id = model_id_;
    store_[key] = std::move(set);
    return &*store_[key];
}

const PredictionSet* FilePredictionProvider::clean(const std::string& dataset, Task task) {
    return load(dataset, task, "");
}

suite::RobustnessData FilePredictionProvider::robustness(const suite::TestSpec& spec,
                                                         const std::string& dataset) {
    suite::RobustnessData data;
    if (!spec.perturbation) {
        data.skip_reason = "robustness spec lacks a perturbation";
        return data;
    }
    if (spec.perturbation->kind == "recorded") {
        const std::string role = spec.perturbation->params.value("role", std::string{});
        data.baseline = clean(dataset, spec.task);
        const PredictionSet* alt = load(dataset + "__" + role, spec.task, "");
        if (!data.baseline || !alt) {
            data.skip_reason = "missing predictions for '" + dataset + "' or '" + dataset + "__" +
                               role + "'";
            return data;
        }
        data.variants.emplace_back(role, alt);
        return data;
    }
    data.baseline = clean(dataset, spec.task);
    const PredictionSet* perturbed = load(dataset, spec.task, spec.perturbation->name);
    if (!data.baseline || !perturbed) {
        data.skip_reason = "missing clean or '" + spec.perturbation->name +
                           "' predictions for '" + dataset + "'";
        return data;
    }
    data.variants.emplace_back(spec.perturbation->name, perturbed);
    return data;
}

// ---------------------------------------------------------------------------
// ModelPredictionProvider

perturb::PerturbationSpec ModelPredictionProvider::bind_seed(const suite::TestSpec& spec) const {
    perturb::PerturbationSpec pspec = *spec.perturbation;
    if (pspec.seed == 0)
        pspec.seed = mix_seed(run_seed_, fnv1a(spec.test + "/" + pspec.name));
    return pspec;
}

const PredictionSet* ModelPredictionProvider::clean(const std::string& dataset, Task task) {
    const std::string key = dataset + "/" + to_string(task) + "/clean";
    if (auto it = store_.find(key); it != store_.end()) return &it->second;
    auto mit = manifests_->find(dataset);
    if (mit == manifests_->end()) return nullptr;
    if (!adapter_.answers(task)) return nullptr;

    if (auto hit = cache_.get(adapter_.model_id(), dataset, task, "clean"))
        return &(store_[key] = std::move(*hit));

    std::vector<std::pair<std::string, std::string>> id_paths;
    for (const auto& s : mit->second.samples) {
        if (s.audio_path.empty())
            throw std::runtime_error("sample '" + s.id + "' of '" + dataset +
                                     "' has no audio path");
        id_paths.emplace_back(s.id, s.audio_path);
    }
    PredictionSet preds = adapter_.predict(task, id_paths);
    cache_.put(adapter_.model_id(), dataset, task, "clean", preds);
    return &(store_[key] = std::move(preds));
}

const PredictionSet* ModelPredictionProvider::perturbed(const std::string& dataset, Task task,
                                                        const perturb::PerturbationSpec& pspec) {
    const std::string key =
        dataset + "/" + to_string(task) + "/" + perturb::fingerprint(pspec);
    if (auto it = store_.find(key); it != store_.end()) return &it->second;
    auto mit = manifests_->find(dataset);
    if (mit == manifests_->end()) return nullptr;
    PredictionSet preds =
        predict_perturbed(adapter_, mit->second, pspec, task, workdir_, cache_, assets_);
    return &(store_[key] = std::move(preds));
}

suite::RobustnessData ModelPredictionProvider::robustness(const suite::TestSpec& spec,
                                                          const std::string& dataset) {
    suite::RobustnessData data;
    if (!spec.perturbation) {
        data.skip_reason = "robustness spec lacks a perturbation";
        return data;
    }
    if (!adapter_.answers(spec.task)) {
        data.skip_reason = "no model command for task " + std::string(to_string(spec.task));
        return data;
    }
    const perturb::PerturbationSpec pspec = bind_seed(spec);

    if (pspec.kind == "recorded") {
        const std::string role = pspec.params.value("role", std::string{});
        const std::string alt = dataset + "__" + role;
        if (!manifests_->count(alt)) {
            data.skip_reason = "paired manifest '" + alt + "' not bound";
            return data;
        }
        data.baseline = clean(dataset, spec.task);
        const PredictionSet* alt_preds = clean(alt, spec.task);
        if (!data.baseline || !alt_preds) {
            data.skip_reason = "could not obtain predictions for the recording pair";
            return data;
        }
        data.variants.emplace_back(role, alt_preds);
        return data;
    }

    if (pspec.kind == "impulse-response") {
        const std::string role = pspec.params.value("pool_role", std::string{});
        auto irs = manifests_->find(role);
        if (irs == manifests_->end() || !assets_.has(role)) {
            data.skip_reason = "impulse response set '" + role + "' not bound";
            return data;
        }
        // The IR flagged as baseline is the reference rendering; every
        // other IR is compared against it.
        std::optional<std::size_t> baseline_index;
        std::vector<std::pair<std::size_t, std::string>> alternates;
        const auto& samples = irs->second.samples;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto flag = samples[i].attr_number("baseline");
            const auto flag_s = samples[i].attr_string("baseline");
            if ((flag && *flag != 0.0) || (flag_s && *flag_s == "true"))
                baseline_index = i;
            else
                alternates.emplace_back(i, samples[i].id);
        }
        if (!baseline_index || alternates.empty()) {
            data.skip_reason = "impulse response set needs one baseline and >= 1 alternative";
            return data;
        }
        auto with_index = [&](std::size_t index) {
            perturb::PerturbationSpec p = pspec;
            p.params["ir_index"] = index;
            return p;
        };
        data.baseline = perturbed(dataset, spec.task, with_index(*baseline_index));
        if (!data.baseline) {
            data.skip_reason = "dataset not bound";
            return data;
        }
        for (const auto& [index, ir_id] : alternates) {
            const PredictionSet* preds = perturbed(dataset, spec.task, with_index(index));
            if (preds) data.variants.emplace_back(ir_id, preds);
        }
        return data;
    }

    // Plain perturbations: render and compare against the clean run.
    if (pspec.params.contains("pool_role")) {
        const std::string role = pspec.params["pool_role"].get<std::string>();
        if (!assets_.has(role)) {
            data.skip_reason = "audio asset pool '" + role + "' not bound";
            return data;
        }
    }
    data.baseline = clean(dataset, spec.task);
    if (!data.baseline) {
        data.skip_reason = "dataset not bound";
        return data;
    }
    const PredictionSet* preds = perturbed(dataset, spec.task, pspec);
    if (!preds) {
        data.skip_reason = "could not obtain perturbed predictions";
        return data;
    }
    data.variants.emplace_back(pspec.name, preds);
    return data;
}

}  // namespace sertest::adapters
