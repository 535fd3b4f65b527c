#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sertest/adapters.hpp"
#include "sertest/report.hpp"
#include "sertest/suite.hpp"

namespace fs = std::filesystem;
using namespace sertest;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(csv);
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

/// Binds `name=path` pairs or scans a directory of *.jsonl manifests.
std::map<std::string, DatasetManifest> load_manifests(const std::vector<std::string>& args) {
    std::map<std::string, DatasetManifest> manifests;
    auto add = [&](const std::string& name, const fs::path& path) {
        DatasetManifest manifest = load_manifest(path);
        manifest.name = name;
        // Audio paths are relative to the manifest location.
        const fs::path base = path.parent_path();
        for (auto& s : manifest.samples)
            if (!s.audio_path.empty() && fs::path(s.audio_path).is_relative())
                s.audio_path = (base / s.audio_path).string();
        for (const auto& w : manifest.warnings)
            std::cerr << "warning: " << name << ": " << w << "\n";
        manifests[name] = std::move(manifest);
    };
    for (const auto& arg : args) {
        const auto eq = arg.find('=');
        if (eq != std::string::npos) {
            add(arg.substr(0, eq), arg.substr(eq + 1));
            continue;
        }
        if (!fs::is_directory(arg)) throw ParseError("manifest argument '" + arg +
                                                     "' is neither name=path nor a directory");
        std::vector<fs::path> found;
        for (const auto& entry : fs::directory_iterator(arg))
            if (entry.path().extension() == ".jsonl") found.push_back(entry.path());
        std::sort(found.begin(), found.end());
        for (const auto& path : found) add(path.stem().string(), path);
    }
    return manifests;
}

/// Audio pools for roles referenced by the registry (noise-*, irs-*).
perturb::AssetStore load_assets(const std::map<std::string, DatasetManifest>& manifests) {
    perturb::AssetStore assets;
    for (const auto& [name, manifest] : manifests) {
        if (name.rfind("noise-", 0) != 0 && name.rfind("irs-", 0) != 0) continue;
        std::vector<audio::AudioBuffer> pool;
        for (const auto& s : manifest.samples)
            if (!s.audio_path.empty()) pool.push_back(audio::read_wav(s.audio_path));
        assets.add(name, std::move(pool));
    }
    return assets;
}

nlohmann::json parse_params(const std::string& text) {
    if (text.empty()) return nlohmann::json::object();
    if (text.front() == '{') return nlohmann::json::parse(text);
    nlohmann::json params = nlohmann::json::object();
    for (const auto& pair : split_list(text)) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key=value in --params, got '" + pair + "'");
        const std::string key = pair.substr(0, eq);
        const std::string value = pair.substr(eq + 1);
        try {
            std::size_t used = 0;
            const double num = std::stod(value, &used);
            if (used == value.size()) {
                params[key] = num;
                continue;
            }
        } catch (const std::exception&) {
        }
        params[key] = value;
    }
    return params;
}

std::string thresholds_hash(const sim::ThresholdTable& table) {
    const std::uint64_t h = fnv1a(table.dump());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

int cmd_run(const std::vector<std::string>& manifest_args, const std::string& predictions_dir,
            const std::vector<std::string>& command_args, const std::string& model_id,
            const std::string& registry_path, const std::string& thresholds_path,
            const std::string& tasks_csv, const std::string& workdir_s, std::uint64_t seed,
            double gate, const std::string& out_dir_s, bool no_cache, int batch_size,
            double timeout_s) {
    const fs::path workdir = workdir_s;
    fs::create_directories(workdir);

    auto manifests = load_manifests(manifest_args);
    if (manifests.empty()) throw ParseError("no manifests bound; use --manifests");

    std::vector<suite::TestSpec> specs =
        registry_path.empty() ? suite::default_registry() : suite::load_registry(registry_path);
    if (!tasks_csv.empty()) {
        std::set<Task> wanted;
        for (const auto& name : split_list(tasks_csv)) wanted.insert(task_from_string(name));
        std::erase_if(specs, [&](const suite::TestSpec& s) { return !wanted.count(s.task); });
    }

    sim::ThresholdTable table = thresholds_path.empty()
                                    ? sim::ThresholdTable::bundled()
                                    : sim::ThresholdTable::load(thresholds_path);

    std::unique_ptr<adapters::ModelAdapter> adapter;
    std::unique_ptr<adapters::PredictionProvider> provider;
    if (!command_args.empty()) {
        std::map<Task, adapters::SubprocessConfig> commands;
        for (const auto& arg : command_args) {
            const auto eq = arg.find('=');
            if (eq == std::string::npos)
                throw ParseError("--command expects task=command, got '" + arg + "'");
            adapters::SubprocessConfig config;
            config.command = arg.substr(eq + 1);
            config.batch_size = batch_size;
            config.timeout_s = timeout_s;
            commands[task_from_string(arg.substr(0, eq))] = std::move(config);
        }
        adapter = std::make_unique<adapters::SubprocessAdapter>(std::move(commands), model_id);
        provider = std::make_unique<adapters::ModelPredictionProvider>(
            *adapter, &manifests, load_assets(manifests), workdir, seed, !no_cache);
    } else if (!predictions_dir.empty()) {
        provider = std::make_unique<adapters::FilePredictionProvider>(predictions_dir, model_id);
    } else {
        throw ParseError("either --predictions or --command is required");
    }

    sim::ThresholdTable simulated;
    suite::EvalContext ctx;
    ctx.manifest = [&](const std::string& name) -> const DatasetManifest* {
        auto it = manifests.find(name);
        return it == manifests.end() ? nullptr : &it->second;
    };
    ctx.predictions = [&](const std::string& dataset, Task task) {
        return provider->clean(dataset, task);
    };
    ctx.robustness = [&](const suite::TestSpec& spec, const std::string& dataset) {
        // Per-variant problems (missing assets, unreadable audio) skip the
        // instances instead of aborting the evaluation.
        try {
            return provider->robustness(spec, dataset);
        } catch (const std::exception& e) {
            suite::RobustnessData data;
            data.skip_reason = e.what();
            return data;
        }
    };
    ctx.thresholds = &table;
    ctx.simulated_cache = &simulated;
    ctx.seed = seed;

    report::RunReport run;
    run.model_id = model_id;
    run.seed = seed;
    run.registry_hash = suite::registry_hash(specs);
    run.thresholds_hash = thresholds_hash(table);
    {
        std::set<Task> seen;
        for (const auto& s : specs) seen.insert(s.task);
        run.tasks.assign(seen.begin(), seen.end());
    }
    run.results = suite::run_suite(specs, ctx);
    run.aggregates = suite::aggregate(run.results);

    const fs::path out_dir = out_dir_s.empty() ? workdir / "report" : fs::path(out_dir_s);
    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "report.json");
        out << report::render_structured(run);
    }
    const std::string human = report::render_human(run);
    {
        std::ofstream out(out_dir / "report.txt");
        out << human;
    }
    if (!simulated.empty()) simulated.save(out_dir / "simulated-thresholds.tsv");
    std::cout << human;
    std::cout << "report written to " << (out_dir / "report.json").string() << "\n";

    if (gate >= 0.0 && run.aggregates.has_any && run.aggregates.overall < gate) {
        std::cerr << "overall pass fraction " << run.aggregates.overall << " below gate " << gate
                  << "\n";
        return 2;
    }
    return 0;
}

int cmd_simulate(const std::vector<std::string>& metrics, const std::string& groups_csv,
                 const std::string& samples_csv, int repeats, std::uint64_t seed,
                 const std::string& model_id, const std::string& truth_id,
                 const std::string& out_path, const std::string& grid_path) {
    if (repeats == 1)
        std::cerr << "warning: a single repeat gives an unstable threshold estimate\n";
    std::vector<int> groups, samples;
    for (const auto& g : split_list(groups_csv)) groups.push_back(std::stoi(g));
    for (const auto& s : split_list(samples_csv)) samples.push_back(std::stoi(s));
    if (metrics.empty() || groups.empty() || samples.empty())
        throw ParseError("--metric, --groups, and --samples are all required");

    sim::ThresholdTable table;
    std::ostringstream grid;
    for (const auto& metric_arg : metrics) {
        const std::string metric = sim::canonical_sim_metric(metric_arg);
        sim::RandomModelConfig model =
            !model_id.empty() ? sim::RandomModelConfig::from_id(model_id)
            : (metric == "rel-diff-per-class" || metric == "diff-uar" || metric == "diff-rpc" ||
               metric == "diff-ppc")
                ? sim::RandomModelConfig::uniform()
                : sim::RandomModelConfig::gaussian();
        std::optional<sim::RandomModelConfig> truth;
        if (!truth_id.empty() && truth_id != "-")
            truth = sim::RandomModelConfig::from_id(truth_id);
        else if (sim::sim_metric_needs_truth(metric))
            truth = (metric == "diff-uar" || metric == "diff-rpc" || metric == "diff-ppc")
                        ? sim::RandomModelConfig::sparse()
                        : sim::RandomModelConfig::gaussian();

        grid << "# " << metric << ": max disparity over " << repeats << " repeats\n";
        grid << "groups\\samples";
        for (int s : samples) grid << '\t' << s;
        grid << '\n';
        for (int g : groups) {
            grid << g;
            for (int s : samples) {
                const double value =
                    sim::simulate_threshold(metric, g, s, model, truth, repeats, seed);
                table.insert({metric, g, s, model.id(), truth ? truth->id() : "-"},
                             {value, value, repeats, seed});
                grid << '\t' << value;
            }
            grid << '\n';
        }
    }
    if (!out_path.empty())
        table.save(out_path);
    else
        std::cout << table.dump();
    if (!grid_path.empty()) {
        std::ofstream out(grid_path);
        out << grid.str();
    } else {
        std::cout << grid.str();
    }
    return 0;
}

int cmd_perturb(const std::string& kind, const std::string& params_s, std::uint64_t seed,
                const std::string& in_s, const std::string& out_s,
                const std::vector<std::string>& asset_args) {
    perturb::PerturbationSpec spec;
    spec.name = kind;
    spec.kind = kind;
    spec.params = parse_params(params_s);
    spec.seed = seed;

    const perturb::AssetStore assets = load_assets(load_manifests(asset_args));

    const fs::path in_path = in_s;
    const fs::path out_path = out_s;
    std::vector<fs::path> files;
    if (fs::is_directory(in_path)) {
        for (const auto& entry : fs::directory_iterator(in_path))
            if (entry.path().extension() == ".wav") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        fs::create_directories(out_path);
    } else {
        files.push_back(in_path);
        if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    }
    if (files.empty()) throw ParseError("no .wav files under " + in_path.string());

    for (const auto& file : files) {
        const audio::AudioBuffer input = audio::read_wav(file);
        const audio::AudioBuffer output =
            perturb::apply_perturbation(spec, input, file.stem().string(), assets);
        const fs::path target = fs::is_directory(in_path) ? out_path / file.filename() : out_path;
        audio::write_wav(output, target);
    }
    std::cout << "perturbed " << files.size() << " file(s) -> " << out_path.string() << "\n";
    return 0;
}

int cmd_compare(const std::string& a_path, const std::string& b_path) {
    auto read = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open report: " + path);
        std::stringstream buf;
        buf << in.rdbuf();
        return report::parse_structured(buf.str());
    };
    const report::RunReport a = read(a_path);
    const report::RunReport b = read(b_path);
    if (!report::comparable(a, b)) {
        std::cerr << "reports are not comparable: registry or threshold-table hashes differ\n";
        return 1;
    }
    std::cout.setf(std::ios::fixed);
    std::cout.precision(3);
    std::cout << a.model_id << " vs " << b.model_id << "\n";
    for (const auto& [task, fa] : a.aggregates.per_task) {
        auto it = b.aggregates.per_task.find(task);
        if (it == b.aggregates.per_task.end()) continue;
        std::cout << "  " << to_string(task) << ": " << fa << " vs " << it->second << "\n";
    }
    if (a.aggregates.has_any && b.aggregates.has_any)
        std::cout << "  overall: " << a.aggregates.overall << " vs " << b.aggregates.overall
                  << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"behavioural test harness for speech emotion recognition models"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "evaluate a model against the test registry");
    std::vector<std::string> manifest_args, command_args;
    std::string predictions_dir, model_id = "model", registry_path, thresholds_path, tasks_csv;
    std::string workdir = "sertest-work", out_dir;
    std::uint64_t seed = 42;
    double gate = -1.0, timeout_s = 600.0;
    int batch_size = 0;
    bool no_cache = false;
    run->add_option("--manifests", manifest_args,
                    "dataset manifests: name=path pairs or a directory of .jsonl files")
        ->required();
    run->add_option("--predictions", predictions_dir, "directory of precomputed predictions");
    run->add_option("--command", command_args, "model command per task: task=command");
    run->add_option("--model-id", model_id, "identifier recorded in the report");
    run->add_option("--registry", registry_path, "test registry file (default: built-in)");
    run->add_option("--thresholds", thresholds_path, "fairness threshold table (default: bundled)");
    run->add_option("--tasks", tasks_csv, "comma-separated task filter");
    run->add_option("--workdir", workdir, "working directory for rendered audio and caches");
    run->add_option("--seed", seed, "run seed");
    run->add_option("--gate", gate, "exit nonzero when the overall pass fraction is below this");
    run->add_option("--out", out_dir, "report output directory (default: <workdir>/report)");
    run->add_flag("--no-cache", no_cache, "disable the prediction cache");
    run->add_option("--batch-size", batch_size, "audio paths per model invocation (0 = all)");
    run->add_option("--timeout", timeout_s, "model command timeout in seconds");

    // simulate-thresholds
    auto* simulate = app.add_subcommand("simulate-thresholds",
                                        "calibrate fairness thresholds from random models");
    std::vector<std::string> sim_metrics;
    std::string groups_csv, samples_csv, sim_model, sim_truth, sim_out, grid_out;
    int repeats = 1000;
    std::uint64_t sim_seed = 42;
    simulate->add_option("--metric", sim_metrics, "fairness metric id (repeatable)")->required();
    simulate->add_option("--groups", groups_csv, "comma-separated group counts")->required();
    simulate->add_option("--samples", samples_csv, "comma-separated samples per group")->required();
    simulate->add_option("--repeats", repeats, "simulation repeats per cell");
    simulate->add_option("--seed", sim_seed, "simulation seed");
    simulate->add_option("--model", sim_model, "random model (gaussian, uniform4, sparse4)");
    simulate->add_option("--truth", sim_truth, "random truth model for labelled metrics");
    simulate->add_option("--out", sim_out, "threshold table output file");
    simulate->add_option("--grid-out", grid_out, "max-disparity grid output file");

    // perturb
    auto* perturb_cmd = app.add_subcommand("perturb", "apply one perturbation to audio files");
    std::string p_kind, p_params, p_in, p_out;
    std::uint64_t p_seed = 42;
    std::vector<std::string> p_assets;
    perturb_cmd->add_option("--kind", p_kind, "perturbation kind")->required();
    perturb_cmd->add_option("--params", p_params, "JSON object or key=value list");
    perturb_cmd->add_option("--seed", p_seed, "perturbation seed");
    perturb_cmd->add_option("--in", p_in, "input wave file or directory")->required();
    perturb_cmd->add_option("--out", p_out, "output wave file or directory")->required();
    perturb_cmd->add_option("--assets", p_assets, "asset manifests: name=path or a directory");

    // compare
    auto* compare = app.add_subcommand("compare", "compare two structured reports");
    std::string cmp_a, cmp_b;
    compare->add_option("a", cmp_a, "first report.json")->required();
    compare->add_option("b", cmp_b, "second report.json")->required();

    // dump-registry / dump-thresholds
    auto* dump_reg = app.add_subcommand("dump-registry", "write the built-in registry");
    std::string dump_reg_out = "registry.json";
    dump_reg->add_option("--out", dump_reg_out, "output file");
    auto* dump_thr = app.add_subcommand("dump-thresholds", "write the bundled threshold table");
    std::string dump_thr_out = "thresholds.tsv";
    dump_thr->add_option("--out", dump_thr_out, "output file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(manifest_args, predictions_dir, command_args, model_id, registry_path,
                           thresholds_path, tasks_csv, workdir, seed, gate, out_dir, no_cache,
                           batch_size, timeout_s);
        if (simulate->parsed())
            return cmd_simulate(sim_metrics, groups_csv, samples_csv, repeats, sim_seed, sim_model,
                                sim_truth, sim_out, grid_out);
        if (perturb_cmd->parsed())
            return cmd_perturb(p_kind, p_params, p_seed, p_in, p_out, p_assets);
        if (compare->parsed()) return cmd_compare(cmp_a, cmp_b);
        if (dump_reg->parsed()) {
            suite::save_registry(suite::default_registry(), dump_reg_out);
            std::cout << "registry written to " << dump_reg_out << "\n";
            return 0;
        }
        if (dump_thr->parsed()) {
            sim::ThresholdTable::bundled().save(dump_thr_out);
            std::cout << "threshold table written to " << dump_thr_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
