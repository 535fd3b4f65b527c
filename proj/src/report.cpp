#include "sertest/report.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

using nlohmann::json;

namespace sertest::report {

namespace {

bool instances_equal(const suite::Instance& a, const suite::Instance& b) {
    return a.dataset == b.dataset && a.key == b.key && a.value == b.value &&
           a.threshold == b.threshold && a.passed == b.passed && a.skipped == b.skipped &&
           a.reason == b.reason && a.info == b.info;
}

bool results_equal(const suite::TestResult& a, const suite::TestResult& b) {
    if (a.spec_id != b.spec_id || a.test != b.test || a.category != b.category ||
        a.task != b.task || a.metric != b.metric || a.comparison != b.comparison ||
        a.n_passed != b.n_passed || a.n_failed != b.n_failed || a.n_skipped != b.n_skipped ||
        a.pass_fraction != b.pass_fraction || a.instances.size() != b.instances.size())
        return false;
    for (std::size_t i = 0; i < a.instances.size(); ++i)
        if (!instances_equal(a.instances[i], b.instances[i])) return false;
    return true;
}

json instance_to_json(const suite::Instance& inst) {
    json row;
    row["dataset"] = inst.dataset;
    if (!inst.key.empty()) row["key"] = inst.key;
    if (inst.skipped) {
        row["skipped"] = true;
    } else {
        row["value"] = inst.value;
        row["threshold"] = inst.threshold;
        row["passed"] = inst.passed;
    }
    if (!inst.reason.empty()) row["reason"] = inst.reason;
    if (!inst.info.empty()) row["info"] = inst.info;
    return row;
}

suite::Instance instance_from_json(const json& row) {
    suite::Instance inst;
    inst.dataset = row.at("dataset").get<std::string>();
    if (row.contains("key")) inst.key = row["key"].get<std::string>();
    if (row.value("skipped", false)) {
        inst.skipped = true;
    } else {
        inst.value = row.at("value").get<double>();
        inst.threshold = row.at("threshold").get<double>();
        inst.passed = row.at("passed").get<bool>();
    }
    if (row.contains("reason")) inst.reason = row["reason"].get<std::string>();
    if (row.contains("info")) inst.info = row["info"].get<std::map<std::string, double>>();
    return inst;
}

json result_to_json(const suite::TestResult& r) {
    json row;
    row["id"] = r.spec_id;
    row["test"] = r.test;
    row["category"] = suite::to_string(r.category);
    row["task"] = to_string(r.task);
    row["metric"] = r.metric;
    row["comparison"] = suite::to_string(r.comparison);
    row["passed"] = r.n_passed;
    row["failed"] = r.n_failed;
    row["skipped"] = r.n_skipped;
    row["pass_fraction"] = r.pass_fraction;
    auto& instances = row["instances"] = json::array();
    for (const auto& inst : r.instances) instances.push_back(instance_to_json(inst));
    return row;
}

suite::TestResult result_from_json(const json& row) {
    suite::TestResult r;
    r.spec_id = row.at("id").get<std::string>();
    r.test = row.at("test").get<std::string>();
    r.category = suite::category_from_string(row.at("category").get<std::string>());
    r.task = task_from_string(row.at("task").get<std::string>());
    r.metric = row.at("metric").get<std::string>();
    r.comparison = suite::comparison_from_string(row.at("comparison").get<std::string>());
    for (const auto& inst : row.at("instances")) r.instances.push_back(instance_from_json(inst));
    r.finalize();
    if (r.n_passed != row.at("passed").get<long>() || r.n_failed != row.at("failed").get<long>() ||
        r.n_skipped != row.at("skipped").get<long>())
        throw ValidationError("report integrity: instance counts do not match for '" + r.spec_id +
                              "'");
    return r;
}

bool aggregates_close(const suite::Aggregates& a, const suite::Aggregates& b) {
    auto close = [](double x, double y) { return std::abs(x - y) <= 1e-12; };
    if (a.per_test.size() != b.per_test.size() || a.per_category.size() != b.per_category.size() ||
        a.per_task.size() != b.per_task.size() || a.has_any != b.has_any)
        return false;
    for (const auto& [key, v] : a.per_test) {
        auto it = b.per_test.find(key);
        if (it == b.per_test.end() || !close(v, it->second)) return false;
    }
    for (const auto& [key, v] : a.per_category) {
        auto it = b.per_category.find(key);
        if (it == b.per_category.end() || !close(v, it->second)) return false;
    }
    for (const auto& [key, v] : a.per_task) {
        auto it = b.per_task.find(key);
        if (it == b.per_task.end() || !close(v, it->second)) return false;
    }
    return close(a.overall, b.overall);
}

json aggregates_to_json(const suite::Aggregates& agg) {
    json out;
    auto& per_test = out["per_test"] = json::array();
    for (const auto& [key, fraction] : agg.per_test)
        per_test.push_back(
            {{"task", to_string(key.first)}, {"test", key.second}, {"fraction", fraction}});
    auto& per_category = out["per_category"] = json::array();
    for (const auto& [key, fraction] : agg.per_category)
        per_category.push_back({{"task", to_string(key.first)},
                                {"category", suite::to_string(key.second)},
                                {"fraction", fraction}});
    auto& per_task = out["per_task"] = json::array();
    for (const auto& [task, fraction] : agg.per_task)
        per_task.push_back({{"task", to_string(task)}, {"fraction", fraction}});
    if (agg.has_any) out["overall"] = agg.overall;
    return out;
}

}  // namespace

bool operator==(const RunReport& a, const RunReport& b) {
    if (a.model_id != b.model_id || a.seed != b.seed || a.registry_hash != b.registry_hash ||
        a.thresholds_hash != b.thresholds_hash || a.tasks != b.tasks ||
        a.results.size() != b.results.size())
        return false;
    for (std::size_t i = 0; i < a.results.size(); ++i)
        if (!results_equal(a.results[i], b.results[i])) return false;
    return aggregates_close(a.aggregates, b.aggregates);
}

std::string render_structured(const RunReport& report) {
    if (!aggregates_close(report.aggregates, suite::aggregate(report.results)))
        throw ValidationError(
            "report integrity: aggregates do not match the per-instance results");
    json doc;
    json env;
    env["model_id"] = report.model_id;
    env["seed"] = report.seed;
    env["registry_hash"] = report.registry_hash;
    env["thresholds_hash"] = report.thresholds_hash;
    doc["environment"] = env;
    auto& tasks = doc["tasks"] = json::array();
    for (Task t : report.tasks) tasks.push_back(to_string(t));
    auto& results = doc["results"] = json::array();
    for (const auto& r : report.results) results.push_back(result_to_json(r));
    doc["aggregates"] = aggregates_to_json(report.aggregates);
    return doc.dump(2) + "\n";
}

RunReport parse_structured(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("report parse: ") + e.what());
    }
    RunReport report;
    const auto& env = doc.at("environment");
    report.model_id = env.at("model_id").get<std::string>();
    report.seed = env.at("seed").get<std::uint64_t>();
    report.registry_hash = env.at("registry_hash").get<std::string>();
    report.thresholds_hash = env.at("thresholds_hash").get<std::string>();
    for (const auto& t : doc.at("tasks")) report.tasks.push_back(task_from_string(t.get<std::string>()));
    for (const auto& r : doc.at("results")) report.results.push_back(result_from_json(r));
    report.aggregates = suite::aggregate(report.results);
    return report;
}

std::string render_human(const RunReport& report) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(3);
    out << "model: " << report.model_id << "\n";
    out << "registry " << report.registry_hash << "  thresholds " << report.thresholds_hash
        << "  seed " << report.seed << "\n\n";

    if (report.aggregates.has_any) {
        out << "pass fraction by task\n";
        for (const auto& [task, fraction] : report.aggregates.per_task) {
            out << "  " << to_string(task) << ": " << fraction;
            for (const auto& [key, f] : report.aggregates.per_category)
                if (key.first == task)
                    out << "  (" << suite::to_string(key.second) << " " << f << ")";
            out << "\n";
        }
        out << "  overall: " << report.aggregates.overall << "\n\n";
    }

    out << "tests\n";
    for (const auto& [key, fraction] : report.aggregates.per_test) {
        long passed = 0, failed = 0, skipped = 0;
        for (const auto& r : report.results) {
            if (r.task != key.first || r.test != key.second) continue;
            passed += r.n_passed;
            failed += r.n_failed;
            skipped += r.n_skipped;
        }
        out << "  " << fraction << "  " << key.second << " [" << to_string(key.first) << "]  ("
            << passed << " passed, " << failed << " failed";
        if (skipped) out << ", " << skipped << " skipped";
        out << ")\n";
    }

    std::vector<const suite::TestResult*> fully_skipped;
    for (const auto& r : report.results)
        if (r.n_passed + r.n_failed == 0 && r.n_skipped > 0) fully_skipped.push_back(&r);
    if (!fully_skipped.empty()) {
        out << "\nskipped entirely\n";
        for (const auto* r : fully_skipped) {
            std::string reason = r->instances.empty() ? "" : r->instances.front().reason;
            out << "  " << r->spec_id << (reason.empty() ? "" : "  (" + reason + ")") << "\n";
        }
    }
    return out.str();
}

bool comparable(const RunReport& a, const RunReport& b) {
    return a.registry_hash == b.registry_hash && a.thresholds_hash == b.thresholds_hash;
}

}  // namespace sertest::report
