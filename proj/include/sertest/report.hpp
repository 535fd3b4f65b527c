#pragma once

#include <string>
#include <vector>

#include "sertest/suite.hpp"

namespace sertest::report {

/// Full record of one evaluation run. Aggregates are redundant with the
/// per-instance results and are re-derived on render; a mismatch refuses
/// to serialize.
struct RunReport {
    std::string model_id;
    std::uint64_t seed = 0;
    std::string registry_hash;
    std::string thresholds_hash;
    std::vector<Task> tasks;
    std::vector<suite::TestResult> results;
    suite::Aggregates aggregates;
};

bool operator==(const RunReport& a, const RunReport& b);

/// Machine-readable JSON; byte-stable for identical reports.
std::string render_structured(const RunReport& report);
RunReport parse_structured(const std::string& text);

/// Plain-text summary: one row per test with its pass fraction.
std::string render_human(const RunReport& report);

/// Reports are comparable only when they were produced with the same
/// registry and threshold table.
bool comparable(const RunReport& a, const RunReport& b);

}  // namespace sertest::report
