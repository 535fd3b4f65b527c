#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sertest {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Prediction tasks. The three dimensional tasks carry values min-max
/// scaled to [0,1]; the categorical task carries a class label.
enum class Task { arousal, dominance, valence, categories };

inline bool is_dimensional(Task t) { return t != Task::categories; }

const char* to_string(Task t);
Task task_from_string(const std::string& s);
const std::vector<Task>& all_tasks();

/// Either a class name or a value in [0,1]; exactly one variant is set.
class Label {
public:
    static Label of_value(double v);
    static Label of_class(std::string cls);

    bool is_value() const { return is_value_; }
    double value() const;
    const std::string& cls() const;

    bool operator==(const Label& o) const {
        return is_value_ == o.is_value_ && value_ == o.value_ && class_ == o.class_;
    }

private:
    Label() = default;
    bool is_value_ = false;
    double value_ = 0.0;
    std::string class_;
};

/// Attribute values are strings or numbers; kept tagged so manifests
/// round-trip without reformatting.
struct AttrValue {
    bool numeric = false;
    double num = 0.0;
    std::string str;

    static AttrValue of(double v) { return {true, v, {}}; }
    static AttrValue of(std::string s) { return {false, 0.0, std::move(s)}; }
    bool operator==(const AttrValue&) const = default;
};

struct Sample {
    std::string id;
    std::string audio_path;  // empty = no audio
    std::string speaker;     // empty = unannotated
    std::map<Task, Label> gold;
    std::map<std::string, AttrValue> attrs;

    const Label* gold_for(Task t) const;
    std::optional<double> attr_number(const std::string& key) const;
    std::optional<std::string> attr_string(const std::string& key) const;

    bool operator==(const Sample&) const = default;
};

struct DatasetManifest {
    std::string name;
    std::vector<Sample> samples;
    int sample_rate_hz = 0;  // 0 = unspecified
    std::vector<std::string> warnings;

    const Sample* find(const std::string& id) const;
    bool operator==(const DatasetManifest& o) const {
        return name == o.name && samples == o.samples && sample_rate_hz == o.sample_rate_hz;
    }
};

struct PredictionSet {
    std::string model_id;
    Task task = Task::categories;
    std::map<std::string, Label> predictions;  // sample id -> label
    std::vector<std::string> warnings;
};

/// Evenly spaced bins over [0,1]; the last bin is closed at 1.
struct BinSpec {
    int n_bins = 4;
};

int bin_index(double v, const BinSpec& spec);

struct GroupPartition {
    std::string attribute;
    std::map<std::string, std::vector<std::string>> groups;  // group name -> sample ids
    std::vector<std::string> excluded;                       // ids lacking the attribute
};

/// Class-name canonicalization applied at ingestion (e.g. joy -> happiness).
const std::map<std::string, std::string>& class_canonicalization();
std::string canonical_class(const std::string& cls);

/// Classes the harness knows about; anything else is kept verbatim but
/// flagged in the manifest warnings.
const std::set<std::string>& known_classes();

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

PredictionSet load_predictions(const std::filesystem::path& path, Task task);
void save_predictions(const PredictionSet& preds, const std::filesystem::path& path);

GroupPartition partition_by_attribute(const DatasetManifest& manifest, const std::string& attribute);

}  // namespace sertest
