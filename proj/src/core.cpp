#include "sertest/core.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

using nlohmann::json;

namespace sertest {

const char* to_string(Task t) {
    switch (t) {
        case Task::arousal: return "arousal";
        case Task::dominance: return "dominance";
        case Task::valence: return "valence";
        case Task::categories: return "categories";
    }
    return "?";
}

Task task_from_string(const std::string& s) {
    for (Task t : all_tasks())
        if (s == to_string(t)) return t;
    throw ValidationError("unknown task: '" + s + "'");
}

const std::vector<Task>& all_tasks() {
    static const std::vector<Task> tasks = {Task::arousal, Task::dominance, Task::valence,
                                            Task::categories};
    return tasks;
}

Label Label::of_value(double v) {
    if (!(v >= 0.0 && v <= 1.0))
        throw ValidationError("value out of range [0,1]: " + std::to_string(v));
    Label l;
    l.is_value_ = true;
    l.value_ = v;
    return l;
}

Label Label::of_class(std::string cls) {
    if (cls.empty()) throw ValidationError("empty class label");
    Label l;
    l.is_value_ = false;
    l.class_ = std::move(cls);
    return l;
}

double Label::value() const {
    if (!is_value_) throw ValidationError("label holds a class, not a value");
    return value_;
}

const std::string& Label::cls() const {
    if (is_value_) throw ValidationError("label holds a value, not a class");
    return class_;
}

const Label* Sample::gold_for(Task t) const {
    auto it = gold.find(t);
    return it == gold.end() ? nullptr : &it->second;
}

std::optional<double> Sample::attr_number(const std::string& key) const {
    auto it = attrs.find(key);
    if (it == attrs.end() || !it->second.numeric) return std::nullopt;
    return it->second.num;
}

std::optional<std::string> Sample::attr_string(const std::string& key) const {
    auto it = attrs.find(key);
    if (it == attrs.end()) return std::nullopt;
    if (it->second.numeric) return std::to_string(it->second.num);
    return it->second.str;
}

const Sample* DatasetManifest::find(const std::string& id) const {
    for (const auto& s : samples)
        if (s.id == id) return &s;
    return nullptr;
}

const std::map<std::string, std::string>& class_canonicalization() {
    static const std::map<std::string, std::string> table = {
        {"joy", "happiness"},
    };
    return table;
}

std::string canonical_class(const std::string& cls) {
    auto it = class_canonicalization().find(cls);
    return it == class_canonicalization().end() ? cls : it->second;
}

const std::set<std::string>& known_classes() {
    static const std::set<std::string> classes = {
        "anger",     "boredom",  "calm",    "contempt", "disgust", "excitement", "fear",
        "frustration", "happiness", "neutral", "other",  "sadness", "surprise",
    };
    return classes;
}

int bin_index(double v, const BinSpec& spec) {
    if (spec.n_bins < 2) throw ValidationError("BinSpec requires n_bins >= 2");
    int idx = static_cast<int>(v * spec.n_bins);
    if (idx >= spec.n_bins) idx = spec.n_bins - 1;  // 1.0 falls in the last bin
    if (idx < 0) idx = 0;
    return idx;
}

namespace {

Label parse_gold_label(Task task, const json& v, const std::string& id,
                       std::vector<std::string>* warnings) {
    if (is_dimensional(task)) {
        if (!v.is_number())
            throw ValidationError("sample '" + id + "': gold for " + to_string(task) +
                                  " must be a number");
        return Label::of_value(v.get<double>());
    }
    if (!v.is_string())
        throw ValidationError("sample '" + id + "': gold for categories must be a string");
    std::string cls = canonical_class(v.get<std::string>());
    if (warnings && !known_classes().count(cls))
        warnings->push_back("sample '" + id + "': unknown class '" + cls + "' kept verbatim");
    return Label::of_class(cls);
}

json attr_to_json(const AttrValue& a) {
    if (a.numeric) return json(a.num);
    return json(a.str);
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest: " + path.string());

    DatasetManifest manifest;
    manifest.name = path.stem().string();

    std::set<std::string> seen_ids;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!rec.is_object())
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected object");

        try {
            // Optional header record carrying dataset-level fields.
            if (rec.contains("dataset")) {
                manifest.name = rec["dataset"].get<std::string>();
                if (rec.contains("sample_rate_hz"))
                    manifest.sample_rate_hz = rec["sample_rate_hz"].get<int>();
                continue;
            }

            Sample s;
            if (!rec.contains("id") || !rec["id"].is_string())
                throw ParseError("record lacks string field 'id'");
            s.id = rec["id"].get<std::string>();
            if (!seen_ids.insert(s.id).second)
                throw ValidationError("duplicate sample id '" + s.id + "'");
            if (rec.contains("audio_path")) s.audio_path = rec["audio_path"].get<std::string>();
            if (rec.contains("speaker")) s.speaker = rec["speaker"].get<std::string>();
            if (rec.contains("gold")) {
                if (!rec["gold"].is_object()) throw ParseError("'gold' must be an object");
                for (auto& [key, value] : rec["gold"].items()) {
                    Task t = task_from_string(key);
                    s.gold.emplace(t, parse_gold_label(t, value, s.id, &manifest.warnings));
                }
            }
            if (rec.contains("attrs")) {
                if (!rec["attrs"].is_object()) throw ParseError("'attrs' must be an object");
                for (auto& [key, value] : rec["attrs"].items()) {
                    if (value.is_number())
                        s.attrs.emplace(key, AttrValue::of(value.get<double>()));
                    else if (value.is_string())
                        s.attrs.emplace(key, AttrValue::of(value.get<std::string>()));
                    else
                        throw ParseError("attr '" + key + "' must be a string or number");
                }
            }
            if (auto f0 = s.attr_number("mean_f0_hz"); f0 && *f0 <= 0.0)
                throw ValidationError("sample '" + s.id + "': mean_f0_hz must be > 0");
            manifest.samples.push_back(std::move(s));
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (manifest.samples.empty())
        throw ValidationError("manifest is empty: " + path.string());
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write manifest: " + path.string());
    json header;
    header["dataset"] = manifest.name;
    if (manifest.sample_rate_hz > 0) header["sample_rate_hz"] = manifest.sample_rate_hz;
    out << header.dump() << "\n";
    for (const auto& s : manifest.samples) {
        json rec;
        rec["id"] = s.id;
        if (!s.audio_path.empty()) rec["audio_path"] = s.audio_path;
        if (!s.speaker.empty()) rec["speaker"] = s.speaker;
        if (!s.gold.empty()) {
            json gold;
            for (const auto& [task, label] : s.gold) {
                if (label.is_value())
                    gold[to_string(task)] = label.value();
                else
                    gold[to_string(task)] = label.cls();
            }
            rec["gold"] = gold;
        }
        if (!s.attrs.empty()) {
            json attrs;
            for (const auto& [key, value] : s.attrs) attrs[key] = attr_to_json(value);
            rec["attrs"] = attrs;
        }
        out << rec.dump() << "\n";
    }
}

PredictionSet load_predictions(const std::filesystem::path& path, Task task) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open predictions: " + path.string());

    PredictionSet set;
    set.task = task;
    std::string line;
    int lineno = 0;
    bool any = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        any = true;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!rec.contains("id"))
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": record lacks 'id'");
        std::string id = rec["id"].get<std::string>();
        if (rec.contains("model_id") && set.model_id.empty())
            set.model_id = rec["model_id"].get<std::string>();
        Label label = Label::of_value(0.0);
        if (rec.contains("value")) {
            if (!is_dimensional(task))
                throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                      ": numeric value given for the categories task");
            label = Label::of_value(rec["value"].get<double>());
        } else if (rec.contains("class")) {
            if (is_dimensional(task))
                throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                      ": class given for dimensional task " + to_string(task));
            std::string cls = canonical_class(rec["class"].get<std::string>());
            if (!known_classes().count(cls))
                set.warnings.push_back("prediction '" + id + "': unknown class '" + cls + "'");
            label = Label::of_class(cls);
        } else {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": record needs 'value' or 'class'");
        }
        set.predictions.insert_or_assign(std::move(id), std::move(label));
    }
    if (!any) set.warnings.push_back("prediction file is empty: " + path.string());
    return set;
}

void save_predictions(const PredictionSet& preds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write predictions: " + path.string());
    for (const auto& [id, label] : preds.predictions) {
        json rec;
        rec["id"] = id;
        if (label.is_value())
            rec["value"] = label.value();
        else
            rec["class"] = label.cls();
        out << rec.dump() << "\n";
    }
}

GroupPartition partition_by_attribute(const DatasetManifest& manifest,
                                      const std::string& attribute) {
    GroupPartition partition;
    partition.attribute = attribute;
    for (const auto& s : manifest.samples) {
        auto value = s.attr_string(attribute);
        if (!value) {
            partition.excluded.push_back(s.id);
            continue;
        }
        partition.groups[*value].push_back(s.id);
    }
    if (partition.groups.empty())
        throw ValidationError("attribute '" + attribute + "' absent from all samples of '" +
                              manifest.name + "'");
    return partition;
}

}  // namespace sertest
