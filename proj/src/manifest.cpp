#include "manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "error.hpp"

namespace fsel {

using nlohmann::json;

namespace {

constexpr std::size_t split_index(Split s) { return static_cast<std::size_t>(s); }

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& msg) {
    throw Error(ErrorCode::Parse, source + ":" + std::to_string(line) + ": " + msg);
}

DatasetItem parse_item(const json& obj, const std::string& source, std::size_t line) {
    if (!obj.is_object()) parse_fail(source, line, "expected a JSON object");
    DatasetItem item;

    auto id = obj.find("id");
    if (id == obj.end() || !id->is_string()) parse_fail(source, line, "missing string key 'id'");
    item.id = id->get<std::string>();
    if (item.id.empty()) parse_fail(source, line, "empty id");

    auto label = obj.find("label");
    if (label == obj.end() || !label->is_number_integer()) parse_fail(source, line, "missing integer key 'label'");
    const auto raw_label = label->get<std::int64_t>();
    if (raw_label < 0 || raw_label > std::numeric_limits<int>::max()) {
        parse_fail(source, line, "label " + std::to_string(raw_label) + " out of range");
    }
    item.label = static_cast<int>(raw_label);

    auto split = obj.find("split");
    if (split == obj.end() || !split->is_string()) parse_fail(source, line, "missing string key 'split'");
    auto parsed = parse_split(split->get<std::string>());
    if (!parsed) {
        parse_fail(source, line, "unknown split '" + split->get<std::string>() + "'");
    }
    item.split = *parsed;

    const bool has_path = obj.contains("path");
    const bool has_features = obj.contains("features");
    if (has_path == has_features) parse_fail(source, line, "exactly one of 'path' or 'features' is required");
    if (has_path) {
        const auto& p = obj.at("path");
        if (!p.is_string()) parse_fail(source, line, "'path' must be a string");
        item.source = ImagePath{p.get<std::string>()};
    } else {
        const auto& f = obj.at("features");
        if (!f.is_array() || f.empty()) parse_fail(source, line, "'features' must be a non-empty array of numbers");
        RawFeatures features;
        features.values.reserve(f.size());
        for (const auto& v : f) {
            if (!v.is_number()) parse_fail(source, line, "'features' must contain only numbers");
            const double d = v.get<double>();
            if (!std::isfinite(d)) parse_fail(source, line, "'features' contains a non-finite value");
            features.values.push_back(d);
        }
        item.source = std::move(features);
    }

    if (auto o = obj.find("outlier"); o != obj.end()) {
        if (!o->is_boolean()) parse_fail(source, line, "'outlier' must be a boolean");
        item.outlier = o->get<bool>();
    }
    return item;
}

}  // namespace

DatasetManifest::DatasetManifest(std::vector<DatasetItem> items, std::optional<int> num_classes,
                                 std::vector<std::string> class_names)
    : items_(std::move(items)), class_names_(std::move(class_names)) {
    if (items_.empty()) throw Error(ErrorCode::InvalidArgument, "manifest contains no items");

    int max_label = -1;
    for (const auto& item : items_) {
        if (item.label < 0) throw Error(ErrorCode::InvalidArgument, "label out of range for item '" + item.id + "'");
        max_label = std::max(max_label, item.label);
    }
    if (!num_classes && !class_names_.empty()) num_classes = static_cast<int>(class_names_.size());
    num_classes_ = num_classes.value_or(max_label + 1);
    if (num_classes_ <= 0) throw Error(ErrorCode::InvalidArgument, "num_classes must be positive");
    if (!class_names_.empty() && static_cast<int>(class_names_.size()) != num_classes_) {
        throw Error(ErrorCode::InvalidArgument, "class name map size does not match num_classes");
    }
    if (class_names_.empty()) {
        for (int c = 0; c < num_classes_; ++c) class_names_.push_back(std::to_string(c));
    }

    counts_.assign(3, std::vector<std::size_t>(static_cast<std::size_t>(num_classes_), 0));
    by_id_.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto& item = items_[i];
        if (item.label >= num_classes_) {
            throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(item.label) + " of item '" + item.id +
                                                        "' out of range (num_classes " +
                                                        std::to_string(num_classes_) + ")");
        }
        if (!by_id_.emplace(item.id, i).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate id '" + item.id + "'");
        }
        ++counts_[split_index(item.split)][static_cast<std::size_t>(item.label)];
    }
}

const DatasetItem* DatasetManifest::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &items_[it->second];
}

std::size_t DatasetManifest::count(Split split) const {
    const auto& row = counts_[split_index(split)];
    std::size_t total = 0;
    for (auto c : row) total += c;
    return total;
}

std::size_t DatasetManifest::count(Split split, int label) const {
    if (label < 0 || label >= num_classes_) return 0;
    return counts_[split_index(split)][static_cast<std::size_t>(label)];
}

std::vector<std::vector<std::size_t>> DatasetManifest::indices_by_class(Split split) const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(num_classes_));
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (items_[i].split == split) out[static_cast<std::size_t>(items_[i].label)].push_back(i);
    }
    return out;
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (items_[i].split == split) out.push_back(i);
    }
    return out;
}

DatasetManifest parse_manifest(std::istream& in, const std::string& source) {
    std::vector<DatasetItem> items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            parse_fail(source, line_no, std::string("invalid JSON: ") + e.what());
        }
        items.push_back(parse_item(obj, source, line_no));
    }
    if (items.empty()) throw Error(ErrorCode::Parse, "manifest contains no items");
    return DatasetManifest(std::move(items));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open manifest '" + path.string() + "'");
    DatasetManifest parsed = parse_manifest(in, path.string());

    auto sidecar = path;
    sidecar += ".classes";
    if (!std::filesystem::exists(sidecar)) return parsed;

    std::ifstream names_in(sidecar);
    std::vector<std::string> names;
    for (std::string name; std::getline(names_in, name);) {
        if (!name.empty() && name.back() == '\r') name.pop_back();
        if (!name.empty()) names.push_back(name);
    }
    auto items = parsed.items();
    const int num_classes = static_cast<int>(names.size());
    return DatasetManifest(std::move(items), num_classes, std::move(names));
}

void write_manifest(std::ostream& out, const DatasetManifest& manifest) {
    for (const auto& item : manifest.items()) {
        json obj;
        obj["id"] = item.id;
        obj["label"] = item.label;
        obj["split"] = std::string(to_string(item.split));
        if (const auto* p = std::get_if<ImagePath>(&item.source)) {
            obj["path"] = p->path;
        } else {
            obj["features"] = std::get<RawFeatures>(item.source).values;
        }
        if (item.outlier) obj["outlier"] = true;
        out << obj.dump() << '\n';
    }
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write manifest '" + path.string() + "'");
    write_manifest(out, manifest);

    bool default_names = true;
    for (int c = 0; c < manifest.num_classes(); ++c) {
        if (manifest.class_names()[static_cast<std::size_t>(c)] != std::to_string(c)) default_names = false;
    }
    auto sidecar = path;
    sidecar += ".classes";
    if (default_names) {
        std::filesystem::remove(sidecar);
        return;
    }
    std::ofstream names_out(sidecar, std::ios::binary);
    for (const auto& n : manifest.class_names()) names_out << n << '\n';
}

void validate_budget(const DatasetManifest& manifest, const SelectionBudget& budget) {
    if (budget.shots_per_class < 1) throw Error(ErrorCode::InvalidArgument, "shots per class must be >= 1");
    if (budget.num_classes != manifest.num_classes()) {
        throw Error(ErrorCode::InvalidArgument, "budget num_classes " + std::to_string(budget.num_classes) +
                                                    " does not match manifest (" +
                                                    std::to_string(manifest.num_classes()) + ")");
    }
    for (int c = 0; c < manifest.num_classes(); ++c) {
        const auto n = manifest.count(Split::Pool, c);
        if (n < budget.shots_per_class) throw BudgetError(c, n, budget.shots_per_class);
    }
}

}  // namespace fsel
