#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "types.hpp"

namespace fsel {

// Validated, immutable collection of dataset items. Labels are dense
// 0..num_classes-1; names come from an optional sidecar map.
class DatasetManifest {
public:
    DatasetManifest() = default;
    // Throws on duplicate ids, negative labels, or labels >= num_classes.
    // When num_classes is absent it is max(label)+1.
    DatasetManifest(std::vector<DatasetItem> items, std::optional<int> num_classes = std::nullopt,
                    std::vector<std::string> class_names = {});

    const std::vector<DatasetItem>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    int num_classes() const noexcept { return num_classes_; }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }

    const DatasetItem* find(const std::string& id) const;
    std::size_t count(Split split) const;
    std::size_t count(Split split, int label) const;

    // Indices into items(), grouped by label, in manifest order.
    std::vector<std::vector<std::size_t>> indices_by_class(Split split) const;
    std::vector<std::size_t> indices(Split split) const;

    bool operator==(const DatasetManifest& other) const {
        return items_ == other.items_ && num_classes_ == other.num_classes_ && class_names_ == other.class_names_;
    }

private:
    std::vector<DatasetItem> items_;
    int num_classes_ = 0;
    std::vector<std::string> class_names_;
    std::unordered_map<std::string, std::size_t> by_id_;
    // [split][label]
    std::vector<std::vector<std::size_t>> counts_;
};

// JSON-lines reader. `source` names the input in error messages.
DatasetManifest parse_manifest(std::istream& in, const std::string& source = "<manifest>");

// Reads `path`, plus `<path>.classes` (one class name per line) when present.
DatasetManifest load_manifest(const std::filesystem::path& path);

void write_manifest(std::ostream& out, const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Succeeds iff every class has at least K pool items; otherwise throws
// BudgetError for the first deficient class.
void validate_budget(const DatasetManifest& manifest, const SelectionBudget& budget);

}  // namespace fsel
