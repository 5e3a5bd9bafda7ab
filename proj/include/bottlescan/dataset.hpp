#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bottlescan/classifiers.hpp"
#include "bottlescan/image.hpp"

namespace bottlescan {

enum class DefectKind { none, crack, fragment, deform, stain, impurity };

std::string to_string(DefectKind kind);
DefectKind defect_kind_from_string(const std::string& s);

// Label convention: -1 defective, +1 qualified.
struct DatasetItem {
    Image image;
    int label = +1;
    DefectKind defect = DefectKind::none;
    bool noise_flipped = false;
    std::string path;  // set when loaded from / saved to disk
};

struct LabeledDataset {
    std::vector<DatasetItem> items;

    size_t size() const { return items.size(); }
    Labels labels() const;
    // Labels with any injected noise flips undone; equals labels() on
    // noise-free data. Error estimates are measured against these.
    Labels clean_labels() const;
    long count_label(int label) const;

    // Writes PGM files plus a line-oriented manifest; the manifest is the
    // sole source of truth for labels.
    void save(const std::filesystem::path& dir) const;
    static LabeledDataset load(const std::filesystem::path& manifest);
};

}  // namespace bottlescan
