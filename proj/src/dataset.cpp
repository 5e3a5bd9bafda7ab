#include "bottlescan/dataset.hpp"

#include <fstream>
#include <sstream>

#include "bottlescan/pgm.hpp"

namespace bottlescan {

std::string to_string(DefectKind kind) {
    switch (kind) {
        case DefectKind::none: return "none";
        case DefectKind::crack: return "crack";
        case DefectKind::fragment: return "fragment";
        case DefectKind::deform: return "deform";
        case DefectKind::stain: return "stain";
        case DefectKind::impurity: return "impurity";
    }
    throw std::logic_error("unknown defect kind");
}

DefectKind defect_kind_from_string(const std::string& s) {
    if (s == "none") return DefectKind::none;
    if (s == "crack") return DefectKind::crack;
    if (s == "fragment") return DefectKind::fragment;
    if (s == "deform") return DefectKind::deform;
    if (s == "stain") return DefectKind::stain;
    if (s == "impurity") return DefectKind::impurity;
    throw std::invalid_argument("unknown defect kind: " + s);
}

Labels LabeledDataset::labels() const {
    Labels out(static_cast<Eigen::Index>(items.size()));
    for (size_t i = 0; i < items.size(); ++i) out[static_cast<Eigen::Index>(i)] = items[i].label;
    return out;
}

Labels LabeledDataset::clean_labels() const {
    Labels out(static_cast<Eigen::Index>(items.size()));
    for (size_t i = 0; i < items.size(); ++i)
        out[static_cast<Eigen::Index>(i)] =
            items[i].noise_flipped ? -items[i].label : items[i].label;
    return out;
}

long LabeledDataset::count_label(int label) const {
    long n = 0;
    for (const auto& item : items)
        if (item.label == label) ++n;
    return n;
}

void LabeledDataset::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.txt");
    if (!manifest) throw std::runtime_error("dataset: cannot write manifest in " + dir.string());
    for (size_t i = 0; i < items.size(); ++i) {
        std::ostringstream name;
        name << "img_" << i << ".pgm";
        write_pgm(dir / name.str(), items[i].image);
        manifest << name.str() << '\t' << items[i].label << '\t' << to_string(items[i].defect)
                 << '\t' << (items[i].noise_flipped ? 1 : 0) << '\n';
    }
    if (!manifest) throw std::runtime_error("dataset: manifest write failed");
}

LabeledDataset LabeledDataset::load(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw std::runtime_error("dataset: cannot open manifest " + manifest.string());
    const auto dir = manifest.parent_path();

    LabeledDataset data;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string path, kind;
        int label, flipped;
        if (!(fields >> path >> label >> kind >> flipped))
            throw std::runtime_error("dataset: malformed manifest line " +
                                     std::to_string(line_no));
        if (label != -1 && label != +1)
            throw std::runtime_error("dataset: bad label at manifest line " +
                                     std::to_string(line_no));
        DatasetItem item;
        item.image = read_pgm(dir / path);
        item.label = label;
        item.defect = defect_kind_from_string(kind);
        item.noise_flipped = flipped != 0;
        item.path = path;
        data.items.push_back(std::move(item));
    }
    return data;
}

}  // namespace bottlescan
