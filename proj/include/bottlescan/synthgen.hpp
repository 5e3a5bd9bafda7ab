#pragma once

#include <map>
#include <span>

#include "bottlescan/dataset.hpp"
#include "bottlescan/rng.hpp"

namespace bottlescan {

// Backlit bottle scene parameters. All geometry is ROI-relative pixels;
// the bottle silhouette must fit inside the ROI.
struct SceneSpec {
    int frame_w = 752;
    int frame_h = 480;
    Patch roi{405, 39, 150, 356};

    int bottle_width = 120;
    int bottle_height = 340;
    int wall_thickness = 8;
    int neck_width = 64;
    int neck_height = 70;

    double backlight = 0.78;
    double glass_level = 0.45;
    double wall_level = 0.12;

    double illumination_drift = 0.15;  // multiplicative, uniform in +-drift
    double noise_sigma = 0.02;

    std::map<DefectKind, double> defect_mix = {
        {DefectKind::none, 0.5},     {DefectKind::crack, 0.1},
        {DefectKind::fragment, 0.1}, {DefectKind::deform, 0.1},
        {DefectKind::stain, 0.1},    {DefectKind::impurity, 0.1}};

    void validate() const;
};

struct FrameSample {
    Image frame;
    int label = +1;  // -1 defective, +1 qualified
    DefectKind defect = DefectKind::none;
};

// Renders one full frame; defect kind drawn from the mix. Pure function
// of (spec, seed).
FrameSample gen_frame(const SceneSpec& spec, std::uint64_t seed);

// Same geometry, drift and noise as gen-by-mix with this seed, but with a
// forced defect kind; the defect-free twin shares every other pixel.
FrameSample gen_frame_with_defect(const SceneSpec& spec, DefectKind kind, std::uint64_t seed);

// ROI-sized dataset with an exact defective count of round(fraction * n).
LabeledDataset gen_dataset(const SceneSpec& spec, int n, double defective_fraction,
                           std::uint64_t seed);

// Flips exactly floor(ratio * n) labels chosen uniformly without
// replacement; flipped items are marked, the input is untouched.
LabeledDataset inject_label_noise(const LabeledDataset& d, double ratio, std::uint64_t seed);

enum class FramePhase { background, entering, centered, leaving };

struct StreamResult {
    std::vector<Image> frames;
    std::vector<int> presence;      // ground truth: 1 iff centered bottle
    std::vector<int> frame_labels;  // +-1 on centered frames, 0 elsewhere
    std::vector<int> bottle_labels; // one per centered run
};

// Conveyor-style frame sequence: background frames differ only by noise
// and drift; partial frames show the bottle shifted out of the patch zone.
StreamResult gen_stream(const SceneSpec& spec, std::span<const FramePhase> schedule,
                        std::uint64_t seed);

struct StreamFrame {
    Image frame;
    int presence = 0;
    int frame_label = 0;
};

// Frame `index` of the stream gen_stream would produce for the same
// arguments; pure per-frame form for long streams that never fit in memory.
StreamFrame gen_stream_frame(const SceneSpec& spec, std::span<const FramePhase> schedule,
                             std::uint64_t seed, int index);

// Standard crossing pattern: 2 entering, 8 centered, 2 leaving frames per
// bottle starting at each start frame.
std::vector<FramePhase> bottle_crossing_schedule(int n_frames, std::span<const int> starts);

}  // namespace bottlescan
