#include <doctest.h>

#include <cmath>
#include <set>

#include "bottlescan/imaging.hpp"
#include "bottlescan/synthgen.hpp"

using namespace bottlescan;

namespace {

const DefectKind kDefects[] = {DefectKind::crack, DefectKind::fragment, DefectKind::deform,
                               DefectKind::stain, DefectKind::impurity};

}  // namespace

TEST_CASE("defect kind string round trip") {
    for (DefectKind k : kDefects) CHECK(defect_kind_from_string(to_string(k)) == k);
    CHECK(defect_kind_from_string("none") == DefectKind::none);
    CHECK_THROWS_AS(defect_kind_from_string("scratch"), std::invalid_argument);
}

TEST_CASE("scene spec validation") {
    SceneSpec spec;
    CHECK_NOTHROW(spec.validate());
    spec.bottle_width = spec.roi.w + 10;  // silhouette must fit the ROI
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = SceneSpec{};
    spec.defect_mix[DefectKind::none] = 0.9;  // mix no longer sums to 1
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("gen_frame is a pure function of spec and seed") {
    const SceneSpec spec;
    const FrameSample a = gen_frame(spec, 42);
    const FrameSample b = gen_frame(spec, 42);
    CHECK(a.label == b.label);
    CHECK(a.defect == b.defect);
    CHECK((a.frame - b.frame).abs().maxCoeff() == 0.0);

    const FrameSample c = gen_frame(spec, 43);
    CHECK((a.frame - c.frame).abs().maxCoeff() > 0.0);
}

TEST_CASE("gen_frame geometry and value range") {
    const SceneSpec spec;
    const FrameSample s = gen_frame(spec, 1);
    CHECK(s.frame.rows() == spec.frame_h);
    CHECK(s.frame.cols() == spec.frame_w);
    CHECK(s.frame.minCoeff() >= 0.0);
    CHECK(s.frame.maxCoeff() <= 1.0);

    // Backlit field outside the ROI is bright, the bottle body is darker.
    const Image roi = crop_roi(s.frame, spec.roi);
    CHECK(s.frame(5, 5) > 0.5);
    CHECK(roi.minCoeff() < 0.3);
}

TEST_CASE("defect twins differ only on the defect support") {
    const SceneSpec spec;
    for (DefectKind kind : kDefects) {
        CAPTURE(to_string(kind));
        const std::uint64_t seed = 90 + static_cast<int>(kind);
        const FrameSample bad = gen_frame_with_defect(spec, kind, seed);
        const FrameSample good = gen_frame_with_defect(spec, DefectKind::none, seed);

        CHECK(bad.label == -1);
        CHECK(good.label == +1);
        CHECK(bad.defect == kind);

        const Eigen::ArrayXXd diff = (bad.frame - good.frame).abs();
        const auto support = (diff > 1e-12).count();
        CHECK(support > 0);
        // Defects are local: well under 10% of the frame.
        CHECK(support < 0.1 * diff.size());

        // Contrast on the defect support clears the noise floor.
        const double mean_on_support = diff.sum() / static_cast<double>(support);
        CHECK(mean_on_support > 5.0 * spec.noise_sigma);

        // Support sits inside the ROI.
        Eigen::ArrayXXd outside = diff;
        outside.block(spec.roi.y, spec.roi.x, spec.roi.h, spec.roi.w).setZero();
        CHECK(outside.maxCoeff() <= 1e-12);
    }
}

TEST_CASE("gen_dataset exact defective count and ROI-sized images") {
    const SceneSpec spec;
    const LabeledDataset d = gen_dataset(spec, 100, 0.35, 5);
    CHECK(d.size() == 100);
    CHECK(d.count_label(-1) == 35);
    CHECK(d.count_label(+1) == 65);
    for (const auto& item : d.items) {
        CHECK(item.image.rows() == spec.roi.h);
        CHECK(item.image.cols() == spec.roi.w);
        CHECK((item.label == -1) == (item.defect != DefectKind::none));
    }
}

TEST_CASE("gen_dataset rounds the defective count") {
    const SceneSpec spec;
    CHECK(gen_dataset(spec, 10, 0.55, 6).count_label(-1) == 6);
    CHECK(gen_dataset(spec, 10, 0.0, 6).count_label(-1) == 0);
    CHECK(gen_dataset(spec, 10, 1.0, 6).count_label(-1) == 10);
}

TEST_CASE("gen_dataset deterministic and seed-sensitive") {
    const SceneSpec spec;
    const LabeledDataset a = gen_dataset(spec, 30, 0.5, 7);
    const LabeledDataset b = gen_dataset(spec, 30, 0.5, 7);
    const LabeledDataset c = gen_dataset(spec, 30, 0.5, 8);
    CHECK(a.labels() == b.labels());
    double max_ab = 0.0, max_ac = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        max_ab = std::max(max_ab, (a.items[i].image - b.items[i].image).abs().maxCoeff());
        max_ac = std::max(max_ac, (a.items[i].image - c.items[i].image).abs().maxCoeff());
    }
    CHECK(max_ab == 0.0);
    CHECK(max_ac > 0.0);
}

TEST_CASE("inject_label_noise flips exactly floor(ratio*n) labels") {
    const SceneSpec spec;
    const LabeledDataset clean = gen_dataset(spec, 50, 0.5, 9);
    const LabeledDataset noisy = inject_label_noise(clean, 0.17, 10);  // floor(8.5) = 8

    int flips = 0, marked = 0;
    for (size_t i = 0; i < clean.size(); ++i) {
        if (noisy.items[i].label != clean.items[i].label) ++flips;
        if (noisy.items[i].noise_flipped) ++marked;
        CHECK((noisy.items[i].image - clean.items[i].image).abs().maxCoeff() == 0.0);
    }
    CHECK(flips == 8);
    CHECK(marked == 8);
    CHECK(clean.count_label(-1) == 25);  // input untouched
}

TEST_CASE("double noise injection with the same seed restores labels") {
    const SceneSpec spec;
    const LabeledDataset clean = gen_dataset(spec, 40, 0.5, 11);
    const LabeledDataset once = inject_label_noise(clean, 0.25, 12);
    const LabeledDataset twice = inject_label_noise(once, 0.25, 12);
    CHECK(twice.labels() == clean.labels());
    for (const auto& item : twice.items) CHECK(!item.noise_flipped);
}

TEST_CASE("inject_label_noise zero ratio is the identity") {
    const SceneSpec spec;
    const LabeledDataset clean = gen_dataset(spec, 20, 0.5, 13);
    const LabeledDataset same = inject_label_noise(clean, 0.0, 14);
    CHECK(same.labels() == clean.labels());
}

TEST_CASE("bottle_crossing_schedule shape") {
    const int starts[] = {10, 40};
    const auto sched = bottle_crossing_schedule(60, starts);
    REQUIRE(sched.size() == 60);
    int entering = 0, centered = 0, leaving = 0;
    for (FramePhase p : sched) {
        entering += (p == FramePhase::entering);
        centered += (p == FramePhase::centered);
        leaving += (p == FramePhase::leaving);
    }
    CHECK(entering == 4);
    CHECK(centered == 16);
    CHECK(leaving == 4);
    CHECK(sched[9] == FramePhase::background);
    CHECK(sched[10] == FramePhase::entering);
    CHECK(sched[12] == FramePhase::centered);
    CHECK(sched[19] == FramePhase::centered);
    CHECK(sched[20] == FramePhase::leaving);
    CHECK(sched[22] == FramePhase::background);
}

TEST_CASE("gen_stream produces the scheduled presence mask") {
    const SceneSpec spec;
    const int starts[] = {12, 40};
    const auto sched = bottle_crossing_schedule(60, starts);
    const StreamResult stream = gen_stream(spec, sched, 15);

    REQUIRE(stream.frames.size() == 60);
    REQUIRE(stream.presence.size() == 60);
    REQUIRE(stream.frame_labels.size() == 60);
    CHECK(stream.bottle_labels.size() == 2);

    for (size_t i = 0; i < sched.size(); ++i) {
        const bool centered = sched[i] == FramePhase::centered;
        CHECK(stream.presence[i] == (centered ? 1 : 0));
        if (centered)
            CHECK((stream.frame_labels[i] == 1 || stream.frame_labels[i] == -1));
        else
            CHECK(stream.frame_labels[i] == 0);
    }
}

TEST_CASE("stream trigger patches see centered bottles but not partials") {
    const SceneSpec spec;
    TriggerConfig trig{.patches = {{430, 320, 26, 30}, {460, 320, 26, 30}, {490, 320, 26, 30}},
                      .theta_thres = 0.15 * 26 * 30,
                      .n_background_frames = 10};

    std::vector<FramePhase> sched(40, FramePhase::background);
    for (int i = 14; i < 16; ++i) sched[i] = FramePhase::entering;
    for (int i = 16; i < 24; ++i) sched[i] = FramePhase::centered;
    for (int i = 24; i < 26; ++i) sched[i] = FramePhase::leaving;

    const StreamResult stream = gen_stream(spec, sched, 16);
    std::vector<Image> bg(stream.frames.begin(), stream.frames.begin() + 10);
    const Image background = mean_background(bg);

    for (size_t i = 10; i < sched.size(); ++i) {
        const int present = bottle_present(background, stream.frames[i], trig);
        CHECK(present == stream.presence[i]);
    }
}

TEST_CASE("centered frames within a run share the bottle label") {
    const SceneSpec spec;
    const int starts[] = {10};
    const auto sched = bottle_crossing_schedule(30, starts);
    const StreamResult stream = gen_stream(spec, sched, 17);
    std::set<int> labels;
    for (size_t i = 0; i < sched.size(); ++i)
        if (sched[i] == FramePhase::centered) labels.insert(stream.frame_labels[i]);
    CHECK(labels.size() == 1);
    CHECK(*labels.begin() == stream.bottle_labels[0]);
}
