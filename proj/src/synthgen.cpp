#include "bottlescan/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace bottlescan {

namespace {

struct BottleGeometry {
    double cx;        // silhouette center, ROI-relative x
    int y_top;        // first bottle row, ROI-relative y
    int body_h;
    double body_half;
    double neck_half;
    int neck_h;
    int shoulder_h = 24;
    bool deformed = false;
    double deform_amp = 0.0;
    double deform_period = 60.0;
};

BottleGeometry draw_geometry(const SceneSpec& spec, Rng& rng) {
    BottleGeometry g;
    std::uniform_int_distribution<int> cx_jitter(-2, 2);
    std::uniform_int_distribution<int> h_jitter(-3, 0);
    g.body_h = spec.bottle_height + h_jitter(rng);
    g.cx = spec.roi.w / 2.0 + cx_jitter(rng);
    g.y_top = spec.roi.h - g.body_h;
    g.body_half = spec.bottle_width / 2.0;
    g.neck_half = spec.neck_width / 2.0;
    g.neck_h = spec.neck_height;
    return g;
}

double half_width(const BottleGeometry& g, int rel_y) {
    if (rel_y < g.neck_h) return g.neck_half;
    if (rel_y < g.neck_h + g.shoulder_h) {
        const double t = static_cast<double>(rel_y - g.neck_h) / g.shoulder_h;
        return g.neck_half + t * (g.body_half - g.neck_half);
    }
    return g.body_half;
}

double profile_shift(const BottleGeometry& g, int rel_y) {
    if (!g.deformed || rel_y < g.neck_h + g.shoulder_h) return 0.0;
    return g.deform_amp *
           std::sin(2.0 * std::numbers::pi * (rel_y - g.neck_h - g.shoulder_h) / g.deform_period);
}

// Base silhouette on a backlight field; cx_offset shifts the whole bottle
// (partial frames in streams).
Image render_base(const SceneSpec& spec, const BottleGeometry& g, double cx_offset) {
    Image roi = Image::Constant(spec.roi.h, spec.roi.w, spec.backlight);
    const int wt = spec.wall_thickness;
    for (int y = std::max(0, g.y_top); y < spec.roi.h; ++y) {
        const int rel_y = y - g.y_top;
        const double hw = half_width(g, rel_y);
        const double cx = g.cx + cx_offset + profile_shift(g, rel_y);
        const int x0 = std::max(0, static_cast<int>(std::ceil(cx - hw)));
        const int x1 = std::min(spec.roi.w, static_cast<int>(std::floor(cx + hw)) + 1);
        for (int x = x0; x < x1; ++x) {
            const double left = x - (cx - hw);
            const double right = (cx + hw) - x;
            const double bottom = spec.roi.h - 1 - y;
            const bool wall = left < wt || right < wt || bottom < wt || rel_y < wt;
            roi(y, x) = wall ? spec.wall_level : spec.glass_level;
        }
    }
    return roi;
}

void put(Image& roi, int y, int x, double v) {
    if (y >= 0 && y < roi.rows() && x >= 0 && x < roi.cols()) roi(y, x) = v;
}

void apply_defect(Image& roi, const SceneSpec& spec, BottleGeometry& g, DefectKind kind,
                  Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int wt = spec.wall_thickness;
    const int body_top = g.y_top + g.neck_h + g.shoulder_h;

    switch (kind) {
        case DefectKind::none: break;

        case DefectKind::crack: {
            // Bright scattering polyline running down one wall into the body.
            const bool left = unit(rng) < 0.5;
            std::uniform_int_distribution<int> y_start(body_top + 30, body_top + 60);
            int y = y_start(rng);
            double x = left ? g.cx - g.body_half + wt + 2 : g.cx + g.body_half - wt - 4;
            std::uniform_int_distribution<int> len_dist(120, 150);
            const int len = len_dist(rng);
            for (int i = 0; i < len; ++i) {
                for (int dx = 0; dx < 4; ++dx) put(roi, y, static_cast<int>(x) + dx, 0.9);
                ++y;
                x += left ? 0.35 : -0.35;
            }
            break;
        }

        case DefectKind::fragment: {
            // Missing rim arc: glass gone at the neck mouth, backlight shows.
            const bool left = unit(rng) < 0.5;
            std::uniform_int_distribution<int> arc_dist(
                static_cast<int>(g.neck_half * 0.5), static_cast<int>(g.neck_half * 1.1));
            const int arc = arc_dist(rng);
            std::uniform_int_distribution<int> depth_dist(wt + 4, wt + 12);
            const int depth = depth_dist(rng);
            for (int y = g.y_top; y < g.y_top + depth; ++y)
                for (int dx = 0; dx < arc; ++dx) {
                    const int x = left ? static_cast<int>(g.cx - g.neck_half) + dx
                                       : static_cast<int>(g.cx + g.neck_half) - dx;
                    put(roi, y, x, spec.backlight);
                }
            break;
        }

        case DefectKind::deform:
            // Handled in geometry; caller re-renders with a warped profile.
            break;

        case DefectKind::stain: {
            // Low-contrast blob inside the body.
            // Stains cluster at the fill line just below the shoulder.
            std::uniform_real_distribution<double> cx_dist(g.cx - 20.0, g.cx + 20.0);
            std::uniform_real_distribution<double> cy_dist(body_top + 35, body_top + 75);
            std::uniform_real_distribution<double> r_dist(12.0, 18.0);
            std::uniform_real_distribution<double> peak_dist(0.32, 0.42);
            const double bx = cx_dist(rng), by = cy_dist(rng);
            const double r = r_dist(rng), peak = peak_dist(rng);
            const double sigma = r / 2.0;
            const int reach = static_cast<int>(r) + 2;
            for (int dy = -reach; dy <= reach; ++dy)
                for (int dx = -reach; dx <= reach; ++dx) {
                    const double d2 = double(dx) * dx + double(dy) * dy;
                    const double delta = peak * std::exp(-d2 / (2.0 * sigma * sigma));
                    if (delta < 0.08) continue;
                    const int y = static_cast<int>(by) + dy;
                    const int x = static_cast<int>(bx) + dx;
                    if (y >= 0 && y < roi.rows() && x >= 0 && x < roi.cols())
                        roi(y, x) = std::max(0.0, roi(y, x) - delta);
                }
            break;
        }

        case DefectKind::impurity: {
            // Small dark speck in the liquid region (lower interior).
            // Impurities settle near the bottom center of the liquid column.
            std::uniform_real_distribution<double> cx_dist(g.cx - 10.0, g.cx + 10.0);
            std::uniform_real_distribution<double> cy_dist(spec.roi.h - 65.0, spec.roi.h - 40.0);
            std::uniform_int_distribution<int> r_dist(7, 10);
            const double bx = cx_dist(rng), by = cy_dist(rng);
            const int r = r_dist(rng);
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    if (dx * dx + dy * dy <= r * r)
                        put(roi, static_cast<int>(by) + dy, static_cast<int>(bx) + dx, 0.08);
            break;
        }
    }
}

Image render_roi(const SceneSpec& spec, DefectKind kind, std::uint64_t seed,
                 double cx_offset = 0.0) {
    Rng geom_rng(derive_seed(seed, "geom"));
    BottleGeometry g = draw_geometry(spec, geom_rng);
    Rng defect_rng(derive_seed(seed, "defect"));
    if (kind == DefectKind::deform) {
        std::uniform_real_distribution<double> amp(5.0, 9.0);
        std::uniform_real_distribution<double> period(50.0, 90.0);
        g.deformed = true;
        g.deform_amp = amp(defect_rng);
        g.deform_period = period(defect_rng);
    }
    Image roi = render_base(spec, g, cx_offset);
    apply_defect(roi, spec, g, kind, defect_rng);
    return roi;
}

void apply_drift_and_noise(Image& img, const SceneSpec& spec, std::uint64_t seed) {
    Rng drift_rng(derive_seed(seed, "drift"));
    std::uniform_real_distribution<double> drift(-spec.illumination_drift,
                                                 spec.illumination_drift);
    const double factor = 1.0 + drift(drift_rng);
    Rng noise_rng(derive_seed(seed, "noise"));
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (Eigen::Index y = 0; y < img.rows(); ++y)
        for (Eigen::Index x = 0; x < img.cols(); ++x)
            img(y, x) = std::clamp(img(y, x) * factor + noise(noise_rng), 0.0, 1.0);
}

DefectKind pick_defect(const std::map<DefectKind, double>& mix, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    for (const auto& [kind, p] : mix) {
        if (u < p) return kind;
        u -= p;
    }
    return mix.rbegin()->first;
}

DefectKind pick_defective_kind(const std::map<DefectKind, double>& mix, Rng& rng) {
    std::map<DefectKind, double> defective;
    double total = 0.0;
    for (const auto& [kind, p] : mix)
        if (kind != DefectKind::none && p > 0.0) {
            defective[kind] = p;
            total += p;
        }
    if (defective.empty())
        throw std::invalid_argument("synthgen: defect mix has no defective mass");
    for (auto& [kind, p] : defective) p /= total;
    return pick_defect(defective, rng);
}

FrameSample frame_from_roi(const SceneSpec& spec, Image roi, int label, DefectKind kind,
                           std::uint64_t seed) {
    Image frame = Image::Constant(spec.frame_h, spec.frame_w, spec.backlight);
    frame.block(spec.roi.y, spec.roi.x, spec.roi.h, spec.roi.w) = roi;
    apply_drift_and_noise(frame, spec, seed);
    return {std::move(frame), label, kind};
}

}  // namespace

void SceneSpec::validate() const {
    if (frame_w < 1 || frame_h < 1) throw std::invalid_argument("scene: empty frame");
    if (roi.x < 0 || roi.y < 0 || roi.w < 1 || roi.h < 1 || roi.x + roi.w > frame_w ||
        roi.y + roi.h > frame_h)
        throw std::invalid_argument("scene: ROI outside frame");
    if (bottle_width > roi.w || bottle_height > roi.h || neck_width > bottle_width ||
        wall_thickness < 1)
        throw std::invalid_argument("scene: bottle geometry does not fit ROI");
    if (backlight < 0.0 || backlight > 1.0 || noise_sigma < 0.0 || illumination_drift < 0.0)
        throw std::invalid_argument("scene: bad photometric parameters");
    double total = 0.0;
    for (const auto& [kind, p] : defect_mix) {
        if (p < 0.0) throw std::invalid_argument("scene: negative defect probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("scene: defect probabilities must sum to 1");
}

FrameSample gen_frame(const SceneSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng kind_rng(derive_seed(seed, "kind"));
    const DefectKind kind = pick_defect(spec.defect_mix, kind_rng);
    return gen_frame_with_defect(spec, kind, seed);
}

FrameSample gen_frame_with_defect(const SceneSpec& spec, DefectKind kind, std::uint64_t seed) {
    spec.validate();
    const int label = kind == DefectKind::none ? +1 : -1;
    return frame_from_roi(spec, render_roi(spec, kind, seed), label, kind, seed);
}

LabeledDataset gen_dataset(const SceneSpec& spec, int n, double defective_fraction,
                           std::uint64_t seed) {
    spec.validate();
    if (n < 2) throw std::invalid_argument("gen_dataset: n < 2");
    if (!(defective_fraction >= 0.0 && defective_fraction <= 1.0))
        throw std::invalid_argument("gen_dataset: impossible defective fraction");
    const int n_defective = static_cast<int>(std::lround(defective_fraction * n));

    Rng assign_rng(derive_seed(seed, "assign"));
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), assign_rng);
    std::vector<bool> defective(static_cast<size_t>(n), false);
    for (int i = 0; i < n_defective; ++i) defective[static_cast<size_t>(order[i])] = true;

    LabeledDataset data;
    data.items.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::uint64_t item_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        DefectKind kind = DefectKind::none;
        if (defective[static_cast<size_t>(i)]) {
            Rng kind_rng(derive_seed(item_seed, "kind"));
            kind = pick_defective_kind(spec.defect_mix, kind_rng);
        }
        Image roi = render_roi(spec, kind, item_seed);
        apply_drift_and_noise(roi, spec, item_seed);
        DatasetItem item;
        item.image = std::move(roi);
        item.label = kind == DefectKind::none ? +1 : -1;
        item.defect = kind;
        data.items.push_back(std::move(item));
    }
    return data;
}

LabeledDataset inject_label_noise(const LabeledDataset& d, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw std::invalid_argument("inject_label_noise: ratio outside [0,1]");
    const int n = static_cast<int>(d.size());
    const int n_flips = static_cast<int>(std::floor(ratio * n));

    Rng rng(derive_seed(seed, "labelnoise"));
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    LabeledDataset out = d;
    for (int i = 0; i < n_flips; ++i) {
        auto& item = out.items[static_cast<size_t>(order[i])];
        item.label = -item.label;
        item.noise_flipped = !item.noise_flipped;
    }
    return out;
}

namespace {

// Index of this frame's crossing: count the background -> bottle edges up to
// and including `index`. Frames within one crossing share the bottle seed.
int run_index(std::span<const FramePhase> schedule, int index) {
    int run = -1;
    bool in_bottle = false;
    for (int i = 0; i <= index; ++i) {
        if (schedule[static_cast<size_t>(i)] == FramePhase::background) {
            in_bottle = false;
        } else if (!in_bottle) {
            in_bottle = true;
            ++run;
        }
    }
    return run;
}

DefectKind run_defect(const SceneSpec& spec, std::uint64_t run_seed) {
    Rng kind_rng(derive_seed(run_seed, "kind"));
    return pick_defect(spec.defect_mix, kind_rng);
}

}  // namespace

StreamFrame gen_stream_frame(const SceneSpec& spec, std::span<const FramePhase> schedule,
                             std::uint64_t seed, int index) {
    spec.validate();
    if (index < 0 || index >= static_cast<int>(schedule.size()))
        throw std::invalid_argument("gen_stream_frame: index outside the schedule");

    const FramePhase phase = schedule[static_cast<size_t>(index)];
    const std::uint64_t frame_seed = derive_seed(seed, static_cast<std::uint64_t>(index));

    StreamFrame out;
    if (phase == FramePhase::background) {
        out.frame = Image::Constant(spec.frame_h, spec.frame_w, spec.backlight);
        apply_drift_and_noise(out.frame, spec, frame_seed);
        return out;
    }

    const int run = run_index(schedule, index);
    const std::uint64_t run_seed = derive_seed(seed, "bottle" + std::to_string(run));
    const DefectKind kind = run_defect(spec, run_seed);

    double offset = 0.0;
    if (phase == FramePhase::entering) offset = 70.0;
    if (phase == FramePhase::leaving) offset = -70.0;
    Image roi = render_roi(spec, kind, run_seed, offset);
    out.frame = Image::Constant(spec.frame_h, spec.frame_w, spec.backlight);
    out.frame.block(spec.roi.y, spec.roi.x, spec.roi.h, spec.roi.w) = roi;
    apply_drift_and_noise(out.frame, spec, frame_seed);

    const bool centered = phase == FramePhase::centered;
    out.presence = centered ? 1 : 0;
    out.frame_label = centered ? (kind == DefectKind::none ? +1 : -1) : 0;
    return out;
}

StreamResult gen_stream(const SceneSpec& spec, std::span<const FramePhase> schedule,
                        std::uint64_t seed) {
    spec.validate();
    StreamResult result;
    result.frames.reserve(schedule.size());
    result.presence.reserve(schedule.size());
    result.frame_labels.reserve(schedule.size());

    bool in_bottle = false;
    int run = -1;
    for (size_t i = 0; i < schedule.size(); ++i) {
        const FramePhase phase = schedule[i];
        if (phase == FramePhase::background) {
            in_bottle = false;
        } else if (!in_bottle) {
            in_bottle = true;
            ++run;
            const std::uint64_t run_seed =
                derive_seed(seed, "bottle" + std::to_string(run));
            result.bottle_labels.push_back(
                run_defect(spec, run_seed) == DefectKind::none ? +1 : -1);
        }

        StreamFrame f = gen_stream_frame(spec, schedule, seed, static_cast<int>(i));
        result.presence.push_back(f.presence);
        result.frame_labels.push_back(f.frame_label);
        result.frames.push_back(std::move(f.frame));
    }
    return result;
}

std::vector<FramePhase> bottle_crossing_schedule(int n_frames, std::span<const int> starts) {
    std::vector<FramePhase> schedule(static_cast<size_t>(n_frames), FramePhase::background);
    auto set = [&](int f, FramePhase p) {
        if (f >= 0 && f < n_frames) schedule[static_cast<size_t>(f)] = p;
    };
    for (int s : starts) {
        set(s, FramePhase::entering);
        set(s + 1, FramePhase::entering);
        for (int k = 2; k < 10; ++k) set(s + k, FramePhase::centered);
        set(s + 10, FramePhase::leaving);
        set(s + 11, FramePhase::leaving);
    }
    return schedule;
}

}  // namespace bottlescan
