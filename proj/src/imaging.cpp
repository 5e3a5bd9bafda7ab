#include "bottlescan/imaging.hpp"

namespace bottlescan {

void TriggerConfig::validate() const {
    if (patches.empty()) throw std::invalid_argument("trigger config: no patches");
    if (theta_thres < 0.0) throw std::invalid_argument("trigger config: theta_thres < 0");
    if (n_background_frames < 1)
        throw std::invalid_argument("trigger config: n_background_frames < 1");
    for (const auto& p : patches)
        if (p.w < 1 || p.h < 1) throw std::invalid_argument("trigger config: empty patch");
}

Image mean_background(std::span<const Image> frames) {
    if (frames.empty()) throw std::invalid_argument("mean_background: no frames");
    const auto rows = frames[0].rows();
    const auto cols = frames[0].cols();
    Image acc = Image::Zero(rows, cols);
    for (const auto& f : frames) {
        if (f.rows() != rows || f.cols() != cols)
            throw std::invalid_argument("mean_background: dimension mismatch");
        acc += f;
    }
    return acc / static_cast<double>(frames.size());
}

double patch_energy(const Image& bg, const Image& cur, const Patch& p) {
    if (bg.rows() != cur.rows() || bg.cols() != cur.cols())
        throw std::invalid_argument("patch_energy: dimension mismatch");
    require_patch_inside(bg, p, "patch_energy");
    return (bg.block(p.y, p.x, p.h, p.w) - cur.block(p.y, p.x, p.h, p.w)).abs().sum();
}

int bottle_present(const Image& bg, const Image& cur, const TriggerConfig& cfg) {
    cfg.validate();
    for (const auto& p : cfg.patches) {
        // Ties at the threshold count as absent.
        if (patch_energy(bg, cur, p) <= cfg.theta_thres) return 0;
    }
    return 1;
}

bool trigger_edge(TriggerState& state, int s_b) {
    const bool fire = (state.prev == 0 && s_b == 1);
    state.prev = s_b;
    return fire;
}

Image normalize_gray_mean(const Image& img, double lambda_avg) {
    if (!(lambda_avg > 0.0 && lambda_avg < 1.0))
        throw std::invalid_argument("normalize_gray_mean: lambda_avg outside (0,1)");
    const double total = img.sum();
    if (total <= 0.0) throw degenerate_frame_error();
    const double scale = lambda_avg * static_cast<double>(img.size()) / total;
    return (img * scale).min(1.0).max(0.0);
}

Image crop_roi(const Image& img, const Patch& p) {
    require_patch_inside(img, p, "crop_roi");
    return img.block(p.y, p.x, p.h, p.w);
}

}  // namespace bottlescan
