#pragma once

#include <span>
#include <vector>

#include "bottlescan/image.hpp"

namespace bottlescan {

// Soft-trigger configuration: difference patches, energy threshold and
// the number of frames averaged into the background estimate.
struct TriggerConfig {
    std::vector<Patch> patches;
    double theta_thres = 0.0;
    int n_background_frames = 1;

    void validate() const;
};

// Rising-edge latch for the presence signal.
struct TriggerState {
    int prev = 0;
};

// Thrown by normalize_gray_mean on an all-black frame; callers skip the frame.
struct degenerate_frame_error : std::runtime_error {
    degenerate_frame_error() : std::runtime_error("degenerate frame: zero intensity sum") {}
};

// Per-pixel mean of same-sized frames.
Image mean_background(std::span<const Image> frames);

// Sum of absolute per-pixel differences over one patch.
double patch_energy(const Image& bg, const Image& cur, const Patch& p);

// 1 iff every patch's energy strictly exceeds theta_thres, else 0.
int bottle_present(const Image& bg, const Image& cur, const TriggerConfig& cfg);

// fire = prev was 0 and s_b is 1; state updated to s_b.
bool trigger_edge(TriggerState& state, int s_b);

// Rescales so the unclamped mean equals lambda_avg, then clamps into [0,1].
Image normalize_gray_mean(const Image& img, double lambda_avg = 0.5);

// Copy of the sub-image covered by p.
Image crop_roi(const Image& img, const Patch& p);

}  // namespace bottlescan
