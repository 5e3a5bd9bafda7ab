#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "bottlescan/image.hpp"

namespace bottlescan {

using FeatureVector = Eigen::VectorXd;

enum class FeatureKind { BHoG, BGH, Raw };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& s);

// Declarative extractor configuration. rows/cols/n_bins apply to the
// histogram kinds, scale to Raw.
struct FeatureSpec {
    FeatureKind kind = FeatureKind::BHoG;
    int rows = 1;
    int cols = 1;
    int n_bins = 9;
    double scale = 1.0;

    void validate() const;
    Eigen::Index dim(Eigen::Index img_height, Eigen::Index img_width) const;
    std::string name() const;
};

// Sobel responses plus their polar form; orientation lies in [0, 2pi).
struct GradientField {
    Eigen::ArrayXXd gx;
    Eigen::ArrayXXd gy;
    Eigen::ArrayXXd magnitude;
    Eigen::ArrayXXd orientation;
};

// 8-bit gray level -> histogram bin index, fixed once built.
struct HistogramLUT {
    int n_bins = 0;
    std::array<std::uint8_t, 256> table{};
};

// 3x3 Sobel convolution with replicate-edge padding; output sizes match input.
std::pair<Eigen::ArrayXXd, Eigen::ArrayXXd> sobel_gradients(const Image& img);

GradientField gradient_polar(const Eigen::ArrayXXd& gx, const Eigen::ArrayXXd& gy);

// table[v] = floor(v * n_bins / 256).
HistogramLUT build_lut(int n_bins);

FeatureVector bhog(const Image& img, const FeatureSpec& spec);
FeatureVector bgh(const Image& img, const FeatureSpec& spec, const HistogramLUT& lut);
FeatureVector raw_feature(const Image& img, const FeatureSpec& spec);

// Dispatch over the three extractors (builds the LUT for BGH).
FeatureVector extract(const Image& img, const FeatureSpec& spec);

}  // namespace bottlescan
