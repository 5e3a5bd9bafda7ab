#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace bottlescan {

// Grayscale raster, intensities in [0,1]. Stored as (height x width),
// so img(y, x) addresses the pixel at column x, row y.
using Image = Eigen::ArrayXXd;

inline Eigen::Index image_width(const Image& img) { return img.cols(); }
inline Eigen::Index image_height(const Image& img) { return img.rows(); }

// Axis-aligned rectangle, top-left corner (x, y), size w x h.
struct Patch {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool inside(const Image& img) const {
        return x >= 0 && y >= 0 && w >= 1 && h >= 1 &&
               x + w <= image_width(img) && y + h <= image_height(img);
    }
    long area() const { return static_cast<long>(w) * h; }
};

inline void require_patch_inside(const Image& img, const Patch& p, const char* what) {
    if (!p.inside(img))
        throw std::invalid_argument(std::string(what) + ": patch [" +
                                    std::to_string(p.x) + "," + std::to_string(p.y) + "," +
                                    std::to_string(p.w) + "," + std::to_string(p.h) +
                                    "] out of bounds for " + std::to_string(image_width(img)) +
                                    "x" + std::to_string(image_height(img)) + " image");
}

inline bool image_values_valid(const Image& img) {
    return img.isFinite().all() && (img >= 0.0).all() && (img <= 1.0).all();
}

}  // namespace bottlescan
