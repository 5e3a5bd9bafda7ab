#include "bottlescan/features.hpp"

#include <cmath>
#include <numbers>

namespace bottlescan {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Near-equal block partition: the final row/column of blocks absorbs the
// remainder so every pixel is counted exactly once.
struct BlockGrid {
    int rows, cols;
    Eigen::Index block_h, block_w;
    Eigen::Index img_h, img_w;

    BlockGrid(const Image& img, int rows_, int cols_)
        : rows(rows_), cols(cols_), img_h(img.rows()), img_w(img.cols()) {
        if (rows < 1 || cols < 1) throw std::invalid_argument("block grid: empty grid");
        if (img_h < rows || img_w < cols)
            throw std::invalid_argument("block grid: grid larger than image");
        block_h = img_h / rows;
        block_w = img_w / cols;
    }

    int block_of(Eigen::Index y, Eigen::Index x) const {
        int br = static_cast<int>(y / block_h);
        int bc = static_cast<int>(x / block_w);
        if (br >= rows) br = rows - 1;
        if (bc >= cols) bc = cols - 1;
        return br * cols + bc;
    }
};

}  // namespace

std::string to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::BHoG: return "bhog";
        case FeatureKind::BGH: return "bgh";
        case FeatureKind::Raw: return "raw";
    }
    throw std::logic_error("unknown feature kind");
}

FeatureKind feature_kind_from_string(const std::string& s) {
    if (s == "bhog") return FeatureKind::BHoG;
    if (s == "bgh") return FeatureKind::BGH;
    if (s == "raw") return FeatureKind::Raw;
    throw std::invalid_argument("unknown feature kind: " + s);
}

void FeatureSpec::validate() const {
    if (kind == FeatureKind::Raw) {
        if (!(scale > 0.0 && scale <= 1.0))
            throw std::invalid_argument("feature spec: raw scale outside (0,1]");
        return;
    }
    if (rows < 1 || cols < 1) throw std::invalid_argument("feature spec: empty grid");
    if (n_bins < 2) throw std::invalid_argument("feature spec: n_bins < 2");
}

Eigen::Index FeatureSpec::dim(Eigen::Index img_height, Eigen::Index img_width) const {
    validate();
    if (kind == FeatureKind::Raw) {
        const auto m = static_cast<Eigen::Index>(scale * static_cast<double>(img_height));
        const auto n = static_cast<Eigen::Index>(scale * static_cast<double>(img_width));
        return m * n;
    }
    return static_cast<Eigen::Index>(rows) * cols * n_bins;
}

std::string FeatureSpec::name() const {
    if (kind == FeatureKind::Raw) return "raw:" + std::to_string(scale);
    return to_string(kind) + ":" + std::to_string(rows) + "x" + std::to_string(cols) + "x" +
           std::to_string(n_bins);
}

std::pair<Eigen::ArrayXXd, Eigen::ArrayXXd> sobel_gradients(const Image& img) {
    const auto h = img.rows();
    const auto w = img.cols();
    if (h < 3 || w < 3) throw std::invalid_argument("sobel_gradients: image smaller than 3x3");

    Eigen::ArrayXXd gx(h, w);
    Eigen::ArrayXXd gy(h, w);
    auto at = [&](Eigen::Index y, Eigen::Index x) {
        // Replicate-edge padding.
        if (y < 0) y = 0;
        if (y >= h) y = h - 1;
        if (x < 0) x = 0;
        if (x >= w) x = w - 1;
        return img(y, x);
    };
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            const double a = at(y - 1, x - 1), b = at(y - 1, x), c = at(y - 1, x + 1);
            const double d = at(y, x - 1), f = at(y, x + 1);
            const double g = at(y + 1, x - 1), i = at(y + 1, x), j = at(y + 1, x + 1);
            gx(y, x) = (c + 2.0 * f + j) - (a + 2.0 * d + g);
            gy(y, x) = (g + 2.0 * i + j) - (a + 2.0 * b + c);
        }
    }
    return {gx, gy};
}

GradientField gradient_polar(const Eigen::ArrayXXd& gx, const Eigen::ArrayXXd& gy) {
    if (gx.rows() != gy.rows() || gx.cols() != gy.cols())
        throw std::invalid_argument("gradient_polar: size mismatch");
    GradientField field;
    field.gx = gx;
    field.gy = gy;
    field.magnitude = (gx.square() + gy.square()).sqrt();
    field.orientation.resize(gx.rows(), gx.cols());
    for (Eigen::Index y = 0; y < gx.rows(); ++y) {
        for (Eigen::Index x = 0; x < gx.cols(); ++x) {
            if (gx(y, x) == 0.0 && gy(y, x) == 0.0) {
                field.orientation(y, x) = 0.0;
                continue;
            }
            double theta = std::atan2(gy(y, x), gx(y, x));
            if (theta < 0.0) theta += kTwoPi;
            if (theta >= kTwoPi) theta = 0.0;
            field.orientation(y, x) = theta;
        }
    }
    return field;
}

HistogramLUT build_lut(int n_bins) {
    if (n_bins < 2 || n_bins > 256)
        throw std::invalid_argument("build_lut: n_bins outside [2,256]");
    HistogramLUT lut;
    lut.n_bins = n_bins;
    for (int v = 0; v < 256; ++v) {
        int bin = v * n_bins / 256;
        if (bin > n_bins - 1) bin = n_bins - 1;
        lut.table[static_cast<size_t>(v)] = static_cast<std::uint8_t>(bin);
    }
    return lut;
}

FeatureVector bhog(const Image& img, const FeatureSpec& spec) {
    if (spec.kind != FeatureKind::BHoG) throw std::invalid_argument("bhog: wrong spec kind");
    spec.validate();
    const BlockGrid grid(img, spec.rows, spec.cols);

    auto [gx, gy] = sobel_gradients(img);
    const GradientField field = gradient_polar(gx, gy);
    const double delta_theta = kTwoPi / spec.n_bins;

    FeatureVector out = FeatureVector::Zero(spec.dim(img.rows(), img.cols()));
    for (Eigen::Index y = 0; y < img.rows(); ++y) {
        for (Eigen::Index x = 0; x < img.cols(); ++x) {
            int bin = static_cast<int>(field.orientation(y, x) / delta_theta);
            if (bin > spec.n_bins - 1) bin = spec.n_bins - 1;
            out[static_cast<Eigen::Index>(grid.block_of(y, x)) * spec.n_bins + bin] +=
                field.magnitude(y, x);
        }
    }
    return out;
}

FeatureVector bgh(const Image& img, const FeatureSpec& spec, const HistogramLUT& lut) {
    if (spec.kind != FeatureKind::BGH) throw std::invalid_argument("bgh: wrong spec kind");
    spec.validate();
    if (lut.n_bins != spec.n_bins) throw std::invalid_argument("bgh: LUT bin count mismatch");
    const BlockGrid grid(img, spec.rows, spec.cols);

    FeatureVector out = FeatureVector::Zero(spec.dim(img.rows(), img.cols()));
    for (Eigen::Index y = 0; y < img.rows(); ++y) {
        for (Eigen::Index x = 0; x < img.cols(); ++x) {
            const auto level = static_cast<int>(std::lround(img(y, x) * 255.0));
            const int bin = lut.table[static_cast<size_t>(std::clamp(level, 0, 255))];
            out[static_cast<Eigen::Index>(grid.block_of(y, x)) * spec.n_bins + bin] += 1.0;
        }
    }
    return out;
}

FeatureVector raw_feature(const Image& img, const FeatureSpec& spec) {
    if (spec.kind != FeatureKind::Raw) throw std::invalid_argument("raw_feature: wrong spec kind");
    spec.validate();
    const auto h = img.rows();
    const auto w = img.cols();
    const auto m = static_cast<Eigen::Index>(spec.scale * static_cast<double>(h));
    const auto n = static_cast<Eigen::Index>(spec.scale * static_cast<double>(w));
    if (m < 1 || n < 1) throw std::invalid_argument("raw_feature: degenerate target size");

    // Each output pixel averages its source cell; cell edges partition the
    // image so every source pixel contributes to exactly one output pixel.
    FeatureVector out(m * n);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto y0 = i * h / m;
        const auto y1 = (i + 1) * h / m;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto x0 = j * w / n;
            const auto x1 = (j + 1) * w / n;
            out[i * n + j] = img.block(y0, x0, y1 - y0, x1 - x0).mean();
        }
    }
    return out;
}

FeatureVector extract(const Image& img, const FeatureSpec& spec) {
    switch (spec.kind) {
        case FeatureKind::BHoG: return bhog(img, spec);
        case FeatureKind::BGH: return bgh(img, spec, build_lut(spec.n_bins));
        case FeatureKind::Raw: return raw_feature(img, spec);
    }
    throw std::logic_error("extract: unknown feature kind");
}

}  // namespace bottlescan
