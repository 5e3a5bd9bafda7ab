#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bottlescan/features.hpp"

using namespace bottlescan;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Image random_image(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Image img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img(y, x) = unit(rng);
    return img;
}

double replicate(const Image& img, Eigen::Index y, Eigen::Index x) {
    y = std::clamp<Eigen::Index>(y, 0, img.rows() - 1);
    x = std::clamp<Eigen::Index>(x, 0, img.cols() - 1);
    return img(y, x);
}

// Direct double-loop Sobel convolution with replicate padding.
std::pair<Eigen::ArrayXXd, Eigen::ArrayXXd> sobel_oracle(const Image& img) {
    const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    Eigen::ArrayXXd gx = Eigen::ArrayXXd::Zero(img.rows(), img.cols());
    Eigen::ArrayXXd gy = Eigen::ArrayXXd::Zero(img.rows(), img.cols());
    for (Eigen::Index y = 0; y < img.rows(); ++y)
        for (Eigen::Index x = 0; x < img.cols(); ++x)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const double v = replicate(img, y + dy, x + dx);
                    gx(y, x) += kx[dy + 1][dx + 1] * v;
                    gy(y, x) += ky[dy + 1][dx + 1] * v;
                }
    return {gx, gy};
}

// Naive per-pixel BHoG accumulation oracle.
FeatureVector bhog_oracle(const Image& img, const FeatureSpec& spec) {
    auto [gx, gy] = sobel_oracle(img);
    FeatureVector out = FeatureVector::Zero(spec.rows * spec.cols * spec.n_bins);
    const double delta = kTwoPi / spec.n_bins;
    const auto bh = img.rows() / spec.rows;
    const auto bw = img.cols() / spec.cols;
    for (Eigen::Index y = 0; y < img.rows(); ++y)
        for (Eigen::Index x = 0; x < img.cols(); ++x) {
            const double mag = std::sqrt(gx(y, x) * gx(y, x) + gy(y, x) * gy(y, x));
            double theta = (gx(y, x) == 0.0 && gy(y, x) == 0.0)
                               ? 0.0
                               : std::atan2(gy(y, x), gx(y, x));
            if (theta < 0.0) theta += kTwoPi;
            int bin = std::min<int>(static_cast<int>(theta / delta), spec.n_bins - 1);
            const int br = std::min<int>(static_cast<int>(y / bh), spec.rows - 1);
            const int bc = std::min<int>(static_cast<int>(x / bw), spec.cols - 1);
            out[(br * spec.cols + bc) * spec.n_bins + bin] += mag;
        }
    return out;
}

// Direct quantization path with explicit one-hot columns (no LUT).
FeatureVector bgh_oracle(const Image& img, const FeatureSpec& spec) {
    FeatureVector out = FeatureVector::Zero(spec.rows * spec.cols * spec.n_bins);
    const double delta = 256.0 / spec.n_bins;
    const auto bh = img.rows() / spec.rows;
    const auto bw = img.cols() / spec.cols;
    for (Eigen::Index y = 0; y < img.rows(); ++y)
        for (Eigen::Index x = 0; x < img.cols(); ++x) {
            const int level = static_cast<int>(std::lround(img(y, x) * 255.0));
            const int bin = std::min<int>(static_cast<int>(level / delta), spec.n_bins - 1);
            Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(spec.n_bins);
            one_hot[bin] = 1.0;
            const int br = std::min<int>(static_cast<int>(y / bh), spec.rows - 1);
            const int bc = std::min<int>(static_cast<int>(x / bw), spec.cols - 1);
            out.segment((br * spec.cols + bc) * spec.n_bins, spec.n_bins) += one_hot;
        }
    return out;
}

}  // namespace

TEST_CASE("sobel on a constant image is zero") {
    auto [gx, gy] = sobel_gradients(Image::Constant(9, 9, 0.37));
    CHECK(gx.abs().maxCoeff() == doctest::Approx(0.0));
    CHECK(gy.abs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("sobel on a horizontal unit ramp") {
    const int w = 17;
    Image img(9, w);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < w; ++x) img(y, x) = static_cast<double>(x) / (w - 1);
    auto [gx, gy] = sobel_gradients(img);
    for (int y = 1; y < 8; ++y)
        for (int x = 1; x < w - 1; ++x) {
            CHECK(gx(y, x) == doctest::Approx(8.0 / (w - 1)).epsilon(1e-9));
            CHECK(gy(y, x) == doctest::Approx(0.0));
        }
}

TEST_CASE("sobel matches direct convolution oracle") {
    for (int i = 0; i < 5; ++i) {
        const Image img = random_image(9, 9, 40 + i);
        auto [gx, gy] = sobel_gradients(img);
        auto [ox, oy] = sobel_oracle(img);
        CHECK((gx - ox).abs().maxCoeff() < 1e-9);
        CHECK((gy - oy).abs().maxCoeff() < 1e-9);
    }
    CHECK_THROWS_AS(sobel_gradients(Image::Zero(2, 5)), std::invalid_argument);
}

TEST_CASE("gradient_polar basics") {
    Eigen::ArrayXXd gx(1, 3), gy(1, 3);
    gx << 3.0, 1.0, 0.0;
    gy << 4.0, 0.0, 1.0;
    const GradientField f = gradient_polar(gx, gy);
    CHECK(f.magnitude(0, 0) == doctest::Approx(5.0));
    CHECK(f.orientation(0, 1) == doctest::Approx(0.0));
    CHECK(f.orientation(0, 2) == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("gradient_polar zero gradient has orientation 0") {
    Eigen::ArrayXXd z = Eigen::ArrayXXd::Zero(2, 2);
    const GradientField f = gradient_polar(z, z);
    CHECK(f.orientation.maxCoeff() == 0.0);
    CHECK(f.magnitude.maxCoeff() == 0.0);
}

TEST_CASE("gradient_polar magnitude identity and orientation range") {
    const Image img = random_image(16, 16, 50);
    auto [gx, gy] = sobel_gradients(img);
    const GradientField f = gradient_polar(gx, gy);
    CHECK((f.magnitude.square() - (f.gx.square() + f.gy.square())).abs().maxCoeff() < 1e-6);
    CHECK(f.orientation.minCoeff() >= 0.0);
    CHECK(f.orientation.maxCoeff() < kTwoPi);
}

TEST_CASE("bhog constant image gives a zero vector of the right dim") {
    const FeatureSpec spec{FeatureKind::BHoG, 3, 4, 5, 1.0};
    const FeatureVector v = bhog(Image::Constant(30, 40, 0.5), spec);
    CHECK(v.size() == 3 * 4 * 5);
    CHECK(v.maxCoeff() == 0.0);
}

TEST_CASE("bhog dim for the 11x11x9 default on the ROI") {
    const FeatureSpec spec{FeatureKind::BHoG, 11, 11, 9, 1.0};
    CHECK(spec.dim(356, 150) == 1089);
}

TEST_CASE("bhog equals brute-force oracle") {
    std::mt19937_64 rng(60);
    std::uniform_int_distribution<int> grid(1, 4);
    for (int i = 0; i < 8; ++i) {
        const Image img = random_image(20, 20, 600 + i);
        const FeatureSpec spec{FeatureKind::BHoG, grid(rng), grid(rng), 4, 1.0};
        const FeatureVector got = bhog(img, spec);
        const FeatureVector want = bhog_oracle(img, spec);
        CHECK((got - want).norm() <= 1e-6 * (1.0 + want.norm()));
    }
}

TEST_CASE("bhog mass conservation and offset invariance") {
    const Image img = random_image(33, 27, 61);
    const FeatureSpec spec{FeatureKind::BHoG, 3, 3, 9, 1.0};
    auto [gx, gy] = sobel_gradients(img);
    const GradientField f = gradient_polar(gx, gy);
    const FeatureVector v = bhog(img, spec);
    CHECK(v.sum() == doctest::Approx(f.magnitude.sum()).epsilon(1e-6));

    const Image shifted = (img * 0.5) + 0.25;  // affine intensity change kills nothing
    const FeatureVector offset = bhog(Image(img.min(0.7) + 0.3), spec);
    const FeatureVector base = bhog(Image(img.min(0.7)), spec);
    CHECK((offset - base).cwiseAbs().maxCoeff() < 1e-6);
    (void)shifted;
}

TEST_CASE("bhog rejects a grid larger than the image") {
    const FeatureSpec spec{FeatureKind::BHoG, 30, 30, 4, 1.0};
    CHECK_THROWS_AS(bhog(random_image(10, 10, 62), spec), std::invalid_argument);
}

TEST_CASE("build_lut edges") {
    const HistogramLUT identity = build_lut(256);
    for (int v = 0; v < 256; ++v) CHECK(identity.table[v] == v);

    const HistogramLUT halves = build_lut(2);
    CHECK(halves.table[127] == 0);
    CHECK(halves.table[128] == 1);

    const HistogramLUT lut16 = build_lut(16);
    CHECK(lut16.table[0] == 0);
    CHECK(lut16.table[255] == 15);

    CHECK_THROWS_AS(build_lut(1), std::invalid_argument);
    CHECK_THROWS_AS(build_lut(300), std::invalid_argument);
}

TEST_CASE("lut equals floor division for all power-of-two bin counts") {
    for (int n_bins : {2, 4, 8, 16, 32, 64, 128, 256}) {
        const HistogramLUT lut = build_lut(n_bins);
        for (int v = 0; v < 256; ++v)
            CHECK(lut.table[v] == static_cast<int>(v / (256.0 / n_bins)));
    }
}

TEST_CASE("bgh single gray level and mass conservation") {
    const FeatureSpec spec{FeatureKind::BGH, 2, 2, 16, 1.0};
    const HistogramLUT lut = build_lut(16);
    const double g = 0.42;
    const FeatureVector v = bgh(Image::Constant(20, 20, g), spec, lut);
    const int bin = lut.table[static_cast<int>(std::lround(g * 255.0))];
    for (int block = 0; block < 4; ++block) {
        CHECK(v[block * 16 + bin] == doctest::Approx(100.0));
        CHECK(v.segment(block * 16, 16).sum() == doctest::Approx(100.0));
    }
    CHECK(v.sum() == doctest::Approx(400.0));
}

TEST_CASE("bgh LUT path equals direct one-hot path exactly") {
    std::mt19937_64 rng(70);
    std::uniform_int_distribution<int> grid(1, 3);
    for (int i = 0; i < 30; ++i) {
        const Image img = random_image(24, 18, 700 + i);
        const FeatureSpec spec{FeatureKind::BGH, grid(rng), grid(rng), 16, 1.0};
        const FeatureVector got = bgh(img, spec, build_lut(spec.n_bins));
        const FeatureVector want = bgh_oracle(img, spec);
        CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("bgh block-local pixel permutation invariance") {
    const Image img = random_image(20, 20, 71);
    const FeatureSpec spec{FeatureKind::BGH, 2, 2, 8, 1.0};
    const HistogramLUT lut = build_lut(8);
    const FeatureVector base = bgh(img, spec, lut);

    Image permuted = img;  // swap pixels inside the top-left 10x10 block
    std::swap(permuted(0, 0), permuted(9, 9));
    std::swap(permuted(3, 4), permuted(7, 2));
    const FeatureVector after = bgh(permuted, spec, lut);
    CHECK((base - after).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("raw_feature identity at scale 1") {
    const Image img = random_image(7, 9, 80);
    const FeatureSpec spec{FeatureKind::Raw, 1, 1, 2, 1.0};
    const FeatureVector v = raw_feature(img, spec);
    CHECK(v.size() == 63);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x) CHECK(v[y * 9 + x] == img(y, x));
}

TEST_CASE("raw_feature dims at the paper ROI and scale 0.6") {
    const FeatureSpec spec{FeatureKind::Raw, 1, 1, 2, 0.6};
    CHECK(spec.dim(356, 150) == 213 * 90);
}

TEST_CASE("raw_feature constant image stays constant") {
    const FeatureSpec spec{FeatureKind::Raw, 1, 1, 2, 0.37};
    const FeatureVector v = raw_feature(Image::Constant(50, 40, 0.66), spec);
    CHECK(v.minCoeff() == doctest::Approx(0.66));
    CHECK(v.maxCoeff() == doctest::Approx(0.66));
}

TEST_CASE("extract dispatches by kind and is deterministic") {
    const Image img = random_image(30, 30, 90);
    const FeatureSpec hog{FeatureKind::BHoG, 2, 2, 9, 1.0};
    const FeatureSpec gray{FeatureKind::BGH, 2, 2, 8, 1.0};
    const FeatureSpec raw{FeatureKind::Raw, 1, 1, 2, 0.5};

    CHECK(extract(img, hog) == bhog(img, hog));
    CHECK(extract(img, gray) == bgh(img, gray, build_lut(8)));
    CHECK(extract(img, raw) == raw_feature(img, raw));
    CHECK(extract(img, hog) == extract(img, hog));
}
