#include "bottlescan/pgm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

namespace bottlescan {

namespace {

// Skips whitespace and '#' comment lines between header tokens.
int next_header_int(std::istream& in) {
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
        } else if (!std::isspace(c)) {
            in.unget();
            break;
        }
    }
    int value;
    if (!(in >> value)) throw std::runtime_error("pgm: malformed header");
    return value;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pgm: cannot open " + path.string());
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5')
        throw std::runtime_error("pgm: not a P5 file: " + path.string());
    const int width = next_header_int(in);
    const int height = next_header_int(in);
    const int maxval = next_header_int(in);
    if (width <= 0 || height <= 0) throw std::runtime_error("pgm: bad dimensions");
    if (maxval != 255) throw std::runtime_error("pgm: only maxval 255 supported");
    in.get();  // single whitespace after maxval

    std::vector<std::uint8_t> bytes(static_cast<size_t>(width) * height);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw std::runtime_error("pgm: truncated pixel data in " + path.string());

    Image img(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            img(y, x) = bytes[static_cast<size_t>(y) * width + x] / 255.0;
    return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pgm: cannot write " + path.string());
    const auto width = image_width(img);
    const auto height = image_height(img);
    out << "P5\n" << width << " " << height << "\n255\n";
    std::vector<std::uint8_t> bytes(static_cast<size_t>(width * height));
    for (Eigen::Index y = 0; y < height; ++y)
        for (Eigen::Index x = 0; x < width; ++x) {
            const double v = std::clamp(img(y, x), 0.0, 1.0);
            bytes[static_cast<size_t>(y * width + x)] =
                static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("pgm: write failed for " + path.string());
}

}  // namespace bottlescan
