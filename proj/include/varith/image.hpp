#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "varith/error.hpp"
#include "varith/rng.hpp"

namespace varith {

// Grayscale image, row-major, intensities in [0, 1].
struct Image {
    int rows = 0;
    int cols = 0;
    std::vector<double> pixels;

    double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * cols + c]; }
    int size() const { return rows * cols; }

    bool operator==(const Image& o) const {
        return rows == o.rows && cols == o.cols && pixels == o.pixels;
    }
};

inline Image new_image(int rows, int cols, double fill) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("new_image: dimensions must be positive");
    if (fill < 0.0 || fill > 1.0)
        throw std::invalid_argument("new_image: fill must be in [0,1]");
    Image img;
    img.rows = rows;
    img.cols = cols;
    img.pixels.assign(static_cast<std::size_t>(rows) * cols, fill);
    return img;
}

// Per-pixel additive N(0, sigma^2), clamped back into [0, 1].
inline Image add_gaussian_noise(const Image& img, double sigma, Rng& rng) {
    if (sigma < 0.0)
        throw std::invalid_argument("add_gaussian_noise: sigma must be nonnegative");
    Image out = img;
    if (sigma == 0.0) return out;
    for (double& p : out.pixels)
        p = std::clamp(p + rng.normal(0.0, sigma), 0.0, 1.0);
    return out;
}

// Mean per-pixel squared difference.
inline double mse(const Image& a, const Image& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("mse: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.pixels.size());
}

// Binary PGM (P5), maxval 255. Pixel byte = round(intensity * 255).
inline void write_pgm(const Image& img, const std::string& path) {
    if (img.rows < 1 || img.cols < 1)
        throw std::invalid_argument("write_pgm: empty image");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_pgm: cannot open " + path);
    f << "P5\n" << img.cols << " " << img.rows << "\n255\n";
    std::vector<unsigned char> bytes(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const double v = std::clamp(img.pixels[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write_pgm: write failed for " + path);
}

inline Image read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_pgm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw FormatError("read_pgm: not a binary PGM (P5): " + path);
    long long cols = 0, rows = 0, maxval = 0;
    f >> cols >> rows >> maxval;
    if (!f || cols < 1 || rows < 1)
        throw FormatError("read_pgm: malformed header: " + path);
    if (maxval != 255)
        throw FormatError("read_pgm: unsupported maxval (expected 255): " + path);
    f.get();  // single whitespace after maxval
    Image img = new_image(static_cast<int>(rows), static_cast<int>(cols), 0.0);
    std::vector<unsigned char> bytes(img.pixels.size());
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (f.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw FormatError("read_pgm: truncated pixel data: " + path);
    for (std::size_t i = 0; i < bytes.size(); ++i)
        img.pixels[i] = bytes[i] / 255.0;
    return img;
}

}  // namespace varith
