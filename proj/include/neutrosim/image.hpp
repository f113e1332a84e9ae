#pragma once

// Grayscale raster in [0, 1] shared by the latent-walk grid and the
// compositor, plus binary PGM (P5, maxval 255) I/O.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "neutrosim/error.hpp"

namespace neutrosim {

struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;  // row-major

    Image() = default;
    Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}

    double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
    double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }

    bool in_unit_range() const {
        return std::all_of(pixels.begin(), pixels.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
    }

    friend bool operator==(const Image&, const Image&) = default;
};

inline std::uint8_t to_level(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline void write_pgm(const Image& img, std::ostream& out) {
    if (!img.in_unit_range()) throw InvalidArgument("image", "pixel outside [0, 1]");
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    std::string row(img.width, '\0');
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) row[c] = static_cast<char>(to_level(img.at(r, c)));
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw FormatError("image", "write failed");
}

inline void write_pgm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("image", "cannot open " + path + " for writing");
    write_pgm(img, out);
}

/// Reads P5 with maxval 255. Comments in the header are not supported.
inline Image read_pgm(std::istream& in) {
    std::string magic;
    std::size_t w = 0, h = 0;
    int maxval = 0;
    if (!(in >> magic >> w >> h >> maxval) || magic != "P5" || maxval != 255)
        throw FormatError("image", "malformed PGM header");
    if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16))
        throw FormatError("image", "unsupported PGM size");
    in.get();  // single whitespace before the raster
    std::string raw(w * h, '\0');
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw FormatError("image", "truncated PGM raster");
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("image", "trailing bytes after PGM raster");
    Image img(h, w);
    for (std::size_t i = 0; i < raw.size(); ++i)
        img.pixels[i] = static_cast<unsigned char>(raw[i]) / 255.0;
    return img;
}

inline Image read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("image", "cannot open " + path);
    return read_pgm(in);
}

}  // namespace neutrosim
