#pragma once

// Two-stream fusion: generated sprites pasted along synthesized trajectories
// over a stationary background, exported as PGM frame sequences.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "neutrosim/error.hpp"
#include "neutrosim/gan.hpp"
#include "neutrosim/image.hpp"
#include "neutrosim/trajectory.hpp"

namespace neutrosim::comp {

struct Sprite {
    Image image;  // s x s, values in [0, 1]
    Image alpha;  // s x s, values in [0, 1]
};

struct Actor {
    Sprite sprite;
    Trajectory trajectory;  // x is the column axis, y the row axis
    std::vector<Sprite> evolving;  // one sprite per frame; empty keeps `sprite` rigid

    const Sprite& at(std::size_t t) const { return evolving.empty() ? sprite : evolving[t]; }
};

struct Scene {
    Image background;
    std::vector<Actor> actors;
    double frame_rate = 20.0;
    std::size_t empty_frames = 1;  // duration of a scene without actors

    std::size_t duration() const { return actors.empty() ? empty_frames : actors.front().trajectory.size(); }

    void validate() const {
        if (background.height == 0 || background.width == 0)
            throw InvalidArgument("compositor", "empty background");
        if (background.pixels.size() != background.height * background.width)
            throw InvalidArgument("compositor", "background size mismatch");
        if (!background.in_unit_range()) throw InvalidArgument("compositor", "background pixel outside [0, 1]");
        if (!(frame_rate > 0)) throw InvalidArgument("compositor", "frame rate must be positive");
        for (std::size_t i = 0; i < actors.size(); ++i) {
            const Actor& a = actors[i];
            const std::string who = "actor " + std::to_string(i);
            check_sprite(a.sprite, who);
            if (a.trajectory.size() != actors.front().trajectory.size())
                throw InvalidArgument("compositor", who + ": trajectory length differs from actor 0");
            if (!a.evolving.empty() && a.evolving.size() != a.trajectory.size())
                throw InvalidArgument("compositor", who + ": evolving sprite count differs from trajectory length");
            for (const Sprite& sp : a.evolving) check_sprite(sp, who);
            for (const Point2& p : a.trajectory.points)
                if (!std::isfinite(p.x) || !std::isfinite(p.y))
                    throw NumericError("compositor", who + ": non-finite trajectory point");
        }
    }

    static void check_sprite(const Sprite& sp, const std::string& who) {
        const Image& s = sp.image;
        const Image& m = sp.alpha;
        if (s.height != s.width || s.height == 0 || s.pixels.size() != s.height * s.width)
            throw InvalidArgument("compositor", who + ": sprite must be a non-empty square");
        if (m.height != s.height || m.width != s.width || m.pixels.size() != s.pixels.size())
            throw InvalidArgument("compositor", who + ": alpha mask size differs from sprite");
        if (!s.in_unit_range()) throw InvalidArgument("compositor", who + ": sprite pixel outside [0, 1]");
        if (!m.in_unit_range()) throw InvalidArgument("compositor", who + ": alpha outside [0, 1]");
    }
};

/// Top-left pixel of an s-wide sprite centered at continuous coordinate c:
/// nearest integer to c - s/2, halves rounded up.
inline long sprite_origin(double c, std::size_t s) {
    return static_cast<long>(std::floor(c - static_cast<double>(s) / 2.0 + 0.5));
}

/// Composites `sprite` with its top-left corner at (row0, col0), cropping
/// to the canvas.
inline void paste(Image& canvas, const Sprite& sprite, long row0, long col0) {
    const long s = static_cast<long>(sprite.image.height);
    const long H = static_cast<long>(canvas.height), W = static_cast<long>(canvas.width);
    const long r_lo = std::max(0L, -row0), r_hi = std::min(s, H - row0);
    const long c_lo = std::max(0L, -col0), c_hi = std::min(s, W - col0);
    for (long r = r_lo; r < r_hi; ++r)
        for (long c = c_lo; c < c_hi; ++c) {
            const double a = sprite.alpha.at(std::size_t(r), std::size_t(c));
            double& under = canvas.at(std::size_t(row0 + r), std::size_t(col0 + c));
            under = a * sprite.image.at(std::size_t(r), std::size_t(c)) + (1 - a) * under;
        }
}

inline Image render_frame(const Scene& scene, std::size_t t) {
    scene.validate();
    if (t >= scene.duration())
        throw InvalidArgument("compositor", "frame " + std::to_string(t) + " out of range (duration " +
                                                std::to_string(scene.duration()) + ")");
    Image out = scene.background;
    for (const Actor& a : scene.actors) {
        const Point2& p = a.trajectory.points[t];
        const Sprite& sp = a.at(t);
        const std::size_t s = sp.image.height;
        paste(out, sp, sprite_origin(p.y, s), sprite_origin(p.x, s));
    }
    return out;
}

inline std::vector<Image> render_sequence(const Scene& scene) {
    std::vector<Image> frames;
    frames.reserve(scene.duration());
    for (std::size_t t = 0; t < scene.duration(); ++t) frames.push_back(render_frame(scene, t));
    return frames;
}

/// Sprite from G(z): output mapped from [-1, 1] to [0, 1] and a soft alpha
/// mask clamp((v - threshold) / (1 - threshold), 0, 1).
inline Sprite sprite_from_generator(const gan::NetworkParams& g, const Tensor& z, double threshold) {
    if (!(threshold >= 0 && threshold < 1))
        throw InvalidArgument("compositor", "alpha threshold must lie in [0, 1)");
    const Tensor out = gan::generate(g, z.reshaped(Shape{1, z.size()}));
    const std::size_t s = static_cast<std::size_t>(std::lround(std::sqrt(double(out.size()))));
    if (s * s != out.size()) throw InvalidArgument("compositor", "generator output is not a square image");
    Sprite sp{Image(s, s), Image(s, s)};
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = std::clamp((out[i] + 1) / 2, 0.0, 1.0);
        sp.image.pixels[i] = v;
        sp.alpha.pixels[i] = std::clamp((v - threshold) / (1 - threshold), 0.0, 1.0);
    }
    return sp;
}

/// Per-frame sprites along the straight latent path z0 -> z1, n frames,
/// both endpoints included.
inline std::vector<Sprite> sprite_walk(const gan::NetworkParams& g, const Tensor& z0, const Tensor& z1,
                                       std::size_t n, double threshold) {
    if (z0.shape() != z1.shape()) throw InvalidArgument("compositor", "latent endpoints differ in shape");
    std::vector<Sprite> out;
    out.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        if (t + 1 == n && n > 1) {
            out.push_back(sprite_from_generator(g, z1, threshold));
            continue;
        }
        const double a = n > 1 ? double(t) / double(n - 1) : 0.0;
        Tensor z(z0.shape());
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = (1 - a) * z0[i] + a * z1[i];
        out.push_back(sprite_from_generator(g, z, threshold));
    }
    return out;
}

/// Stationary background: a constant level plus fixed per-pixel noise,
/// clamped to [0, 1].
inline Image make_background(std::size_t height, std::size_t width, double level, double noise,
                             std::uint64_t seed) {
    Image img(height, width, level);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    if (noise > 0)
        for (double& v : img.pixels) v = std::clamp(level + noise * normal(rng), 0.0, 1.0);
    return img;
}

inline std::string frame_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%05zu.pgm", i);
    return buf;
}

/// Writes frame_%05d.pgm files and an index.txt listing the frame rate,
/// frame count and file names.
inline void write_frames(const std::vector<Image>& frames, double frame_rate, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path root(dir);
    std::ofstream index(root / "index.txt");
    if (!index) throw FormatError("compositor", "cannot write index in " + dir);
    index << "fps " << frame_rate << "\nframes " << frames.size() << '\n';
    for (std::size_t i = 0; i < frames.size(); ++i) {
        write_pgm(frames[i], (root / frame_name(i)).string());
        index << frame_name(i) << '\n';
    }
}

struct FrameIndex {
    double frame_rate = 0;
    std::vector<std::string> files;
};

inline FrameIndex read_frame_index(const std::string& dir) {
    std::ifstream in(std::filesystem::path(dir) / "index.txt");
    if (!in) throw FormatError("compositor", "cannot open index in " + dir);
    FrameIndex idx;
    std::string key;
    std::size_t n = 0;
    if (!(in >> key >> idx.frame_rate) || key != "fps" || !(in >> key >> n) || key != "frames")
        throw FormatError("compositor", "malformed frame index");
    std::string name;
    while (in >> name) idx.files.push_back(name);
    if (idx.files.size() != n) throw FormatError("compositor", "frame index lists a different count");
    return idx;
}

}  // namespace neutrosim::comp
