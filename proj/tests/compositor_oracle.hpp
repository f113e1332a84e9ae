#pragma once

// Brute-force compositing: for every canvas pixel, walk the actors in list
// order and blend any sprite pixel that lands on it.

#include <cmath>
#include <random>

#include "neutrosim/compositor.hpp"

namespace oracle {

using namespace neutrosim;
using namespace neutrosim::comp;

inline long nearest(double v) { return static_cast<long>(std::floor(v + 0.5)); }

inline Image composite(const Scene& s, std::size_t t) {
    Image out = s.background;
    for (std::size_t r = 0; r < out.height; ++r)
        for (std::size_t c = 0; c < out.width; ++c) {
            double v = s.background.at(r, c);
            for (const Actor& a : s.actors) {
                const Sprite& sp = a.evolving.empty() ? a.sprite : a.evolving[t];
                const long n = static_cast<long>(sp.image.height);
                const long top = nearest(a.trajectory.points[t].y - double(n) / 2);
                const long left = nearest(a.trajectory.points[t].x - double(n) / 2);
                const long sr = long(r) - top, sc = long(c) - left;
                if (sr < 0 || sc < 0 || sr >= n || sc >= n) continue;
                const double al = sp.alpha.at(std::size_t(sr), std::size_t(sc));
                v = al * sp.image.at(std::size_t(sr), std::size_t(sc)) + (1 - al) * v;
            }
            out.at(r, c) = v;
        }
    return out;
}

/// True if some actor's sprite box covers pixel (r, c) at frame t.
inline bool covered(const Scene& s, std::size_t t, std::size_t r, std::size_t c) {
    for (const Actor& a : s.actors) {
        const long n = static_cast<long>((a.evolving.empty() ? a.sprite : a.evolving[t]).image.height);
        const long top = nearest(a.trajectory.points[t].y - double(n) / 2);
        const long left = nearest(a.trajectory.points[t].x - double(n) / 2);
        if (long(r) >= top && long(r) < top + n && long(c) >= left && long(c) < left + n) return true;
    }
    return false;
}

inline Sprite random_sprite(std::size_t sz, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Sprite sp{Image(sz, sz), Image(sz, sz)};
    for (double& v : sp.image.pixels) v = u(rng);
    for (double& v : sp.alpha.pixels) v = u(rng) < 0.2 ? (u(rng) < 0.5 ? 0.0 : 1.0) : u(rng);
    return sp;
}

/// Random canvas, 0-5 actors of mixed sizes, paths that wander off the edges.
/// Every third actor carries per-frame sprites of varying size.
inline Scene random_scene(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> dim(8, 40), side(1, 9), count(0, 5), len(1, 6);
    Scene s;
    s.background = make_background(dim(rng), dim(rng), u(rng), 0.2, seed + 1);
    const std::size_t n = count(rng), frames = len(rng);
    s.empty_frames = frames;
    for (std::size_t k = 0; k < n; ++k) {
        Actor a{random_sprite(side(rng), rng), {}, {}};
        if (k % 3 == 2)
            for (std::size_t t = 0; t < frames; ++t) a.evolving.push_back(random_sprite(side(rng), rng));
        a.trajectory.cell_id = "a" + std::to_string(k);
        for (std::size_t t = 0; t < frames; ++t)
            a.trajectory.points.push_back({-10 + (double(s.background.width) + 20) * u(rng),
                                           -10 + (double(s.background.height) + 20) * u(rng)});
        s.actors.push_back(std::move(a));
    }
    return s;
}

}  // namespace oracle
