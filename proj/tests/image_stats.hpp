#pragma once

// Distribution moments of blob-like image batches, used as the oracle for
// the toy GAN: mean intensity and the spread of intensity centroids.

#include <cmath>
#include <vector>

#include "neutrosim/tensor.hpp"

namespace image_stats {

struct Moments {
    double mean_intensity = 0;  // average pixel value on the [0, 1] scale
    double centroid_spread = 0; // RMS distance of centroids from their mean, pixels
};

/// `batch` is [n, s, s] or [n, s, s, 1] (or [n, 1, s, s]) in [-1, 1].
inline Moments moments(const neutrosim::Tensor& batch, std::size_t size) {
    const std::size_t per = size * size;
    const std::size_t n = batch.size() / per;
    Moments m;
    std::vector<double> cx(n), cy(n);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double mass = 0, sx = 0, sy = 0;
        for (std::size_t r = 0; r < size; ++r)
            for (std::size_t c = 0; c < size; ++c) {
                const double v = (batch[i * per + r * size + c] + 1.0) / 2.0;
                mass += v;
                sx += v * double(c);
                sy += v * double(r);
            }
        total += mass;
        cx[i] = mass > 0 ? sx / mass : (double(size) - 1) / 2;
        cy[i] = mass > 0 ? sy / mass : (double(size) - 1) / 2;
    }
    m.mean_intensity = total / double(n * per);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += cx[i], my += cy[i];
    mx /= double(n);
    my /= double(n);
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (cx[i] - mx) * (cx[i] - mx) + (cy[i] - my) * (cy[i] - my);
    m.centroid_spread = std::sqrt(var / double(n));
    return m;
}

}  // namespace image_stats
