#pragma once

// Generator evaluation: latent reconstruction of held-out images by L-BFGS
// over z, prior negative log likelihood of the recovered codes, and
// latent-space interpolation grids.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "neutrosim/autodiff.hpp"
#include "neutrosim/error.hpp"
#include "neutrosim/gan.hpp"
#include "neutrosim/image.hpp"
#include "neutrosim/lbfgs.hpp"
#include "neutrosim/network.hpp"

namespace neutrosim::eval {

using gan::BoundNetwork;
using gan::NetworkParams;
using gan::latent_dim;

inline double gaussian_nll(const Tensor& z) {
    if (!z.all_finite()) throw NumericError("gan-eval", "non-finite latent vector");
    double sq = 0;
    for (double v : z.data()) sq += v * v;
    return 0.5 * sq + 0.5 * static_cast<double>(z.size()) * std::log(2 * std::numbers::pi);
}

/// Mean and standard deviation of gaussian_nll for z ~ N(0, I): half a
/// chi-square with nz degrees of freedom plus a constant.
inline double prior_mean_nll(std::size_t nz) {
    return 0.5 * static_cast<double>(nz) * (1 + std::log(2 * std::numbers::pi));
}
inline double prior_std_nll(std::size_t nz) { return std::sqrt(0.5 * static_cast<double>(nz)); }

struct ReconstructionRecord {
    std::string id;
    Tensor z;
    double l2_error = 0;  // mean squared pixel error
    double nll = 0;
    std::size_t restarts_used = 0;  // restarts that finished with finite values
    std::size_t best_restart = 0;
    std::size_t iterations = 0;     // L-BFGS iterations of the best restart
    std::vector<double> restart_errors;  // per restart; NaN if discarded
};

namespace detail {

inline void check_target(const NetworkParams& g, const Tensor& target) {
    const Shape& out = g.arch.output;
    Shape batched = out;
    batched.insert(batched.begin(), 1);
    if (target.shape() != out && target.shape() != batched)
        throw InvalidArgument("gan-eval", "target shape " + to_string(target.shape()) +
                                              " does not match generator output " + to_string(out));
    if (!target.all_finite()) throw NumericError("gan-eval", "non-finite target");
}

/// Sum of squared residuals of G(z) against target, with gradient in z.
inline double residual_objective(const NetworkParams& g, const Tensor& target, const Eigen::VectorXd& z,
                                 Eigen::VectorXd& grad) {
    const std::size_t nz = static_cast<std::size_t>(z.size());
    ad::Graph graph;
    BoundNetwork net = gan::bind(graph, g, false);
    ad::Var zin = graph.input("z", Tensor(Shape{1, nz}, std::vector<double>(z.data(), z.data() + nz)), true);
    ad::Var out = ad::reshape(gan::forward(net, zin), Shape{target.size()});
    ad::Var diff = out - graph.constant(target.reshaped(Shape{target.size()}));
    ad::Var loss = ad::sum(ad::square(diff));
    const Tensor gz = ad::input_gradient(loss, zin, false).value();
    grad.resize(z.size());
    for (std::size_t i = 0; i < nz; ++i) grad[static_cast<Eigen::Index>(i)] = gz[i];
    return loss.value().item();
}

}  // namespace detail

/// Best of `restarts` L-BFGS runs of `iters` iterations on ||G(z) - target||^2,
/// each starting from z ~ N(0, I) drawn from `rng` in restart order.
inline ReconstructionRecord reconstruct(const NetworkParams& g, const Tensor& target, std::size_t iters,
                                        std::size_t restarts, std::mt19937_64& rng) {
    detail::check_target(g, target);
    if (iters == 0) throw InvalidArgument("gan-eval", "iterations must be at least 1");
    if (restarts == 0) throw InvalidArgument("gan-eval", "restarts must be at least 1");
    const std::size_t nz = latent_dim(g);
    const double pixels = static_cast<double>(target.size());

    opt::LbfgsOptions options;
    options.max_iterations = iters;
    options.lower_bound = 0.0;
    const opt::Objective f = [&](const Eigen::VectorXd& z, Eigen::VectorXd& grad) {
        return detail::residual_objective(g, target, z, grad);
    };

    ReconstructionRecord rec;
    std::normal_distribution<double> normal(0.0, 1.0);
    bool found = false;
    for (std::size_t r = 0; r < restarts; ++r) {
        Eigen::VectorXd z0(static_cast<Eigen::Index>(nz));
        for (auto& v : z0) v = normal(rng);
        opt::LbfgsResult res;
        try {
            res = opt::lbfgs(f, z0, options);
        } catch (const NumericError&) {
            res.finite = false;
        }
        if (!res.finite || !std::isfinite(res.f) || !res.x.allFinite()) {
            rec.restart_errors.push_back(std::nan(""));
            continue;
        }
        const double err = res.f / pixels;
        rec.restart_errors.push_back(err);
        ++rec.restarts_used;
        if (!found || err < rec.l2_error) {
            found = true;
            rec.l2_error = err;
            rec.best_restart = r;
            rec.iterations = res.iterations;
            rec.z = Tensor(Shape{nz}, std::vector<double>(res.x.data(), res.x.data() + res.x.size()));
        }
    }
    if (!found) throw NumericError("gan-eval", "every reconstruction restart produced non-finite values");
    rec.nll = gaussian_nll(rec.z);
    return rec;
}

struct ReconstructionReport {
    std::vector<ReconstructionRecord> records;
    double mean_l2 = 0;
    double mean_nll = 0;
    double std_nll = 0;
    double prior_mean_nll = 0;
    double prior_std_nll = 0;
};

struct ReportOptions {
    std::size_t iterations = 50;
    std::size_t restarts = 3;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    return h;
}

// Summaries are taken over sorted values so they do not depend on record order.
inline double sorted_mean(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sorted_std(std::vector<double> v, double mean) {
    for (double& x : v) x = (x - mean) * (x - mean);
    return std::sqrt(sorted_mean(std::move(v)));
}

}  // namespace detail

/// Reconstructs every image of `test_set` ([n, ...output]). Each image draws
/// its restarts from a stream keyed by (seed, id), so a record does not
/// depend on where the image sits in the set. Ids default to the row index.
inline ReconstructionReport reconstruction_report(const NetworkParams& g, const Tensor& test_set,
                                                  const ReportOptions& options = {},
                                                  std::vector<std::string> ids = {}) {
    if (test_set.rank() == 0 || test_set.dim(0) == 0) throw InvalidArgument("gan-eval", "empty test set");
    const std::size_t n = test_set.dim(0);
    const std::size_t per = test_set.size() / n;
    if (per != numel(g.arch.output))
        throw InvalidArgument("gan-eval", "test images do not match the generator output size");
    if (ids.empty())
        for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    if (ids.size() != n) throw InvalidArgument("gan-eval", "one id per test image required");

    ReconstructionReport rep;
    std::vector<double> l2, nll;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor target(g.arch.output,
                      std::vector<double>(test_set.data().begin() + static_cast<std::ptrdiff_t>(i * per),
                                          test_set.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
        std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                          static_cast<std::uint32_t>(detail::fnv1a(ids[i])),
                          static_cast<std::uint32_t>(detail::fnv1a(ids[i]) >> 32)};
        std::mt19937_64 rng(seq);
        ReconstructionRecord rec = reconstruct(g, target, options.iterations, options.restarts, rng);
        rec.id = ids[i];
        l2.push_back(rec.l2_error);
        nll.push_back(rec.nll);
        rep.records.push_back(std::move(rec));
    }
    rep.mean_l2 = detail::sorted_mean(l2);
    rep.mean_nll = detail::sorted_mean(nll);
    rep.std_nll = detail::sorted_std(nll, rep.mean_nll);
    rep.prior_mean_nll = prior_mean_nll(latent_dim(g));
    rep.prior_std_nll = prior_std_nll(latent_dim(g));
    return rep;
}

/// Delimited table "id,l2_error,nll", one row per record, then a summary
/// row with id "summary" and '#' comment lines for the remaining statistics.
inline void write_report(const ReconstructionReport& rep, std::ostream& out) {
    out.precision(17);
    out << "id,l2_error,nll\n";
    for (const auto& r : rep.records) out << r.id << ',' << r.l2_error << ',' << r.nll << '\n';
    out << "summary," << rep.mean_l2 << ',' << rep.mean_nll << '\n';
    out << "# std_nll=" << rep.std_nll << '\n';
    out << "# prior_mean_nll=" << rep.prior_mean_nll << '\n';
    out << "# prior_std_nll=" << rep.prior_std_nll << '\n';
}

/// Interpolation grid: column j walks from points[j] to points[(j+1) % n]
/// (the sequence is closed into a loop), row i is step i of `steps`.
struct WalkGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Tensor> latents;  // row-major, rows * cols
    std::vector<Tensor> images;   // generator outputs in [-1, 1]

    const Tensor& image(std::size_t row, std::size_t col) const { return images[row * cols + col]; }
    const Tensor& latent(std::size_t row, std::size_t col) const { return latents[row * cols + col]; }
};

inline WalkGrid latent_walk(const NetworkParams& g, const std::vector<Tensor>& points, std::size_t steps) {
    if (points.size() < 2) throw InvalidArgument("gan-eval", "latent walk needs at least 2 points");
    if (steps < 2) throw InvalidArgument("gan-eval", "latent walk needs at least 2 steps");
    const std::size_t nz = latent_dim(g);
    for (const Tensor& p : points) {
        if (p.size() != nz)
            throw InvalidArgument("gan-eval", "latent point of size " + std::to_string(p.size()) +
                                                  " does not match latent dimension " + std::to_string(nz));
        if (!p.all_finite()) throw NumericError("gan-eval", "non-finite latent point");
    }
    WalkGrid w;
    w.rows = steps;
    w.cols = points.size();
    Tensor batch(Shape{w.rows * w.cols, nz});
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
        for (std::size_t j = 0; j < w.cols; ++j) {
            const Tensor& a = points[j];
            const Tensor& b = points[(j + 1) % w.cols];
            Tensor z(Shape{nz});
            for (std::size_t k = 0; k < nz; ++k)
                z[k] = i == 0 ? a[k] : i + 1 == steps ? b[k] : (1 - t) * a[k] + t * b[k];
            std::copy(z.data().begin(), z.data().end(), batch.data().begin() + static_cast<std::ptrdiff_t>((i * w.cols + j) * nz));
            w.latents.push_back(std::move(z));
        }
    }
    const Tensor out = gan::generate(g, batch);
    const std::size_t per = out.size() / (w.rows * w.cols);
    for (std::size_t c = 0; c < w.rows * w.cols; ++c)
        w.images.emplace_back(g.arch.output,
                              std::vector<double>(out.data().begin() + static_cast<std::ptrdiff_t>(c * per),
                                                  out.data().begin() + static_cast<std::ptrdiff_t>((c + 1) * per)));
    return w;
}

/// Tiles a walk of square single-channel images into one picture, mapping
/// [-1, 1] to [0, 1], with `gap` background pixels between tiles.
inline Image tile_walk(const WalkGrid& w, std::size_t gap = 1) {
    const std::size_t s = static_cast<std::size_t>(std::lround(std::sqrt(double(w.images.front().size()))));
    if (s * s != w.images.front().size()) throw InvalidArgument("gan-eval", "walk images are not square");
    Image img(w.rows * s + (w.rows - 1) * gap, w.cols * s + (w.cols - 1) * gap, 0.0);
    for (std::size_t i = 0; i < w.rows; ++i)
        for (std::size_t j = 0; j < w.cols; ++j) {
            const Tensor& t = w.image(i, j);
            for (std::size_t r = 0; r < s; ++r)
                for (std::size_t c = 0; c < s; ++c)
                    img.at(i * (s + gap) + r, j * (s + gap) + c) = std::clamp((t[r * s + c] + 1) / 2, 0.0, 1.0);
        }
    return img;
}

}  // namespace neutrosim::eval
