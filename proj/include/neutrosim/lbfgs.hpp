#pragma once

// Limited-memory BFGS with an Armijo backtracking line search.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

namespace neutrosim::opt {

/// Returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
    std::size_t max_iterations = 50;
    std::size_t memory = 10;
    double armijo_c1 = 1e-4;
    double shrink = 0.5;
    std::size_t max_backtracks = 60;
    double gradient_tolerance = 0.0;  // stop when max |g_i| <= this
    std::optional<double> lower_bound;  // stop once f reaches it (0 for sums of squares)
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double f = 0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool finite = true;  // false if a non-finite value stopped the run
};

inline LbfgsResult lbfgs(const Objective& objective, Eigen::VectorXd x, const LbfgsOptions& opt = {}) {
    const Eigen::Index n = x.size();
    LbfgsResult res;
    Eigen::VectorXd g(n);
    double f = objective(x, g);
    res.evaluations = 1;
    std::deque<Eigen::VectorXd> S, Y;
    std::deque<double> rho;

    auto done = [&](double fx, const Eigen::VectorXd& gx) {
        return (opt.lower_bound && fx <= *opt.lower_bound) || gx.size() == 0 || gx.cwiseAbs().maxCoeff() <= opt.gradient_tolerance;
    };

    if (!std::isfinite(f) || !g.allFinite()) {
        res.finite = false;
    } else {
        for (; res.iterations < opt.max_iterations && !done(f, g); ++res.iterations) {
            // Two-loop recursion.
            Eigen::VectorXd d = -g;
            std::vector<double> alpha(S.size());
            for (std::size_t i = S.size(); i-- > 0;) {
                alpha[i] = rho[i] * S[i].dot(d);
                d -= alpha[i] * Y[i];
            }
            if (!S.empty()) {
                d *= S.back().dot(Y.back()) / Y.back().squaredNorm();
            } else {
                d /= std::max(1.0, g.norm());
            }
            for (std::size_t i = 0; i < S.size(); ++i) {
                const double beta = rho[i] * Y[i].dot(d);
                d += (alpha[i] - beta) * S[i];
            }
            double slope = g.dot(d);
            if (!(slope < 0)) {
                S.clear(), Y.clear(), rho.clear();
                d = -g / std::max(1.0, g.norm());
                slope = g.dot(d);
            }

            double t = 1.0;
            Eigen::VectorXd xn(n), gn(n);
            double fn = 0;
            bool accepted = false;
            for (std::size_t k = 0; k <= opt.max_backtracks; ++k, t *= opt.shrink) {
                xn = x + t * d;
                fn = objective(xn, gn);
                ++res.evaluations;
                if (std::isfinite(fn) && fn <= f + opt.armijo_c1 * t * slope) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;  // no decrease available at working precision
            if (!gn.allFinite() || !xn.allFinite()) {
                res.finite = false;
                break;
            }

            Eigen::VectorXd s = xn - x, y = gn - g;
            const double sy = s.dot(y);
            if (sy > 1e-12 * s.norm() * y.norm()) {
                if (S.size() == opt.memory) S.pop_front(), Y.pop_front(), rho.pop_front();
                S.push_back(std::move(s));
                Y.push_back(std::move(y));
                rho.push_back(1.0 / sy);
            }
            x = std::move(xn);
            g = std::move(gn);
            f = fn;
        }
    }
    res.x = std::move(x);
    res.f = f;
    return res;
}

}  // namespace neutrosim::opt
