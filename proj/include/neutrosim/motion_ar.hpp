#pragma once

// Linear dynamical system for pooled cell motion:
//
//   y_t = C x_t + mean + u_t
//   x_t = B_1 x_{t-1} + ... + B_d x_{t-d} + v_t
//
// Observations y_t stack the (x, y) displacements of every cell in a pool
// at frame t. C comes from the SVD of the centered observation matrix and
// the B_i from least squares on the projected states.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "neutrosim/binary_io.hpp"
#include "neutrosim/error.hpp"
#include "neutrosim/trajectory.hpp"

namespace neutrosim::motion {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Centered observations: Y is p x T with rows (x_0, y_0, x_1, y_1, ...)
/// per cell; `mean` holds the removed row means.
struct ObservationMatrix {
    MatrixXd Y;
    VectorXd mean;
    std::size_t cells = 0;
    Condition condition = Condition::Normal;

    std::size_t dim() const { return static_cast<std::size_t>(Y.rows()); }
    std::size_t frames() const { return static_cast<std::size_t>(Y.cols()); }
    MatrixXd raw() const { return Y.colwise() + mean; }
};

/// Stacks the trajectories of one condition into an observation matrix.
/// Each trajectory is translated so its first point is the origin, all are
/// truncated to the shortest, and row means are removed. Trajectories of
/// other conditions are skipped. `min_frames` guards later AR fits of order
/// min_frames - 1.
inline ObservationMatrix pool_trajectories(const std::vector<Trajectory>& trajs, Condition condition,
                                           std::size_t min_frames = 2) {
    std::vector<const Trajectory*> pool;
    for (const Trajectory& t : trajs)
        if (t.condition == condition) pool.push_back(&t);
    if (pool.empty())
        throw InvalidArgument("motion-ar", std::string("empty pool for condition ") +
                                               condition_name(condition));
    std::size_t frames = std::numeric_limits<std::size_t>::max();
    for (const Trajectory* t : pool) frames = std::min(frames, t->size());
    if (frames < std::max<std::size_t>(min_frames, 2))
        throw InvalidArgument("motion-ar", "trajectories too short: " + std::to_string(frames) +
                                               " frames, need " +
                                               std::to_string(std::max<std::size_t>(min_frames, 2)));
    ObservationMatrix obs;
    obs.cells = pool.size();
    obs.condition = condition;
    obs.Y.resize(static_cast<Eigen::Index>(2 * pool.size()), static_cast<Eigen::Index>(frames));
    for (std::size_t c = 0; c < pool.size(); ++c) {
        const Point2 origin = pool[c]->points.front();
        for (std::size_t t = 0; t < frames; ++t) {
            obs.Y(static_cast<Eigen::Index>(2 * c), static_cast<Eigen::Index>(t)) =
                pool[c]->points[t].x - origin.x;
            obs.Y(static_cast<Eigen::Index>(2 * c + 1), static_cast<Eigen::Index>(t)) =
                pool[c]->points[t].y - origin.y;
        }
    }
    obs.mean = obs.Y.rowwise().mean();
    obs.Y.colwise() -= obs.mean;
    return obs;
}

struct Subspace {
    MatrixXd C;                // p x q, orthonormal columns
    VectorXd singular_values;  // all of them, non-increasing
};

/// Top-q left singular vectors of a centered observation matrix. Each
/// column is signed so that its largest-magnitude entry is positive.
inline Subspace fit_subspace(const MatrixXd& Y, std::size_t q) {
    const auto limit = static_cast<std::size_t>(std::min(Y.rows(), Y.cols()));
    if (q < 1 || q > limit)
        throw InvalidArgument("motion-ar", "subspace dimension " + std::to_string(q) +
                                               " outside [1, " + std::to_string(limit) + "]");
    if (!Y.allFinite()) throw NumericError("motion-ar", "non-finite observation");
    Eigen::JacobiSVD<MatrixXd> svd(Y, Eigen::ComputeThinU);
    if (svd.info() != Eigen::Success) throw NumericError("motion-ar", "SVD did not converge");
    Subspace s;
    s.C = svd.matrixU().leftCols(static_cast<Eigen::Index>(q));
    s.singular_values = svd.singularValues();
    for (Eigen::Index j = 0; j < s.C.cols(); ++j) {
        Eigen::Index arg;
        s.C.col(j).cwiseAbs().maxCoeff(&arg);
        if (s.C(arg, j) < 0) s.C.col(j) *= -1.0;
    }
    return s;
}

inline Subspace fit_subspace(const ObservationMatrix& obs, std::size_t q) {
    return fit_subspace(obs.Y, q);
}

/// States X = C^T (Y - mean).
inline MatrixXd encode(const MatrixXd& Y, const MatrixXd& C, const VectorXd& mean) {
    if (Y.rows() != C.rows() || mean.size() != Y.rows())
        throw InvalidArgument("motion-ar", "encode: dimension mismatch");
    return C.transpose() * (Y.colwise() - mean);
}

/// Observations C X + mean.
inline MatrixXd decode(const MatrixXd& X, const MatrixXd& C, const VectorXd& mean) {
    if (X.rows() != C.cols() || mean.size() != C.rows())
        throw InvalidArgument("motion-ar", "decode: dimension mismatch");
    return (C * X).colwise() + mean;
}

struct ArFit {
    std::vector<MatrixXd> B;  // B[i] multiplies x_{t-1-i}
    MatrixXd residual_cov;    // empirical covariance of v_t
    std::size_t active_order = 0;  // lags actually estimated; the rest are zero
    bool ridge = false;            // even one lag was rank deficient
};

namespace detail {

/// Regressor rows [x_{t-1}; ...; x_{t-d}] for t = d .. T-1, one column per t.
inline MatrixXd lagged(const MatrixXd& X, std::size_t d) {
    const Eigen::Index q = X.rows();
    const Eigen::Index n = X.cols() - static_cast<Eigen::Index>(d);
    MatrixXd Z(q * static_cast<Eigen::Index>(d), n);
    for (std::size_t i = 0; i < d; ++i)
        Z.middleRows(static_cast<Eigen::Index>(i) * q, q) =
            X.middleCols(static_cast<Eigen::Index>(d - 1 - i), n);
    return Z;
}

}  // namespace detail

/// Least-squares AR(d) coefficients for states X (q x T), solved by
/// column-pivoted QR on the stacked regressors. When the regressor is rank
/// deficient the trailing lags are dropped (their B_i set to zero) until it
/// is not; if a single lag is still deficient, the normal equations get a
/// 1e-8 trace-scaled ridge instead.
inline ArFit fit_ar(const MatrixXd& X, std::size_t d) {
    const auto q = static_cast<std::size_t>(X.rows());
    const auto T = static_cast<std::size_t>(X.cols());
    if (d < 1) throw InvalidArgument("motion-ar", "AR order must be at least 1");
    if (q < 1 || T < q * d + 1 || T <= d)
        throw InvalidArgument("motion-ar", "insufficient data: " + std::to_string(T) +
                                               " frames for q = " + std::to_string(q) +
                                               ", d = " + std::to_string(d));
    if (!X.allFinite()) throw NumericError("motion-ar", "non-finite state");
    const MatrixXd Z = detail::lagged(X, d);
    const MatrixXd target = X.rightCols(static_cast<Eigen::Index>(T - d));
    const auto k = static_cast<Eigen::Index>(q * d);

    ArFit fit;
    MatrixXd stacked = MatrixXd::Zero(static_cast<Eigen::Index>(q), k);
    for (std::size_t order = d; order >= 1 && fit.active_order == 0; --order) {
        const auto rows = static_cast<Eigen::Index>(q * order);
        Eigen::ColPivHouseholderQR<MatrixXd> qr(Z.topRows(rows).transpose());
        if (qr.rank() == rows) {
            stacked.leftCols(rows) = qr.solve(target.transpose()).transpose();
            fit.active_order = order;
        }
    }
    if (fit.active_order == 0) {
        const MatrixXd gram = Z * Z.transpose();
        const double tr = gram.trace();
        const double ridge = 1e-8 * (tr > 0 ? tr / static_cast<double>(k) : 1.0);
        const MatrixXd reg = gram + ridge * MatrixXd::Identity(k, k);
        stacked = reg.ldlt().solve(Z * target.transpose()).transpose();
        fit.active_order = d;
        fit.ridge = true;
    }
    if (!stacked.allFinite()) throw NumericError("motion-ar", "AR solve produced non-finite values");
    for (std::size_t i = 0; i < d; ++i)
        fit.B.push_back(stacked.middleCols(static_cast<Eigen::Index>(i * q), static_cast<Eigen::Index>(q)));
    const MatrixXd resid = target - stacked * Z;
    fit.residual_cov = (resid * resid.transpose()) / static_cast<double>(resid.cols());
    fit.residual_cov = 0.5 * (fit.residual_cov + fit.residual_cov.transpose()).eval();
    return fit;
}

/// Fitted linear dynamical system.
struct ARModel {
    std::size_t q = 0;
    std::size_t d = 0;
    Condition condition = Condition::Normal;
    MatrixXd C;               // p x q
    VectorXd mean;            // p
    std::vector<MatrixXd> B;  // d matrices, q x q
    MatrixXd state_cov;       // q x q, covariance of v_t
    VectorXd obs_var;         // p, diagonal covariance of u_t
    MatrixXd states;          // q x T fitted states, source of seed windows

    std::size_t dim() const { return static_cast<std::size_t>(C.rows()); }
    std::size_t cells() const { return dim() / 2; }

    /// One-step prediction sum_i B_i x_{t-i} from the d states ending at
    /// column `t - 1` of X.
    VectorXd predict(const MatrixXd& X, Eigen::Index t) const {
        VectorXd out = VectorXd::Zero(static_cast<Eigen::Index>(q));
        for (std::size_t i = 0; i < d; ++i) out += B[i] * X.col(t - 1 - static_cast<Eigen::Index>(i));
        return out;
    }
};

inline ARModel fit_model(const ObservationMatrix& obs, std::size_t q, std::size_t d) {
    const Subspace sub = fit_subspace(obs.Y, q);
    ARModel m;
    m.q = q;
    m.d = d;
    m.condition = obs.condition;
    m.C = sub.C;
    m.mean = obs.mean;
    m.states = sub.C.transpose() * obs.Y;
    ArFit ar = fit_ar(m.states, d);
    m.B = std::move(ar.B);
    m.state_cov = std::move(ar.residual_cov);
    const MatrixXd resid = obs.Y - sub.C * m.states;
    m.obs_var = resid.rowwise().squaredNorm() / static_cast<double>(obs.frames());
    return m;
}

// ---------------------------------------------------------------------------
// Grid search over (q, d)

struct GridCell {
    std::size_t q = 0;
    std::size_t d = 0;
    bool ok = false;
    double train_score = std::numeric_limits<double>::infinity();
    double heldout_score = std::numeric_limits<double>::infinity();
    double heldout_se = 0;  // standard error of the held-out mean
    std::string error;
};

struct GridResult {
    std::size_t q = 0;
    std::size_t d = 0;
    ARModel model;
    std::vector<GridCell> cells;  // q-major, d-minor
};

struct Range {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

namespace detail {

/// Squared one-step prediction errors in observation space for frames
/// [from, to) of the raw series, given states encoded from it.
inline std::vector<double> one_step_errors(const MatrixXd& raw, const MatrixXd& X, const MatrixXd& C,
                                           const VectorXd& mean, const std::vector<MatrixXd>& B,
                                           Eigen::Index from, Eigen::Index to) {
    std::vector<double> out;
    for (Eigen::Index t = from; t < to; ++t) {
        VectorXd pred = VectorXd::Zero(C.cols());
        for (std::size_t i = 0; i < B.size(); ++i) pred += B[i] * X.col(t - 1 - static_cast<Eigen::Index>(i));
        out.push_back((raw.col(t) - (C * pred + mean)).squaredNorm());
    }
    return out;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double standard_error(const std::vector<double>& v) {
    if (v.size() < 2) return 0;
    const double m = mean_of(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace detail

/// Fits every (q, d) cell on the first `train_fraction` of the frames and
/// scores it by mean squared one-step-ahead prediction error on the rest.
/// Cells whose held-out score lies within `tie_se` standard errors of the
/// minimum (plus a 1e-12 relative floor for round-off) count as tied; among those the smallest q, then the smallest d,
/// wins. The winner is refit on all frames.
inline GridResult grid_search(const ObservationMatrix& obs, Range q_range = {2, 10},
                              Range d_range = {1, 10}, double train_fraction = 0.8,
                              double tie_se = 1.0) {
    if (q_range.lo < 1 || q_range.lo > q_range.hi || d_range.lo < 1 || d_range.lo > d_range.hi)
        throw InvalidArgument("motion-ar", "empty or invalid grid range");
    if (!(train_fraction > 0 && train_fraction < 1))
        throw InvalidArgument("motion-ar", "train fraction must lie in (0, 1)");
    if (!(tie_se >= 0)) throw InvalidArgument("motion-ar", "tie band must be non-negative");
    const MatrixXd raw = obs.raw();
    const auto T = static_cast<Eigen::Index>(obs.frames());
    const auto n_train = static_cast<Eigen::Index>(std::floor(train_fraction * static_cast<double>(T)));
    const MatrixXd train_raw = raw.leftCols(n_train);
    const VectorXd train_mean = train_raw.rowwise().mean();
    const MatrixXd train_centered = train_raw.colwise() - train_mean;

    GridResult result;
    const GridCell* best = nullptr;
    for (std::size_t q = q_range.lo; q <= q_range.hi; ++q) {
        for (std::size_t d = d_range.lo; d <= d_range.hi; ++d) {
            GridCell cell;
            cell.q = q;
            cell.d = d;
            try {
                if (n_train >= T) throw InvalidArgument("motion-ar", "no held-out frames");
                const Subspace sub = fit_subspace(train_centered, q);
                const MatrixXd X_train = sub.C.transpose() * train_centered;
                const ArFit ar = fit_ar(X_train, d);
                const MatrixXd X_all = encode(raw, sub.C, train_mean);
                const auto di = static_cast<Eigen::Index>(d);
                cell.train_score =
                    detail::mean_of(detail::one_step_errors(raw, X_all, sub.C, train_mean, ar.B, di, n_train));
                const std::vector<double> held =
                    detail::one_step_errors(raw, X_all, sub.C, train_mean, ar.B, std::max(n_train, di), T);
                cell.heldout_score = detail::mean_of(held);
                cell.heldout_se = detail::standard_error(held);
                cell.ok = std::isfinite(cell.heldout_score);
            } catch (const Error& e) {
                cell.error = e.what();
            }
            result.cells.push_back(cell);
        }
    }
    for (const GridCell& c : result.cells)
        if (c.ok && (!best || c.heldout_score < best->heldout_score)) best = &c;
    if (!best) throw InvalidArgument("motion-ar", "every grid cell failed to fit");
    const double energy = (raw.rightCols(T - n_train).colwise() - train_mean).colwise().squaredNorm().mean();
    const double band = best->heldout_score + tie_se * best->heldout_se + 1e-12 * energy;
    for (const GridCell& c : result.cells)
        if (c.ok && c.heldout_score <= band) {
            best = &c;
            break;
        }
    result.q = best->q;
    result.d = best->d;
    result.model = fit_model(obs, result.q, result.d);
    return result;
}

// ---------------------------------------------------------------------------
// Synthesis

/// Runs the AR recursion for `n_frames` states. The first d columns are the
/// seed states (oldest first): `seed` when given, otherwise a random
/// contiguous window of the fitted states. Innovations are drawn from
/// N(0, noise_scale^2 * state_cov).
inline MatrixXd synthesize_states(const ARModel& model, std::size_t n_frames,
                                  const std::optional<MatrixXd>& seed, std::mt19937_64& rng,
                                  double noise_scale = 1.0) {
    const auto q = static_cast<Eigen::Index>(model.q);
    const auto d = static_cast<Eigen::Index>(model.d);
    if (model.q == 0 || model.d == 0 || model.B.size() != model.d)
        throw InvalidArgument("motion-ar", "model unfit");
    if (!(noise_scale >= 0)) throw InvalidArgument("motion-ar", "noise scale must be non-negative");
    MatrixXd X(q, static_cast<Eigen::Index>(n_frames));
    if (n_frames == 0) return X;

    MatrixXd window;
    if (seed) {
        if (seed->rows() != q || seed->cols() != d)
            throw InvalidArgument("motion-ar", "seed must hold exactly d state vectors of size q");
        window = *seed;
    } else {
        if (model.states.cols() < d || model.states.rows() != q)
            throw InvalidArgument("motion-ar", "model unfit: no fitted states to seed from");
        std::uniform_int_distribution<Eigen::Index> start(0, model.states.cols() - d);
        window = model.states.middleCols(start(rng), d);
    }

    MatrixXd factor = MatrixXd::Zero(q, q);
    if (noise_scale > 0) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(model.state_cov);
        const VectorXd ev = eig.eigenvalues();
        const double tol = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
        if (ev.minCoeff() < -tol) throw NumericError("motion-ar", "state covariance is not PSD");
        factor = eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    const Eigen::Index n = static_cast<Eigen::Index>(n_frames);
    for (Eigen::Index t = 0; t < std::min(d, n); ++t) X.col(t) = window.col(t);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd noise(q);
    for (Eigen::Index t = d; t < n; ++t) {
        if (noise_scale > 0) {
            VectorXd z(q);
            for (Eigen::Index i = 0; i < q; ++i) z(i) = normal(rng);
            noise = noise_scale * (factor * z);
        }
        for (Eigen::Index r = 0; r < q; ++r) {
            double acc = 0.0;
            for (Eigen::Index i = 1; i <= d; ++i)
                for (Eigen::Index c = 0; c < q; ++c)
                    acc += model.B[static_cast<std::size_t>(i - 1)](r, c) * X(c, t - i);
            X(r, t) = noise_scale > 0 ? acc + noise(r) : acc;
        }
    }
    return X;
}

/// Decodes states into one trajectory per pooled cell, anchored at the given
/// origins (one per cell, or a single origin shared by all).
inline std::vector<Trajectory> states_to_trajectory(const MatrixXd& X, const ARModel& model,
                                                      const std::vector<Point2>& origins,
                                                      double frame_rate = 20.0) {
    if (static_cast<std::size_t>(X.rows()) != model.q)
        throw InvalidArgument("motion-ar", "state dimension " + std::to_string(X.rows()) +
                                               " does not match model q = " + std::to_string(model.q));
    const std::size_t cells = model.cells();
    if (origins.size() != cells && origins.size() != 1)
        throw InvalidArgument("motion-ar", "need 1 or " + std::to_string(cells) + " origins");
    const MatrixXd Y = decode(X, model.C, model.mean);
    std::vector<Trajectory> out(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        const Point2 o = origins.size() == 1 ? origins[0] : origins[c];
        Trajectory& t = out[c];
        t.cell_id = "synth" + std::to_string(c);
        t.condition = model.condition;
        t.frame_rate = frame_rate;
        t.points.resize(static_cast<std::size_t>(X.cols()));
        for (Eigen::Index f = 0; f < X.cols(); ++f)
            t.points[static_cast<std::size_t>(f)] = {o.x + Y(static_cast<Eigen::Index>(2 * c), f),
                                                      o.y + Y(static_cast<Eigen::Index>(2 * c + 1), f)};
    }
    return out;
}

struct Histogram {
    std::vector<double> edges;  // bins + 1
    std::vector<std::size_t> counts;
};

/// Histogram of one state component over all frames. Edges span min..max;
/// the maximum lands in the last bin.
inline Histogram pc_histogram(const MatrixXd& X, std::size_t component, std::size_t bins) {
    if (X.cols() == 0) throw InvalidArgument("motion-ar", "empty states");
    if (component >= static_cast<std::size_t>(X.rows()))
        throw InvalidArgument("motion-ar", "component index out of range");
    if (bins < 1) throw InvalidArgument("motion-ar", "need at least one bin");
    const auto row = X.row(static_cast<Eigen::Index>(component));
    const double lo = row.minCoeff();
    const double hi = row.maxCoeff();
    Histogram h;
    h.counts.assign(bins, 0);
    const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 0.0;
    for (std::size_t i = 0; i <= bins; ++i)
        h.edges.push_back(i == bins ? hi : lo + width * static_cast<double>(i));
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        std::size_t b = 0;
        if (hi > lo)
            b = std::min(bins - 1, static_cast<std::size_t>((row(i) - lo) / (hi - lo) * static_cast<double>(bins)));
        ++h.counts[b];
    }
    return h;
}

// ---------------------------------------------------------------------------
// NARM model file: magic, u32 version, q, d, p, condition, T (fitted state
// count), then C (p x q), mean (p), B_1..B_d (q x q each), state covariance
// (q x q), observation variances (p), fitted states (q x T). Matrices are
// row-major f64 little-endian.

inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline void write_matrix(std::ostream& out, const MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) io::write_f64(out, m(r, c));
}

inline MatrixXd read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = io::read_f64(in, "motion-ar");
            if (!std::isfinite(m(r, c))) throw FormatError("motion-ar", "non-finite value in model");
        }
    return m;
}

}  // namespace detail

inline void save_model(const ARModel& m, std::ostream& out) {
    io::write_magic(out, "NARM");
    io::write_u32(out, kModelVersion);
    io::write_u32(out, static_cast<std::uint32_t>(m.q));
    io::write_u32(out, static_cast<std::uint32_t>(m.d));
    io::write_u32(out, static_cast<std::uint32_t>(m.dim()));
    io::write_u32(out, static_cast<std::uint32_t>(m.condition));
    io::write_u32(out, static_cast<std::uint32_t>(m.states.cols()));
    detail::write_matrix(out, m.C);
    detail::write_matrix(out, m.mean);
    for (const MatrixXd& b : m.B) detail::write_matrix(out, b);
    detail::write_matrix(out, m.state_cov);
    detail::write_matrix(out, m.obs_var);
    detail::write_matrix(out, m.states);
    if (!out) throw FormatError("motion-ar", "failed to write model");
}

inline ARModel load_model(std::istream& in) {
    io::expect_magic(in, "NARM", "motion-ar");
    const std::uint32_t version = io::read_u32(in, "motion-ar");
    if (version != kModelVersion)
        throw FormatError("motion-ar", "unsupported model version " + std::to_string(version));
    ARModel m;
    m.q = io::read_u32(in, "motion-ar");
    m.d = io::read_u32(in, "motion-ar");
    const std::uint32_t p = io::read_u32(in, "motion-ar");
    const std::uint32_t cond = io::read_u32(in, "motion-ar");
    const std::uint32_t T = io::read_u32(in, "motion-ar");
    if (m.q == 0 || m.d == 0 || p == 0 || m.q > p || cond > 1 || m.d > (1u << 16) || p > (1u << 20) ||
        T > (1u << 26))
        throw FormatError("motion-ar", "malformed header");
    m.condition = static_cast<Condition>(cond);
    const auto q = static_cast<Eigen::Index>(m.q);
    m.C = detail::read_matrix(in, p, q);
    m.mean = detail::read_matrix(in, p, 1);
    for (std::size_t i = 0; i < m.d; ++i) m.B.push_back(detail::read_matrix(in, q, q));
    m.state_cov = detail::read_matrix(in, q, q);
    m.obs_var = detail::read_matrix(in, p, 1);
    m.states = detail::read_matrix(in, q, T);
    io::expect_eof(in, "motion-ar");
    return m;
}

inline void save_model(const ARModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("motion-ar", "cannot open " + path + " for writing");
    save_model(m, out);
}

inline ARModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("motion-ar", "cannot open " + path);
    return load_model(in);
}

}  // namespace neutrosim::motion
