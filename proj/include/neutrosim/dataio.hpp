#pragma once

// Image stacks, trajectory tables and the synthetic ground-truth dataset.
//
// NIMG layout: "NIMG", u32 version, u32 count, u32 size, then count*size*size
// unsigned bytes, image-major then row-major. A pixel's value is byte / 255.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "neutrosim/binary_io.hpp"
#include "neutrosim/error.hpp"
#include "neutrosim/motion_ar.hpp"
#include "neutrosim/tensor.hpp"
#include "neutrosim/trajectory.hpp"

namespace neutrosim::data {

/// Grayscale images stored as 8-bit levels.
class ImageStack {
public:
    ImageStack() = default;
    ImageStack(std::size_t count, std::size_t size)
        : count_(count), size_(size), levels_(count * size * size, 0) {}

    std::size_t count() const noexcept { return count_; }
    std::size_t size() const noexcept { return size_; }
    std::size_t pixels_per_image() const noexcept { return size_ * size_; }

    std::uint8_t& level(std::size_t img, std::size_t row, std::size_t col) {
        return levels_[(img * size_ + row) * size_ + col];
    }
    std::uint8_t level(std::size_t img, std::size_t row, std::size_t col) const {
        return levels_[(img * size_ + row) * size_ + col];
    }
    double value(std::size_t img, std::size_t row, std::size_t col) const {
        return level(img, row, col) / 255.0;
    }
    const std::vector<std::uint8_t>& levels() const noexcept { return levels_; }
    std::uint8_t* raw() noexcept { return levels_.data(); }

    /// Stores a value in [0, 1] rounded to the nearest level. Values outside
    /// the range are rejected, not clamped.
    void set(std::size_t img, std::size_t row, std::size_t col, double v) {
        if (!(v >= 0.0 && v <= 1.0))
            throw InvalidArgument("dataio", "pixel value " + std::to_string(v) + " outside [0, 1]");
        level(img, row, col) = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }

    /// Images `first .. first + n` as a [n, size, size, 1] tensor in the
    /// generator's [-1, 1] range.
    Tensor batch(std::size_t first, std::size_t n) const {
        if (first + n > count_) throw InvalidArgument("dataio", "batch exceeds stack");
        Tensor t({n, size_, size_, 1});
        auto out = t.data();
        const std::size_t px = pixels_per_image();
        for (std::size_t i = 0; i < n * px; ++i) out[i] = levels_[first * px + i] / 255.0 * 2.0 - 1.0;
        return t;
    }

    /// The whole stack, see batch().
    Tensor tensor() const { return batch(0, count_); }

    friend bool operator==(const ImageStack&, const ImageStack&) = default;

private:
    std::size_t count_ = 0;
    std::size_t size_ = 0;
    std::vector<std::uint8_t> levels_;
};

inline constexpr std::uint32_t kImageStackVersion = 1;

inline void save_image_stack(const ImageStack& s, std::ostream& out) {
    io::write_magic(out, "NIMG");
    io::write_u32(out, kImageStackVersion);
    io::write_u32(out, static_cast<std::uint32_t>(s.count()));
    io::write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(reinterpret_cast<const char*>(s.levels().data()), static_cast<std::streamsize>(s.levels().size()));
    if (!out) throw FormatError("dataio", "failed to write image stack");
}

inline ImageStack load_image_stack(std::istream& in) {
    io::expect_magic(in, "NIMG", "dataio");
    const std::uint32_t version = io::read_u32(in, "dataio");
    if (version != kImageStackVersion)
        throw FormatError("dataio", "unsupported image stack version " + std::to_string(version));
    const std::uint32_t count = io::read_u32(in, "dataio");
    const std::uint32_t size = io::read_u32(in, "dataio");
    if (count > 0 && size == 0) throw FormatError("dataio", "malformed header: zero image size");
    const std::uint64_t bytes = std::uint64_t(count) * size * size;
    // Refuse to allocate more than the stream can hold.
    const auto here = in.tellg();
    if (here != std::streampos(-1)) {
        in.seekg(0, std::ios::end);
        const auto end = in.tellg();
        in.seekg(here);
        if (end != std::streampos(-1) && std::uint64_t(end - here) < bytes)
            throw FormatError("dataio", "truncated payload");
    }
    ImageStack s(count, size);
    if (bytes > 0)
        io::read_exact(in, reinterpret_cast<char*>(s.raw()), bytes, "dataio");
    io::expect_eof(in, "dataio");
    return s;
}

inline void save_image_stack(const ImageStack& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("dataio", "cannot open " + path + " for writing");
    save_image_stack(s, out);
}

inline ImageStack load_image_stack(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("dataio", "cannot open " + path);
    return load_image_stack(in);
}

// ---------------------------------------------------------------------------
// Trajectory table: header "cell_id,frame,x,y,condition", one row per point,
// the rows of a cell contiguous and on consecutive frames. Coordinates are
// written in shortest round-trip form, so save/load is exact.

inline constexpr const char* kTrajectoryHeader = "cell_id,frame,x,y,condition";

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& field, std::size_t row, const char* what) {
    T v{};
    const char* end = field.data() + field.size();
    auto r = std::from_chars(field.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end || field.empty())
        throw FormatError("dataio", "row " + std::to_string(row) + ": bad " + what + " '" + field + "'");
    return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline void save_trajectories(const std::vector<Trajectory>& trajs, std::ostream& out) {
    out << kTrajectoryHeader << '\n';
    for (const Trajectory& t : trajs) {
        if (t.cell_id.empty() || t.cell_id.find_first_of(",\n\r") != std::string::npos)
            throw InvalidArgument("dataio", "cell id '" + t.cell_id + "' is empty or contains a delimiter");
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!std::isfinite(t.points[i].x) || !std::isfinite(t.points[i].y))
                throw InvalidArgument("dataio", "non-finite coordinate in '" + t.cell_id + "'");
            out << t.cell_id << ',' << t.frame(i) << ',' << detail::format_double(t.points[i].x) << ','
                << detail::format_double(t.points[i].y) << ',' << condition_name(t.condition) << '\n';
        }
    }
    if (!out) throw FormatError("dataio", "failed to write trajectories");
}

inline std::vector<Trajectory> load_trajectories(std::istream& in, double frame_rate = 20.0) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("dataio", "missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrajectoryHeader)
        throw FormatError("dataio", std::string("malformed header: expected '") + kTrajectoryHeader + "'");

    std::vector<Trajectory> out;
    std::map<std::string, bool> seen;
    std::size_t row = 1;  // header is row 1
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 5)
            throw FormatError("dataio", "row " + std::to_string(row) + ": expected 5 fields, got " +
                                            std::to_string(f.size()));
        const auto frame = detail::parse_number<std::int64_t>(f[1], row, "frame");
        const Point2 p{detail::parse_number<double>(f[2], row, "x"), detail::parse_number<double>(f[3], row, "y")};
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw FormatError("dataio", "row " + std::to_string(row) + ": non-finite coordinate");
        Condition cond;
        try {
            cond = parse_condition(f[4]);
        } catch (const Error&) {
            throw FormatError("dataio", "row " + std::to_string(row) + ": unknown condition '" + f[4] + "'");
        }
        if (out.empty() || out.back().cell_id != f[0]) {
            if (seen.count(f[0]))
                throw FormatError("dataio", "row " + std::to_string(row) + ": rows of cell '" + f[0] +
                                                "' are not contiguous");
            seen[f[0]] = true;
            Trajectory t;
            t.cell_id = f[0];
            t.condition = cond;
            t.first_frame = frame;
            t.frame_rate = frame_rate;
            out.push_back(std::move(t));
        } else {
            Trajectory& t = out.back();
            if (frame != t.frame(t.size()))
                throw FormatError("dataio", "row " + std::to_string(row) + ": frame " + std::to_string(frame) +
                                                " of cell '" + f[0] + "' does not follow frame " +
                                                std::to_string(t.frame(t.size() - 1)));
            if (cond != t.condition)
                throw FormatError("dataio", "row " + std::to_string(row) + ": condition changes within cell '" +
                                                f[0] + "'");
        }
        out.back().points.push_back(p);
    }
    for (const Trajectory& t : out)
        if (t.size() < 2) throw FormatError("dataio", "cell '" + t.cell_id + "' has fewer than 2 points");
    return out;
}

inline void save_trajectories(const std::vector<Trajectory>& trajs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("dataio", "cannot open " + path + " for writing");
    save_trajectories(trajs, out);
}

inline std::vector<Trajectory> load_trajectories(const std::string& path, double frame_rate = 20.0) {
    std::ifstream in(path);
    if (!in) throw FormatError("dataio", "cannot open " + path);
    return load_trajectories(in, frame_rate);
}

// ---------------------------------------------------------------------------
// Synthetic dataset

struct SyntheticConfig {
    // images
    std::size_t n_images = 2000;
    std::size_t image_size = 16;
    double radius_min = 0.15;  // blob radius as a fraction of image_size
    double radius_max = 0.3;
    double intensity_min = 0.6;
    double intensity_max = 1.0;
    double center_jitter = 0.1;  // max center offset, fraction of image_size

    // motion
    std::size_t n_cells = 10;
    std::size_t n_frames = 1000;
    double frame_rate = 20.0;
    std::size_t q = 3;
    std::size_t d = 2;
    std::vector<Eigen::MatrixXd> B;  // empty: random with the given spectral radius
    double spectral_radius = 0.95;
    double process_noise = 1.0;      // sd of v_t, pixels
    double observation_noise = 0.1;  // sd of u_t, pixels
    double canvas = 256.0;           // origins are drawn in [canvas/8, 7 canvas/8)^2
    Condition condition = Condition::Normal;

    std::uint64_t seed = 0;

    void validate() const {
        auto fail = [](const std::string& m) { throw InvalidArgument("dataio", m); };
        if (image_size < 4) fail("image size must be at least 4");
        if (!(radius_min > 0 && radius_min <= radius_max)) fail("invalid blob radius range");
        if (!(intensity_min >= 0 && intensity_min <= intensity_max && intensity_max <= 1))
            fail("invalid blob intensity range");
        if (!(center_jitter >= 0)) fail("center jitter must be non-negative");
        if (q < 1 || d < 1) fail("planted q and d must be positive");
        if (2 * n_cells < q) fail("planted q exceeds observation dimension 2 * n_cells");
        if (n_frames > 0 && n_frames < d + 2) fail("need at least d + 2 frames");
        if (!B.empty() && B.size() != d) fail("planted B must hold d matrices");
        for (const auto& b : B)
            if (b.rows() != static_cast<Eigen::Index>(q) || b.cols() != static_cast<Eigen::Index>(q))
                fail("planted B matrices must be q x q");
        if (!(process_noise >= 0 && observation_noise >= 0)) fail("noise levels must be non-negative");
        if (!(frame_rate > 0)) fail("frame rate must be positive");
        if (B.empty() && !(spectral_radius > 0 && spectral_radius < 1))
            fail("spectral radius must lie in (0, 1)");
    }
};

struct SyntheticDataset {
    ImageStack images;
    std::vector<Trajectory> trajectories;
    motion::ARModel planted;
};

/// Largest eigenvalue magnitude of the companion matrix of B_1..B_d.
inline double spectral_radius(const std::vector<Eigen::MatrixXd>& B) {
    if (B.empty()) return 0;
    const auto q = B[0].rows();
    const auto d = static_cast<Eigen::Index>(B.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(q * d, q * d);
    for (Eigen::Index i = 0; i < d; ++i) M.block(0, i * q, q, q) = B[static_cast<std::size_t>(i)];
    if (d > 1) M.bottomLeftCorner(q * (d - 1), q * (d - 1)).setIdentity();
    return Eigen::EigenSolver<Eigen::MatrixXd>(M, false).eigenvalues().cwiseAbs().maxCoeff();
}

/// Paints one blob I = A exp(-2 |p - c|^2 / r^2), a Gaussian with sd r / 2.
inline void paint_blob(ImageStack& s, std::size_t img, double cx, double cy, double r, double amp) {
    for (std::size_t row = 0; row < s.size(); ++row)
        for (std::size_t col = 0; col < s.size(); ++col) {
            const double dx = static_cast<double>(col) - cx;
            const double dy = static_cast<double>(row) - cy;
            s.set(img, row, col, amp * std::exp(-2.0 * (dx * dx + dy * dy) / (r * r)));
        }
}

inline SyntheticDataset make_synthetic_dataset(const SyntheticConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    SyntheticDataset out;

    const double s = static_cast<double>(cfg.image_size);
    out.images = ImageStack(cfg.n_images, cfg.image_size);
    for (std::size_t i = 0; i < cfg.n_images; ++i) {
        const double r = uniform(cfg.radius_min, cfg.radius_max) * s;
        const double amp = uniform(cfg.intensity_min, cfg.intensity_max);
        const double cx = (s - 1) / 2 + uniform(-cfg.center_jitter, cfg.center_jitter) * s;
        const double cy = (s - 1) / 2 + uniform(-cfg.center_jitter, cfg.center_jitter) * s;
        paint_blob(out.images, i, cx, cy, r, amp);
    }

    const auto q = static_cast<Eigen::Index>(cfg.q);
    const auto d = static_cast<Eigen::Index>(cfg.d);
    const auto p = static_cast<Eigen::Index>(2 * cfg.n_cells);
    std::vector<Eigen::MatrixXd> B = cfg.B;
    if (B.empty()) {
        for (Eigen::Index i = 0; i < d; ++i) {
            Eigen::MatrixXd b(q, q);
            for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = normal(rng) / std::sqrt(double(q * d));
            B.push_back(b);
        }
        const double scale = cfg.spectral_radius / spectral_radius(B);
        double f = 1;
        for (auto& b : B) b *= (f *= scale);
    }
    if (!(spectral_radius(B) < 1))
        throw InvalidArgument("dataio", "planted system is unstable (spectral radius " +
                                            std::to_string(spectral_radius(B)) + ")");

    motion::ARModel& m = out.planted;
    m.q = cfg.q;
    m.d = cfg.d;
    m.condition = cfg.condition;
    Eigen::MatrixXd A(p, q);
    for (Eigen::Index k = 0; k < A.size(); ++k) A.data()[k] = normal(rng);
    m.C = Eigen::HouseholderQR<Eigen::MatrixXd>(A).householderQ() * Eigen::MatrixXd::Identity(p, q);
    m.mean = Eigen::VectorXd::Zero(p);
    m.B = B;
    m.state_cov = cfg.process_noise * cfg.process_noise * Eigen::MatrixXd::Identity(q, q);
    m.obs_var = Eigen::VectorXd::Constant(p, cfg.observation_noise * cfg.observation_noise);

    // Seed states scaled like the process so the series starts near its
    // stationary spread.
    const auto T = static_cast<Eigen::Index>(cfg.n_frames);
    Eigen::MatrixXd X(q, T);
    const double seed_sd = cfg.process_noise > 0 ? cfg.process_noise : 1.0;
    for (Eigen::Index t = 0; t < std::min(d, T); ++t)
        for (Eigen::Index r = 0; r < q; ++r) X(r, t) = seed_sd * normal(rng);
    if (T > d) {
        std::mt19937_64 noise_rng(rng());
        X = motion::synthesize_states(m, cfg.n_frames, Eigen::MatrixXd(X.leftCols(d)), noise_rng, 1.0);
    }
    m.states = X;

    out.trajectories.resize(cfg.n_cells);
    for (std::size_t c = 0; c < cfg.n_cells; ++c) {
        Trajectory& t = out.trajectories[c];
        t.cell_id = "cell" + std::to_string(c);
        t.condition = cfg.condition;
        t.frame_rate = cfg.frame_rate;
        const Point2 origin{uniform(cfg.canvas / 8, cfg.canvas * 7 / 8), uniform(cfg.canvas / 8, cfg.canvas * 7 / 8)};
        for (Eigen::Index f = 0; f < T; ++f) {
            const Eigen::Index rx = static_cast<Eigen::Index>(2 * c), ry = rx + 1;
            const double yx = m.C.row(rx).dot(X.col(f)) + cfg.observation_noise * normal(rng);
            const double yy = m.C.row(ry).dot(X.col(f)) + cfg.observation_noise * normal(rng);
            t.points.push_back({origin.x + yx, origin.y + yy});
        }
    }
    return out;
}

}  // namespace neutrosim::data
