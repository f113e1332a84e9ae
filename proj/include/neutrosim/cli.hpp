#pragma once

// The `neutrosim` command line: one subcommand per pipeline stage plus
// `pipeline`, which runs them all. Exit codes: 0 success, 1 usage error,
// 2 data or numeric error. Logs go to the error stream; results go to files.

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "neutrosim/compositor.hpp"
#include "neutrosim/dataio.hpp"
#include "neutrosim/gan.hpp"
#include "neutrosim/gan_eval.hpp"
#include "neutrosim/motion_ar.hpp"

namespace neutrosim::cli {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// "lo:hi" or a single value "v".
inline motion::Range parse_range(const std::string& text) {
    auto number = [&](const std::string& s) {
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
            throw UsageError("bad range '" + text + "' (expected lo:hi)");
        return v;
    };
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        const std::size_t v = number(text);
        return {v, v};
    }
    motion::Range r{number(text.substr(0, colon)), number(text.substr(colon + 1))};
    if (r.lo == 0 || r.lo > r.hi) throw UsageError("bad range '" + text + "'");
    return r;
}

/// Flat "key = value" file; '#' starts a comment line.
inline std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
            throw UsageError(path + ":" + std::to_string(n) + ": expected key = value");
        kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

class Log {
public:
    explicit Log(std::ostream& err) : err_(err) {}
    void operator()(const std::string& msg) const { err_ << "neutrosim: " << msg << '\n' << std::flush; }

private:
    std::ostream& err_;
};

// ---------------------------------------------------------------------------
// Stages. Each writes its outputs and returns nothing; errors propagate.

struct GenDataOptions {
    std::string out_dir;
    data::SyntheticConfig config;
};

inline void gen_data(const GenDataOptions& o, const Log& log) {
    log("gen-data: seed=" + std::to_string(o.config.seed));
    fs::create_directories(o.out_dir);
    const data::SyntheticDataset ds = data::make_synthetic_dataset(o.config);
    data::save_image_stack(ds.images, (fs::path(o.out_dir) / "images.nimg").string());
    data::save_trajectories(ds.trajectories, (fs::path(o.out_dir) / "trajectories.csv").string());
    motion::save_model(ds.planted, (fs::path(o.out_dir) / "planted.narm").string());
    log("gen-data: " + std::to_string(ds.images.count()) + " images, " +
        std::to_string(ds.trajectories.size()) + " trajectories -> " + o.out_dir);
}

struct TrainGanOptions {
    std::string images;
    std::string out;
    std::string critic_out;
    std::string history;
    std::string loss = "wgan_gp";
    std::size_t nz = 100;
    std::size_t steps = 1000;
    std::size_t batch = 64;
    std::size_t channels = 64;
    std::optional<double> lr, beta1, beta2, clip, lambda;
    std::optional<std::size_t> critic_steps;
    std::uint64_t seed = 0;
};

inline gan::GanConfig gan_config(const TrainGanOptions& o, std::size_t image_size) {
    gan::GanConfig c = gan::GanConfig::defaults(gan::parse_loss(o.loss));
    c.nz = o.nz;
    c.image_size = image_size;
    c.total_steps = o.steps;
    c.batch_size = o.batch;
    c.gen_channels = c.critic_channels = o.channels;
    c.seed = o.seed;
    if (o.lr) c.learning_rate = *o.lr;
    if (o.beta1) c.beta1 = *o.beta1;
    if (o.beta2) c.beta2 = *o.beta2;
    if (o.critic_steps) c.critic_steps = *o.critic_steps;
    if (o.clip) {
        if (c.loss != gan::LossKind::WganClip) throw UsageError("--clip only applies to wgan_clip");
        c.clip_c = o.clip;
    }
    if (o.lambda) {
        if (c.loss != gan::LossKind::WganGp) throw UsageError("--lambda only applies to wgan_gp");
        c.lambda = o.lambda;
    }
    return c;
}

inline void write_history(const gan::History& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cli", "cannot open " + path + " for writing");
    out.precision(17);
    out << "step,critic_loss,gradient_penalty,generator_loss\n";
    for (const auto& r : h)
        out << r.step << ',' << r.critic_loss << ',' << r.gradient_penalty << ',' << r.generator_loss << '\n';
}

inline void train_gan(const TrainGanOptions& o, const Log& log) {
    log("train-gan: seed=" + std::to_string(o.seed));
    const data::ImageStack stack = data::load_image_stack(o.images);
    const gan::GanConfig c = gan_config(o, stack.size());
    log("train-gan: " + std::string(gan::loss_name(c.loss)) + " on " + std::to_string(stack.count()) +
        " images of " + std::to_string(stack.size()) + "x" + std::to_string(stack.size()) + ", " +
        std::to_string(c.total_steps) + " steps");
    const gan::TrainResult r = gan::train(stack.tensor(), c);
    gan::save_checkpoint(r.generator, o.out);
    if (!o.critic_out.empty()) gan::save_checkpoint(r.critic, o.critic_out);
    if (!o.history.empty()) write_history(r.history, o.history);
    log("train-gan: generator -> " + o.out);
}

struct EvalGanOptions {
    std::string generator;
    std::string images;
    std::string out;
    std::size_t first = 0;
    std::size_t count = 100;
    std::size_t iters = 50;
    std::size_t restarts = 3;
    std::uint64_t seed = 0;
};

inline eval::ReconstructionReport eval_gan(const EvalGanOptions& o, const Log& log) {
    log("eval-gan: seed=" + std::to_string(o.seed));
    const gan::NetworkParams g = gan::load_checkpoint(o.generator);
    const data::ImageStack stack = data::load_image_stack(o.images);
    if (o.first >= stack.count()) throw InvalidArgument("cli", "--first beyond the image stack");
    const std::size_t n = std::min(o.count, stack.count() - o.first);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(o.first + i));
    eval::ReportOptions ro{o.iters, o.restarts, o.seed};
    const auto rep = eval::reconstruction_report(g, stack.batch(o.first, n), ro, ids);
    std::ofstream out(o.out);
    if (!out) throw FormatError("cli", "cannot open " + o.out + " for writing");
    eval::write_report(rep, out);
    std::ostringstream msg;
    msg << "eval-gan: " << n << " images, mean l2 " << rep.mean_l2 << ", mean nll " << rep.mean_nll
        << " (prior " << rep.prior_mean_nll << " +- " << 3 * rep.prior_std_nll << ")";
    log(msg.str());
    return rep;
}

struct WalkOptions {
    std::string generator;
    std::string out;
    std::size_t points = 10;
    std::size_t steps = 8;
    std::uint64_t seed = 0;
};

inline void walk(const WalkOptions& o, const Log& log) {
    log("walk: seed=" + std::to_string(o.seed));
    const gan::NetworkParams g = gan::load_checkpoint(o.generator);
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Tensor> pts;
    for (std::size_t i = 0; i < o.points; ++i) {
        Tensor z(Shape{gan::latent_dim(g)});
        for (auto& v : z.data()) v = normal(rng);
        pts.push_back(std::move(z));
    }
    write_pgm(eval::tile_walk(eval::latent_walk(g, pts, o.steps)), o.out);
    log("walk: " + std::to_string(o.points) + " x " + std::to_string(o.steps) + " grid -> " + o.out);
}

struct FitArOptions {
    std::vector<std::string> in;  // one trajectory file per video
    bool concat_videos = false;   // pool cells across all inputs
    std::string out;
    std::string scores;
    std::string q = "2:10";
    std::string d = "1:10";
    std::string condition = "normal";
    double train_fraction = 0.8;
};

inline void write_scores(const motion::GridResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cli", "cannot open " + path + " for writing");
    out.precision(17);
    out << "q,d,ok,train_score,heldout_score,heldout_se,selected\n";
    for (const auto& c : r.cells)
        out << c.q << ',' << c.d << ',' << c.ok << ',' << c.train_score << ',' << c.heldout_score << ','
            << c.heldout_se << ',' << (c.q == r.q && c.d == r.d) << '\n';
}

inline motion::GridResult fit_ar(const FitArOptions& o, const Log& log) {
    const motion::Range qr = parse_range(o.q), dr = parse_range(o.d);
    if (o.in.empty()) throw UsageError("fit-ar needs at least one --in file");
    if (o.in.size() > 1 && !o.concat_videos)
        throw UsageError("fit-ar pools one video at a time; pass --concat-videos to pool " +
                         std::to_string(o.in.size()) + " inputs");
    std::vector<Trajectory> trajs;
    for (const std::string& path : o.in) {
        const auto part = data::load_trajectories(path);
        trajs.insert(trajs.end(), part.begin(), part.end());
    }
    const auto obs = motion::pool_trajectories(trajs, parse_condition(o.condition));
    log("fit-ar: " + std::to_string(obs.cells) + " cells x " + std::to_string(obs.frames()) +
        " frames, q " + o.q + ", d " + o.d);
    const auto r = motion::grid_search(obs, qr, dr, o.train_fraction);
    motion::save_model(r.model, o.out);
    if (!o.scores.empty()) write_scores(r, o.scores);
    log("fit-ar: selected q=" + std::to_string(r.q) + " d=" + std::to_string(r.d) + " -> " + o.out);
    return r;
}

struct SynthOptions {
    std::string model;
    std::string out;
    std::size_t frames = 60;
    double canvas = 256;
    double noise_scale = 1.0;
    double fps = 20;
    std::uint64_t seed = 0;
};

inline void synth(const SynthOptions& o, const Log& log) {
    log("synth: seed=" + std::to_string(o.seed));
    const motion::ARModel m = motion::load_model(o.model);
    std::mt19937_64 rng(o.seed);
    const Eigen::MatrixXd X = motion::synthesize_states(m, o.frames, std::nullopt, rng, o.noise_scale);
    std::uniform_real_distribution<double> place(o.canvas / 8, 7 * o.canvas / 8);
    std::vector<Point2> origins(m.cells());
    for (Point2& p : origins) p = {place(rng), place(rng)};
    const auto trajs = motion::states_to_trajectory(X, m, origins, o.fps);
    data::save_trajectories(trajs, o.out);
    log("synth: " + std::to_string(trajs.size()) + " trajectories of " + std::to_string(o.frames) +
        " frames -> " + o.out);
}

struct HistogramOptions {
    std::string model;
    std::string out;
    std::size_t components = 3;
    std::size_t bins = 20;
};

/// Histograms of the leading state components of a fitted model, one row
/// per bin. A q = 3 fit and the top three of a larger fit are both covered
/// by choosing the model.
inline void pc_hist(const HistogramOptions& o, const Log& log) {
    const motion::ARModel m = motion::load_model(o.model);
    if (o.components == 0 || o.components > m.q)
        throw UsageError("--components must lie in 1.." + std::to_string(m.q));
    std::ofstream out(o.out);
    if (!out) throw FormatError("cli", "cannot open " + o.out + " for writing");
    out.precision(17);
    out << "component,lo,hi,count\n";
    for (std::size_t k = 0; k < o.components; ++k) {
        const motion::Histogram h = motion::pc_histogram(m.states, k, o.bins);
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            out << k << ',' << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
    }
    log("pc-hist: " + std::to_string(o.components) + " of " + std::to_string(m.q) + " components, " +
        std::to_string(o.bins) + " bins -> " + o.out);
}

struct CompositeOptions {
    std::string generator;
    std::string trajectories;
    std::string out_dir;
    std::size_t frames = 60;
    double fps = 20;
    std::size_t width = 256;
    std::size_t height = 256;
    std::size_t actors = 5;  // 0: one per trajectory
    double threshold = 0.1;
    double background = 0.15;
    double background_noise = 0.02;
    bool evolve = false;  // sprites follow a latent walk across the clip
    std::uint64_t seed = 0;
};

inline comp::Scene build_scene(const CompositeOptions& o, const gan::NetworkParams& g,
                               const std::vector<Trajectory>& trajs) {
    const std::size_t n = o.actors == 0 ? trajs.size() : o.actors;
    if (n > trajs.size())
        throw InvalidArgument("cli", "requested " + std::to_string(n) + " actors but only " +
                                         std::to_string(trajs.size()) + " trajectories");
    comp::Scene scene;
    scene.background = comp::make_background(o.height, o.width, o.background, o.background_noise, o.seed);
    scene.frame_rate = o.fps;
    scene.empty_frames = o.frames;
    std::mt19937_64 rng(o.seed + 1), walk_rng(o.seed + 2);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t a = 0; a < n; ++a) {
        if (trajs[a].size() < o.frames)
            throw InvalidArgument("cli", "trajectory " + trajs[a].cell_id + " has fewer than " +
                                             std::to_string(o.frames) + " frames");
        Tensor z(Shape{gan::latent_dim(g)});
        for (auto& v : z.data()) v = normal(rng);
        comp::Actor actor{comp::sprite_from_generator(g, z, o.threshold), trajs[a], {}};
        actor.trajectory.points.resize(o.frames);
        if (o.evolve) {
            Tensor z1(z.shape());
            for (auto& v : z1.data()) v = normal(walk_rng);
            actor.evolving = comp::sprite_walk(g, z, z1, o.frames, o.threshold);
        }
        scene.actors.push_back(std::move(actor));
    }
    return scene;
}

inline void composite(const CompositeOptions& o, const Log& log) {
    log("composite: seed=" + std::to_string(o.seed));
    const gan::NetworkParams g = gan::load_checkpoint(o.generator);
    const comp::Scene scene = build_scene(o, g, data::load_trajectories(o.trajectories, o.fps));
    comp::write_frames(comp::render_sequence(scene), o.fps, o.out_dir);
    std::ostringstream msg;
    msg << "composite: " << o.frames << " frames at " << o.fps << " fps, " << scene.actors.size()
        << " actors -> " << o.out_dir;
    log(msg.str());
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineOptions {
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t images = 2000;
    std::size_t image_size = 16;
    std::size_t cells = 10;
    std::size_t track_frames = 1000;
    std::string loss = "vanilla";
    std::size_t gan_steps = 3000;
    std::size_t nz = 32;
    std::size_t channels = 16;
    std::size_t batch = 64;
    std::size_t eval_count = 20;
    std::string q = "2:10";
    std::string d = "1:10";
    std::size_t frames = 60;
    double fps = 20;
    std::size_t canvas = 256;
    std::size_t actors = 5;
    double threshold = 0.1;
};

namespace detail {

/// Reads a comma-separated table back and checks its header and row widths.
inline std::size_t check_table(const std::string& path, const std::string& header) {
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line) || line != header) throw FormatError("cli", path + ": unexpected header");
    const auto width = std::count(header.begin(), header.end(), ',');
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (std::count(line.begin(), line.end(), ',') != width)
            throw FormatError("cli", path + ": malformed row " + std::to_string(rows + 2));
        ++rows;
    }
    return rows;
}

}  // namespace detail

inline void pipeline(const PipelineOptions& o, const Log& log) {
    log("pipeline: seed=" + std::to_string(o.seed));
    const fs::path root(o.out_dir);
    auto at = [&](const std::string& rel) {
        fs::create_directories((root / rel).parent_path());
        return (root / rel).string();
    };

    GenDataOptions gd;
    gd.out_dir = at("data/.");
    gd.config.n_images = o.images;
    gd.config.image_size = o.image_size;
    gd.config.n_cells = o.cells;
    gd.config.n_frames = o.track_frames;
    gd.config.canvas = double(o.canvas);
    gd.config.frame_rate = o.fps;
    gd.config.seed = o.seed;
    gen_data(gd, log);

    TrainGanOptions tg;
    tg.images = at("data/images.nimg");
    tg.out = at("gan/generator.ngan");
    tg.critic_out = at("gan/critic.ngan");
    tg.history = at("gan/history.csv");
    tg.loss = o.loss;
    tg.nz = o.nz;
    tg.steps = o.gan_steps;
    tg.batch = o.batch;
    tg.channels = o.channels;
    tg.seed = o.seed;
    train_gan(tg, log);

    EvalGanOptions eg;
    eg.generator = tg.out;
    eg.images = tg.images;
    eg.out = at("eval/report.csv");
    eg.count = o.eval_count;
    eg.seed = o.seed;
    eval_gan(eg, log);

    WalkOptions wk;
    wk.generator = tg.out;
    wk.out = at("walk/walk.pgm");
    wk.seed = o.seed;
    walk(wk, log);

    FitArOptions fa;
    fa.in = {at("data/trajectories.csv")};
    fa.out = at("ar/model.narm");
    fa.scores = at("ar/scores.csv");
    fa.q = o.q;
    fa.d = o.d;
    fa.condition = condition_name(gd.config.condition);
    fit_ar(fa, log);

    SynthOptions sy;
    sy.model = fa.out;
    sy.out = at("synth/trajectories.csv");
    sy.frames = o.frames;
    sy.canvas = double(o.canvas);
    sy.fps = o.fps;
    sy.seed = o.seed;
    synth(sy, log);

    CompositeOptions co;
    co.generator = tg.out;
    co.trajectories = sy.out;
    co.out_dir = at("frames/.");
    co.frames = o.frames;
    co.fps = o.fps;
    co.width = co.height = o.canvas;
    co.actors = o.actors;
    co.threshold = o.threshold;
    co.seed = o.seed;
    composite(co, log);

    // Every artifact must parse back through its loader.
    data::load_image_stack(tg.images);
    data::load_trajectories(fa.in.front());
    data::load_trajectories(sy.out);
    motion::load_model(at("data/planted.narm"));
    motion::load_model(fa.out);
    gan::load_checkpoint(tg.out);
    gan::load_checkpoint(tg.critic_out);
    detail::check_table(tg.history, "step,critic_loss,gradient_penalty,generator_loss");
    detail::check_table(eg.out, "id,l2_error,nll");
    detail::check_table(fa.scores, "q,d,ok,train_score,heldout_score,heldout_se,selected");
    read_pgm(wk.out);
    const comp::FrameIndex idx = comp::read_frame_index(co.out_dir);
    for (const auto& f : idx.files) {
        const Image img = read_pgm((fs::path(co.out_dir) / f).string());
        if (img.width != o.canvas || img.height != o.canvas) throw FormatError("cli", f + ": wrong frame size");
    }
    log("pipeline: all artifacts verified under " + o.out_dir);
}

// ---------------------------------------------------------------------------
// dispatch

namespace detail {

/// Applies config-file values to options of `sub` not given on the command line.
inline void apply_config(CLI::App& sub, const std::string& path) {
    for (const auto& [key, value] : read_config(path)) {
        CLI::Option* opt = sub.get_option_no_throw("--" + key);
        if (!opt || key == "config") throw UsageError(path + ": unknown key '" + key + "' for " + sub.get_name());
        if (opt->count() == 0) {
            opt->add_result(value);
            opt->run_callback();
        }
    }
}

}  // namespace detail

inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    const Log log(err);
    CLI::App app{"neutrosim: cell appearance and motion simulator"};
    app.name("neutrosim");
    app.require_subcommand(0, 1);

    std::string config;
    auto add_common = [&](CLI::App* s) {
        s->add_option("--config", config, "flat key = value file; flags override it");
    };

    GenDataOptions gd;
    auto* s_gen = app.add_subcommand("gen-data", "write a synthetic blob image stack, trajectories and planted model");
    add_common(s_gen);
    std::string gd_condition = "normal";
    s_gen->add_option("--out-dir", gd.out_dir)->required();
    s_gen->add_option("--images", gd.config.n_images);
    s_gen->add_option("--image-size", gd.config.image_size);
    s_gen->add_option("--cells", gd.config.n_cells);
    s_gen->add_option("--frames", gd.config.n_frames);
    s_gen->add_option("--q", gd.config.q);
    s_gen->add_option("--d", gd.config.d);
    s_gen->add_option("--spectral-radius", gd.config.spectral_radius);
    s_gen->add_option("--process-noise", gd.config.process_noise);
    s_gen->add_option("--observation-noise", gd.config.observation_noise);
    s_gen->add_option("--canvas", gd.config.canvas);
    s_gen->add_option("--condition", gd_condition);
    s_gen->add_option("--seed", gd.config.seed);

    TrainGanOptions tg;
    auto* s_train = app.add_subcommand("train-gan", "train a generator/critic pair on an image stack");
    add_common(s_train);
    s_train->add_option("--images", tg.images)->required();
    s_train->add_option("--out", tg.out)->required();
    s_train->add_option("--critic-out", tg.critic_out);
    s_train->add_option("--history", tg.history);
    s_train->add_option("--loss", tg.loss)->check(CLI::IsMember({"vanilla", "wgan_clip", "wgan_gp"}));
    s_train->add_option("--nz", tg.nz);
    s_train->add_option("--steps", tg.steps);
    s_train->add_option("--batch", tg.batch);
    s_train->add_option("--channels", tg.channels);
    s_train->add_option("--lr", tg.lr);
    s_train->add_option("--beta1", tg.beta1);
    s_train->add_option("--beta2", tg.beta2);
    s_train->add_option("--critic-steps", tg.critic_steps);
    s_train->add_option("--clip", tg.clip);
    s_train->add_option("--lambda", tg.lambda);
    s_train->add_option("--seed", tg.seed);

    EvalGanOptions eg;
    auto* s_eval = app.add_subcommand("eval-gan", "reconstruct test images and write the l2/nll table");
    add_common(s_eval);
    s_eval->add_option("--gen", eg.generator)->required();
    s_eval->add_option("--images", eg.images)->required();
    s_eval->add_option("--out", eg.out)->required();
    s_eval->add_option("--first", eg.first);
    s_eval->add_option("--count", eg.count);
    s_eval->add_option("--iters", eg.iters);
    s_eval->add_option("--restarts", eg.restarts);
    s_eval->add_option("--seed", eg.seed);

    WalkOptions wk;
    auto* s_walk = app.add_subcommand("walk", "latent interpolation grid as a PGM image");
    add_common(s_walk);
    s_walk->add_option("--gen", wk.generator)->required();
    s_walk->add_option("--out", wk.out)->required();
    s_walk->add_option("--points", wk.points);
    s_walk->add_option("--steps", wk.steps);
    s_walk->add_option("--seed", wk.seed);

    FitArOptions fa;
    auto* s_fit = app.add_subcommand("fit-ar", "grid-search an SVD + AR motion model");
    add_common(s_fit);
    s_fit->add_option("--in", fa.in, "trajectory file; repeat to pool videos with --concat-videos")->required();
    s_fit->add_flag("--concat-videos", fa.concat_videos);
    s_fit->add_option("--out", fa.out)->required();
    s_fit->add_option("--scores", fa.scores);
    s_fit->add_option("--q", fa.q, "range lo:hi");
    s_fit->add_option("--d", fa.d, "range lo:hi");
    s_fit->add_option("--condition", fa.condition);
    s_fit->add_option("--train-fraction", fa.train_fraction);

    SynthOptions sy;
    auto* s_synth = app.add_subcommand("synth", "synthesize trajectories from a fitted motion model");
    add_common(s_synth);
    s_synth->add_option("--model", sy.model)->required();
    s_synth->add_option("--out", sy.out)->required();
    s_synth->add_option("--frames", sy.frames);
    s_synth->add_option("--canvas", sy.canvas);
    s_synth->add_option("--noise-scale", sy.noise_scale);
    s_synth->add_option("--fps", sy.fps);
    s_synth->add_option("--seed", sy.seed);

    HistogramOptions ho;
    auto* s_hist = app.add_subcommand("pc-hist", "histogram table of the leading state components of a model");
    add_common(s_hist);
    s_hist->add_option("--model", ho.model)->required();
    s_hist->add_option("--out", ho.out)->required();
    s_hist->add_option("--components", ho.components);
    s_hist->add_option("--bins", ho.bins);

    CompositeOptions co;
    auto* s_comp = app.add_subcommand("composite", "render generated sprites along trajectories to PGM frames");
    add_common(s_comp);
    s_comp->add_option("--gen", co.generator)->required();
    s_comp->add_option("--traj", co.trajectories)->required();
    s_comp->add_option("--out-dir", co.out_dir)->required();
    s_comp->add_option("--frames", co.frames);
    s_comp->add_option("--fps", co.fps);
    s_comp->add_option("--width", co.width);
    s_comp->add_option("--height", co.height);
    s_comp->add_option("--actors", co.actors);
    s_comp->add_option("--threshold", co.threshold);
    s_comp->add_option("--background", co.background);
    s_comp->add_option("--background-noise", co.background_noise);
    s_comp->add_flag("--evolve", co.evolve, "sprites morph along a latent walk");
    s_comp->add_option("--seed", co.seed);

    PipelineOptions po;
    auto* s_pipe = app.add_subcommand("pipeline", "run every stage end to end on synthetic data");
    add_common(s_pipe);
    s_pipe->add_option("--out-dir", po.out_dir)->required();
    s_pipe->add_option("--seed", po.seed);
    s_pipe->add_option("--images", po.images);
    s_pipe->add_option("--image-size", po.image_size);
    s_pipe->add_option("--cells", po.cells);
    s_pipe->add_option("--track-frames", po.track_frames);
    s_pipe->add_option("--loss", po.loss)->check(CLI::IsMember({"vanilla", "wgan_clip", "wgan_gp"}));
    s_pipe->add_option("--gan-steps", po.gan_steps);
    s_pipe->add_option("--nz", po.nz);
    s_pipe->add_option("--channels", po.channels);
    s_pipe->add_option("--batch", po.batch);
    s_pipe->add_option("--eval-count", po.eval_count);
    s_pipe->add_option("--q", po.q);
    s_pipe->add_option("--d", po.d);
    s_pipe->add_option("--frames", po.frames);
    s_pipe->add_option("--fps", po.fps);
    s_pipe->add_option("--canvas", po.canvas);
    s_pipe->add_option("--actors", po.actors);
    s_pipe->add_option("--threshold", po.threshold);

    if (argc <= 1) {
        err << app.help();
        return 1;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "neutrosim: " << e.what() << '\n';
        return 1;
    }
    if (app.get_subcommands().empty()) {
        err << app.help();
        return 1;
    }
    CLI::App* sub = app.get_subcommands().front();

    try {
        if (!config.empty()) detail::apply_config(*sub, config);
        if (sub == s_gen) {
            gd.config.condition = parse_condition(gd_condition);
            gen_data(gd, log);
        } else if (sub == s_train) {
            train_gan(tg, log);
        } else if (sub == s_eval) {
            eval_gan(eg, log);
        } else if (sub == s_walk) {
            walk(wk, log);
        } else if (sub == s_fit) {
            fit_ar(fa, log);
        } else if (sub == s_synth) {
            synth(sy, log);
        } else if (sub == s_hist) {
            pc_hist(ho, log);
        } else if (sub == s_comp) {
            composite(co, log);
        } else if (sub == s_pipe) {
            pipeline(po, log);
        }
    } catch (const UsageError& e) {
        err << "neutrosim: " << e.what() << '\n';
        return 1;
    } catch (const CLI::ParseError& e) {
        err << "neutrosim: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "neutrosim: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "neutrosim: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace neutrosim::cli
