#pragma once

// DCGAN-style generator and critic with three training objectives: the
// original minimax GAN (non-saturating generator loss), WGAN with critic
// weight clipping, and WGAN with an input-gradient penalty.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "neutrosim/autodiff.hpp"
#include "neutrosim/error.hpp"
#include "neutrosim/network.hpp"
#include "neutrosim/tensor.hpp"

namespace neutrosim::gan {

enum class LossKind { Vanilla, WganClip, WganGp };

inline const char* loss_name(LossKind k) {
    switch (k) {
    case LossKind::Vanilla: return "vanilla";
    case LossKind::WganClip: return "wgan_clip";
    case LossKind::WganGp: return "wgan_gp";
    }
    return "?";
}

inline LossKind parse_loss(const std::string& s) {
    if (s == "vanilla") return LossKind::Vanilla;
    if (s == "wgan_clip") return LossKind::WganClip;
    if (s == "wgan_gp") return LossKind::WganGp;
    throw InvalidArgument("gan", "unknown loss kind '" + s + "'");
}

struct GanConfig {
    LossKind loss = LossKind::WganGp;
    std::size_t nz = 100;
    std::size_t image_size = 64;
    std::optional<double> clip_c;   // wgan_clip only
    std::optional<double> lambda;   // wgan_gp only
    std::size_t critic_steps = 5;   // critic updates per generator update
    double learning_rate = 1e-4;
    double beta1 = 0.0;
    double beta2 = 0.9;
    double epsilon = 1e-8;
    std::size_t batch_size = 64;
    std::size_t total_steps = 0;    // generator updates
    std::uint64_t seed = 0;
    std::size_t gen_channels = 64;     // channels entering the output layer
    std::size_t critic_channels = 64;  // channels after the first critic layer

    /// Conventional settings for each objective.
    static GanConfig defaults(LossKind kind) {
        GanConfig c;
        c.loss = kind;
        switch (kind) {
        case LossKind::Vanilla:
            c.critic_steps = 1;
            c.learning_rate = 2e-4;
            c.beta1 = 0.5;
            c.beta2 = 0.999;
            break;
        case LossKind::WganClip:
            c.clip_c = 0.01;
            c.learning_rate = 5e-5;
            c.beta1 = 0.0;
            c.beta2 = 0.9;
            break;
        case LossKind::WganGp:
            c.lambda = 10.0;
            c.learning_rate = 1e-4;
            c.beta1 = 0.0;
            c.beta2 = 0.9;
            break;
        }
        return c;
    }

    void validate() const {
        if (nz == 0) throw InvalidArgument("gan", "latent dimension must be positive");
        if (batch_size == 0) throw InvalidArgument("gan", "batch size must be positive");
        if (critic_steps == 0) throw InvalidArgument("gan", "critic steps must be positive");
        if (!(learning_rate > 0)) throw InvalidArgument("gan", "learning rate must be positive");
        if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
            throw InvalidArgument("gan", "Adam betas must lie in [0, 1)");
        if (loss == LossKind::WganClip && !(clip_c && *clip_c > 0))
            throw InvalidArgument("gan", "wgan_clip requires clip_c > 0");
        if (loss == LossKind::WganGp && !(lambda && *lambda > 0))
            throw InvalidArgument("gan", "wgan_gp requires lambda > 0");
    }
};

namespace detail {

inline std::size_t log2_exact(std::size_t s) {
    return static_cast<std::size_t>(std::countr_zero(s));
}

inline void check_image_size(std::size_t s) {
    if (s != 16 && s != 32 && s != 64)
        throw InvalidArgument("gan", "unsupported image size " + std::to_string(s) +
                                         " (expected 16, 32 or 64)");
}

}  // namespace detail

/// Transposed-convolution stack: a 4x4 projection of z followed by
/// log2(s) - 2 stride-2 upsampling stages; tanh output. Channels halve per
/// stage, ending at `gen_channels` before the single-channel output layer.
inline Architecture generator_architecture(const GanConfig& config) {
    detail::check_image_size(config.image_size);
    if (config.nz == 0 || config.gen_channels == 0)
        throw InvalidArgument("gan", "latent dimension and channels must be positive");
    const std::size_t ups = detail::log2_exact(config.image_size) - 2;
    Architecture a;
    a.role = "generator";
    a.input = {1, 1, config.nz};
    a.output = {1, config.image_size, config.image_size};
    std::size_t ch = config.gen_channels << (ups - 1);
    a.layers.push_back({LayerKind::ConvTranspose, config.nz, ch, 4, 1, 0, Activation::LeakyRelu, 0.0});
    for (std::size_t i = 1; i < ups; ++i) {
        a.layers.push_back({LayerKind::ConvTranspose, ch, ch / 2, 4, 2, 1, Activation::LeakyRelu, 0.0});
        ch /= 2;
    }
    a.layers.push_back({LayerKind::ConvTranspose, ch, 1, 4, 2, 1, Activation::Tanh, 0.0});
    return a;
}

/// Strided-convolution stack down to 4x4, then a 4x4 valid convolution to
/// one unnormalized score. No normalization layers: the gradient penalty
/// needs per-sample gradients.
inline Architecture critic_architecture(const GanConfig& config) {
    detail::check_image_size(config.image_size);
    if (config.critic_channels == 0) throw InvalidArgument("gan", "channels must be positive");
    const std::size_t downs = detail::log2_exact(config.image_size) - 2;
    Architecture a;
    a.role = "critic";
    a.input = {config.image_size, config.image_size, 1};
    a.output = {1};
    std::size_t ch = config.critic_channels;
    a.layers.push_back({LayerKind::Conv, 1, ch, 4, 2, 1, Activation::LeakyRelu, 0.2});
    for (std::size_t i = 1; i < downs; ++i) {
        a.layers.push_back({LayerKind::Conv, ch, ch * 2, 4, 2, 1, Activation::LeakyRelu, 0.2});
        ch *= 2;
    }
    a.layers.push_back({LayerKind::Conv, ch, 1, 4, 1, 0, Activation::None, 0.2});
    return a;
}

inline NetworkParams build_generator(const GanConfig& config, std::uint64_t seed) {
    return NetworkParams::init(generator_architecture(config), seed, 0.02);
}

inline NetworkParams build_critic(const GanConfig& config, std::uint64_t seed) {
    return NetworkParams::init(critic_architecture(config), seed, 0.02);
}

inline std::size_t latent_dim(const NetworkParams& g) { return numel(g.arch.input); }

/// G(z) for a batch of latent rows: [b, nz] -> [b, ...output] (for the
/// DCGAN generator, [b, 1, s, s]).
inline Tensor generate(const NetworkParams& g, const Tensor& z_batch) {
    if (z_batch.rank() != 2 || z_batch.dim(1) != latent_dim(g))
        throw InvalidArgument("gan", "latent batch of shape " + to_string(z_batch.shape()) +
                                         " does not match latent dimension " +
                                         std::to_string(latent_dim(g)));
    if (!z_batch.all_finite()) throw NumericError("gan", "non-finite latent vector");
    return run(g, z_batch);
}

// ---------------------------------------------------------------------------
// Losses on critic outputs. For vanilla, inputs are probabilities
// D(x) in (0, 1); for the Wasserstein kinds, unconstrained scores.

namespace detail {

inline double batch_mean(const Tensor& t) {
    double s = 0;
    for (double v : t.data()) s += v;
    return s / static_cast<double>(t.size());
}

inline void check_scores(const Tensor& t, LossKind kind) {
    if (t.size() == 0) throw InvalidArgument("gan", "empty batch");
    if (!t.all_finite()) throw NumericError("gan", "non-finite critic output");
    if (kind == LossKind::Vanilla)
        for (double v : t.data())
            if (!(v > 0.0 && v < 1.0))
                throw InvalidArgument("gan", "vanilla loss needs probabilities in (0, 1), got " +
                                                 std::to_string(v));
}

}  // namespace detail

/// Loss minimized by the critic.
/// vanilla: -(mean log D(real) + mean log(1 - D(fake)));
/// wasserstein: mean D(fake) - mean D(real).
inline double loss_discriminator(const Tensor& d_real, const Tensor& d_fake, LossKind kind) {
    detail::check_scores(d_real, kind);
    detail::check_scores(d_fake, kind);
    if (kind == LossKind::Vanilla) {
        double lr = 0, lf = 0;
        for (double v : d_real.data()) lr += std::log(v);
        for (double v : d_fake.data()) lf += std::log1p(-v);
        return -(lr / static_cast<double>(d_real.size()) + lf / static_cast<double>(d_fake.size()));
    }
    return detail::batch_mean(d_fake) - detail::batch_mean(d_real);
}

/// Loss minimized by the generator: -mean log D(fake) (non-saturating) for
/// vanilla, -mean D(fake) for the Wasserstein kinds.
inline double loss_generator(const Tensor& d_fake, LossKind kind) {
    detail::check_scores(d_fake, kind);
    if (kind == LossKind::Vanilla) {
        double lf = 0;
        for (double v : d_fake.data()) lf += std::log(v);
        return -lf / static_cast<double>(d_fake.size());
    }
    return -detail::batch_mean(d_fake);
}

/// Graph versions on raw critic outputs (logits for vanilla), used for
/// training. log sigmoid keeps the vanilla loss finite for saturated logits.
inline ad::Var critic_loss(ad::Var real_out, ad::Var fake_out, LossKind kind) {
    if (kind == LossKind::Vanilla)
        return -ad::mean(ad::log_sigmoid(real_out)) - ad::mean(ad::log_sigmoid(-fake_out));
    return ad::mean(fake_out) - ad::mean(real_out);
}

inline ad::Var generator_loss(ad::Var fake_out, LossKind kind) {
    if (kind == LossKind::Vanilla) return -ad::mean(ad::log_sigmoid(fake_out));
    return -ad::mean(fake_out);
}

/// lambda * mean_i (||grad_x D(x_hat_i)||_2 - 1)^2 with
/// x_hat_i = eps_i real_i + (1 - eps_i) fake_i and eps_i ~ U[0, 1] per sample.
/// The result stays on the tape and is differentiable in the critic
/// parameters bound in `critic`.
inline ad::Var gradient_penalty(ad::Graph& g, const BoundNetwork& critic, const Tensor& real,
                                const Tensor& fake, double lambda, std::mt19937_64& rng) {
    if (real.shape() != fake.shape())
        throw InvalidArgument("gan", "real batch " + to_string(real.shape()) +
                                         " and fake batch " + to_string(fake.shape()) +
                                         " differ in shape");
    if (real.rank() == 0 || real.dim(0) == 0) throw InvalidArgument("gan", "empty batch");
    if (!(lambda > 0)) throw InvalidArgument("gan", "lambda must be positive");
    const std::size_t b = real.dim(0);
    const std::size_t per = real.size() / b;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Tensor mixed(real.shape());
    for (std::size_t i = 0; i < b; ++i) {
        const double eps = unit(rng);
        for (std::size_t j = 0; j < per; ++j)
            mixed[i * per + j] = eps * real[i * per + j] + (1.0 - eps) * fake[i * per + j];
    }
    ad::Var x_hat = g.input("x_hat", mixed, true);
    // Samples do not interact, so the gradient of the summed scores holds
    // each sample's own input-gradient.
    ad::Var scores = ad::sum(forward(critic, x_hat));
    ad::Var grad = ad::input_gradient(scores, x_hat, true);
    return lambda * ad::mean(ad::square(ad::row_l2_norms(grad) - 1.0));
}

inline double gradient_penalty(const NetworkParams& critic, const Tensor& real, const Tensor& fake,
                               double lambda, std::mt19937_64& rng) {
    ad::Graph g;
    BoundNetwork d = bind(g, critic, false);
    return gradient_penalty(g, d, real, fake, lambda, rng).value().item();
}

/// Clamps every critic parameter to [-c, c].
inline NetworkParams clip_weights(NetworkParams d, double c) {
    if (!(c > 0)) throw InvalidArgument("gan", "clip bound must be positive");
    d.for_each_tensor([c](const std::string&, Tensor& t) {
        for (auto& v : t.data()) v = std::clamp(v, -c, c);
    });
    return d;
}

inline double max_abs_parameter(const NetworkParams& p) {
    double m = 0;
    p.for_each_tensor([&](const std::string&, const Tensor& t) {
        for (double v : t.data()) m = std::max(m, std::abs(v));
    });
    return m;
}

// ---------------------------------------------------------------------------
// Training

/// Adam with bias correction, one moment pair per parameter tensor.
class Adam {
public:
    Adam(double lr, double beta1, double beta2, double eps)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(NetworkParams& p, const NamedTensors& grads) {
        if (m_.empty()) {
            p.for_each_tensor([&](const std::string&, const Tensor& t) {
                m_.emplace_back(t.shape());
                v_.emplace_back(t.shape());
            });
        }
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        std::size_t k = 0;
        p.for_each_tensor([&](const std::string& name, Tensor& t) {
            const Tensor& g = grads.at(k).second;
            if (grads.at(k).first != name || g.shape() != t.shape())
                throw InvalidArgument("gan", "gradient does not match parameter " + name);
            Tensor& m = m_[k];
            Tensor& v = v_[k];
            for (std::size_t i = 0; i < t.size(); ++i) {
                m[i] = beta1_ * m[i] + (1 - beta1_) * g[i];
                v[i] = beta2_ * v[i] + (1 - beta2_) * g[i] * g[i];
                t[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
            }
            ++k;
        });
    }

private:
    double lr_, beta1_, beta2_, eps_;
    std::vector<Tensor> m_, v_;
    std::size_t t_ = 0;
};

struct StepRecord {
    std::size_t step = 0;
    double critic_loss = 0;     // objective term, penalty excluded
    double gradient_penalty = 0;
    double generator_loss = 0;
};

using History = std::vector<StepRecord>;

struct TrainResult {
    NetworkParams generator;
    NetworkParams critic;
    History history;
};

/// Called after every critic update with (generator step, critic step, critic).
using CriticObserver = std::function<void(std::size_t, std::size_t, const NetworkParams&)>;

namespace detail {

inline Tensor sample_rows(const Tensor& data, std::size_t b, std::mt19937_64& rng) {
    const std::size_t n = data.dim(0);
    const std::size_t per = data.size() / n;
    Shape s = data.shape();
    s[0] = b;
    Tensor out(s);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t r = pick(rng);
        std::copy_n(data.data().begin() + static_cast<std::ptrdiff_t>(r * per), per,
                    out.data().begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return out;
}

inline Tensor sample_latent(std::size_t b, std::size_t nz, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor z(Shape{b, nz});
    for (auto& v : z.data()) v = normal(rng);
    return z;
}

}  // namespace detail

/// Alternating updates: `critic_steps` critic updates (followed by weight
/// clipping under wgan_clip, with the gradient penalty added under wgan_gp)
/// per generator update. `dataset` is [n, ...] with per-sample size equal to
/// the generator output. Deterministic given config.seed.
inline TrainResult train(const Tensor& dataset, const GanConfig& config, NetworkParams g,
                         NetworkParams d, const CriticObserver& observer = {}) {
    config.validate();
    if (dataset.rank() == 0 || dataset.dim(0) == 0) throw InvalidArgument("gan", "empty dataset");
    if (dataset.size() / dataset.dim(0) != numel(g.arch.output) ||
        numel(d.arch.input) != numel(g.arch.output))
        throw InvalidArgument("gan", "dataset samples, generator output and critic input disagree");
    if (latent_dim(g) != config.nz)
        throw InvalidArgument("gan", "generator latent dimension differs from config.nz");
    if (!dataset.all_finite()) throw NumericError("gan", "non-finite value in dataset");

    std::mt19937_64 rng(config.seed);
    Adam opt_g(config.learning_rate, config.beta1, config.beta2, config.epsilon);
    Adam opt_d(config.learning_rate, config.beta1, config.beta2, config.epsilon);
    TrainResult result;
    const std::size_t b = config.batch_size;

    for (std::size_t step = 0; step < config.total_steps; ++step) {
        StepRecord rec;
        rec.step = step;
        try {
            for (std::size_t k = 0; k < config.critic_steps; ++k) {
                const Tensor real = detail::sample_rows(dataset, b, rng);
                Tensor fake = run(g, detail::sample_latent(b, config.nz, rng));
                fake = fake.reshaped(real.shape());
                ad::Graph graph;
                BoundNetwork dn = bind(graph, d, true);
                ad::Var loss = critic_loss(forward(dn, graph.constant(real)),
                                           forward(dn, graph.constant(fake)), config.loss);
                rec.critic_loss = loss.value().item();
                ad::Var total = loss;
                if (config.loss == LossKind::WganGp) {
                    ad::Var gp = gradient_penalty(graph, dn, real, fake, *config.lambda, rng);
                    rec.gradient_penalty = gp.value().item();
                    total = loss + gp;
                }
                opt_d.step(d, parameter_gradient(total, dn));
                if (config.loss == LossKind::WganClip) d = clip_weights(std::move(d), *config.clip_c);
                if (observer) observer(step, k, d);
            }
            ad::Graph graph;
            BoundNetwork gn = bind(graph, g, true);
            BoundNetwork dn = bind(graph, d, false);
            ad::Var fake = forward(gn, graph.input("z", detail::sample_latent(b, config.nz, rng)));
            ad::Var loss = generator_loss(forward(dn, fake), config.loss);
            rec.generator_loss = loss.value().item();
            opt_g.step(g, parameter_gradient(loss, gn));
        } catch (const NumericError& e) {
            throw NumericError("gan", "training diverged at step " + std::to_string(step) + " (" +
                                          e.what() + ")");
        }
        result.history.push_back(rec);
    }
    result.generator = std::move(g);
    result.critic = std::move(d);
    return result;
}

/// Trains the DCGAN generator/critic pair built from `config`.
inline TrainResult train(const Tensor& dataset, const GanConfig& config,
                         const CriticObserver& observer = {}) {
    return train(dataset, config, build_generator(config, config.seed),
                 build_critic(config, config.seed + 1), observer);
}

}  // namespace neutrosim::gan
