#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fd_oracle.hpp"
#include "gan_fixtures.hpp"

using namespace neutrosim;
using namespace neutrosim::gan;
using namespace fixtures;

namespace {

Tensor vec(std::initializer_list<double> v) { return Tensor::vector(v); }

Tensor gaussian(Shape s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor t(std::move(s));
    for (auto& v : t.data()) v = n(rng);
    return t;
}

GanConfig small_config(std::size_t size = 16, std::size_t nz = 8) {
    GanConfig c = GanConfig::defaults(LossKind::WganGp);
    c.image_size = size;
    c.nz = nz;
    c.gen_channels = 4;
    c.critic_channels = 4;
    c.batch_size = 4;
    return c;
}

}  // namespace

TEST(Build, ShapesFollowImageSize) {
    GanConfig c = GanConfig::defaults(LossKind::Vanilla);
    c.nz = 100;
    c.image_size = 64;
    c.gen_channels = 2;
    c.critic_channels = 2;
    NetworkParams g = build_generator(c, 1);
    EXPECT_EQ(g.arch.output, (Shape{1, 64, 64}));
    EXPECT_EQ(latent_dim(g), 100u);
    EXPECT_EQ(g.layers.size(), 5u);

    GanConfig s = small_config();
    NetworkParams g16 = build_generator(s, 1);
    // Shape chaining: 1x1 -> 4 -> 8 -> 16, one transposed conv each.
    auto shapes = g16.arch.trace();
    ASSERT_EQ(shapes.size(), 4u);
    EXPECT_EQ(shapes[1], (Shape{4, 4, 8}));
    EXPECT_EQ(shapes[2], (Shape{8, 8, 4}));
    EXPECT_EQ(shapes[3], (Shape{16, 16, 1}));
    EXPECT_EQ(g16.arch.layers.size(), 3u);
    for (const auto& l : g16.arch.layers) EXPECT_EQ(l.kind, LayerKind::ConvTranspose);
    EXPECT_EQ(g16.arch.layers.back().act, Activation::Tanh);

    NetworkParams d = build_critic(s, 2);
    EXPECT_EQ(d.arch.output, (Shape{1}));
    EXPECT_EQ(d.arch.trace().back(), (Shape{1, 1, 1}));

    s.image_size = 48;
    EXPECT_THROW(build_generator(s, 1), InvalidArgument);
    EXPECT_THROW(build_critic(s, 1), InvalidArgument);
}

TEST(Build, SeedDeterminesParameters) {
    GanConfig s = small_config();
    EXPECT_EQ(build_generator(s, 3), build_generator(s, 3));
    EXPECT_FALSE(build_generator(s, 3) == build_generator(s, 4));
    // Init std 0.02, zero biases.
    NetworkParams g = build_generator(s, 5);
    double ss = 0;
    std::size_t n = 0;
    for (const auto& l : g.layers) {
        for (double v : l.weight.data()) ss += v * v, ++n;
        for (double v : l.bias.data()) EXPECT_EQ(v, 0.0);
    }
    EXPECT_NEAR(std::sqrt(ss / double(n)), 0.02, 0.002);
}

TEST(Generate, EmptyDuplicateAndRange) {
    GanConfig s = small_config();
    NetworkParams g = build_generator(s, 1);
    EXPECT_EQ(generate(g, Tensor(Shape{0, 8})).shape(), (Shape{0, 1, 16, 16}));
    // Large weights drive tanh to saturation; outputs still stay in range.
    NetworkParams big = NetworkParams::init(g.arch, 2, 3.0);
    Tensor z = gaussian({3, 8}, 3);
    Tensor x = generate(big, z);
    for (double v : x.data()) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
    Tensor zz(Shape{2, 8});
    for (std::size_t j = 0; j < 8; ++j) zz[j] = zz[8 + j] = z[j];
    Tensor xx = generate(g, zz);
    const std::size_t per = 256;
    EXPECT_TRUE(std::equal(xx.data().begin(), xx.data().begin() + per, xx.data().begin() + per));
    EXPECT_THROW(generate(g, Tensor(Shape{2, 7})), InvalidArgument);
    zz[0] = std::nan("");
    EXPECT_THROW(generate(g, zz), NumericError);
}

TEST(Generate, RowsAreIndependent) {
    GanConfig s = small_config();
    NetworkParams g = build_generator(s, 1);
    Tensor z = gaussian({5, 8}, 4);
    Tensor base = generate(g, z);
    Tensor z2 = z;
    for (std::size_t j = 0; j < 8; ++j) z2[2 * 8 + j] += 0.5;
    Tensor moved = generate(g, z2);
    const std::size_t per = 256;
    for (std::size_t r = 0; r < 5; ++r) {
        const bool same = std::memcmp(base.data().data() + r * per, moved.data().data() + r * per,
                                      per * sizeof(double)) == 0;
        EXPECT_EQ(same, r != 2) << "row " << r;
    }
    // A row generated alone matches the same row generated in a batch.
    Tensor one(Shape{1, 8});
    std::copy_n(z.data().begin() + 24, 8, one.data().begin());
    Tensor alone = generate(g, one);
    EXPECT_EQ(0, std::memcmp(alone.data().data(), base.data().data() + 3 * per, per * sizeof(double)));
}

TEST(Losses, AnalyticValues) {
    EXPECT_NEAR(loss_discriminator(vec({0.5, 0.5}), vec({0.5, 0.5}), LossKind::Vanilla), 2 * std::log(2.0), 1e-15);
    EXPECT_EQ(loss_discriminator(vec({1, 1}), vec({0, 0}), LossKind::WganGp), -1.0);
    EXPECT_EQ(loss_discriminator(vec({1, 1}), vec({0, 0}), LossKind::WganClip), -1.0);
    EXPECT_LT(loss_discriminator(vec({1 - 1e-12}), vec({1e-12}), LossKind::Vanilla), 1e-11);
    EXPECT_NEAR(loss_generator(vec({0.5, 0.5}), LossKind::Vanilla), std::log(2.0), 1e-15);
    EXPECT_EQ(loss_generator(vec({2, 4}), LossKind::WganGp), -3.0);
}

TEST(Losses, VanillaGeneratorLossDecreasesInDFake) {
    double prev = INFINITY;
    for (int i = 1; i < 100; ++i) {
        const double p = i / 100.0;
        const double l = loss_generator(vec({p, p / 2}), LossKind::Vanilla);
        EXPECT_LT(l, prev);
        prev = l;
    }
}

TEST(Losses, PermutationInvariantAndErrors) {
    Tensor r = vec({0.9, 0.2, 0.7}), f = vec({0.1, 0.4, 0.3});
    Tensor rp = vec({0.7, 0.9, 0.2}), fp = vec({0.3, 0.1, 0.4});
    EXPECT_NEAR(loss_discriminator(r, f, LossKind::Vanilla), loss_discriminator(rp, fp, LossKind::Vanilla), 1e-15);
    EXPECT_NEAR(loss_generator(f, LossKind::Vanilla), loss_generator(fp, LossKind::Vanilla), 1e-15);
    EXPECT_THROW(loss_discriminator(vec({1.0}), vec({0.5}), LossKind::Vanilla), InvalidArgument);
    EXPECT_THROW(loss_generator(vec({0.0}), LossKind::Vanilla), InvalidArgument);
    EXPECT_THROW(loss_generator(Tensor(Shape{0}), LossKind::WganGp), InvalidArgument);
    EXPECT_NO_THROW(loss_generator(vec({-5.0}), LossKind::WganGp));
}

TEST(Losses, GraphFormsAgreeWithTensorForms) {
    // Graph losses take logits; the tensor forms take probabilities.
    Tensor lr = vec({0.3, -1.2, 2.0}), lf = vec({-0.5, 0.1, 1.5});
    auto sig = [](Tensor t) {
        for (auto& v : t.data()) v = 1 / (1 + std::exp(-v));
        return t;
    };
    ad::Graph g;
    auto r = g.constant(lr);
    auto f = g.constant(lf);
    EXPECT_NEAR(critic_loss(r, f, LossKind::Vanilla).value().item(),
                loss_discriminator(sig(lr), sig(lf), LossKind::Vanilla), 1e-14);
    EXPECT_NEAR(generator_loss(f, LossKind::Vanilla).value().item(), loss_generator(sig(lf), LossKind::Vanilla), 1e-14);
    EXPECT_NEAR(critic_loss(r, f, LossKind::WganGp).value().item(), loss_discriminator(lr, lf, LossKind::WganGp), 1e-15);
}

TEST(GradientPenalty, LinearCriticExamples) {
    std::mt19937_64 rng(1);
    Tensor real = gaussian({6, 4}, 2), fake = gaussian({6, 4}, 3);
    EXPECT_NEAR(gradient_penalty(linear_critic({0.6, 0.8, 0, 0}), real, fake, 10, rng), 0.0, 1e-20);
    // ||w|| = 3: penalty 10 (3 - 1)^2 regardless of the batch.
    NetworkParams d3 = linear_critic({1, 2, 2, 0}, 0.7);
    EXPECT_NEAR(gradient_penalty(d3, real, fake, 10, rng), 40.0, 1e-9);
    Tensor other = gaussian({6, 4}, 9);
    EXPECT_NEAR(gradient_penalty(d3, other, real, 10, rng), 40.0, 1e-9);
    EXPECT_THROW(gradient_penalty(d3, real, Tensor(Shape{5, 4}), 10, rng), InvalidArgument);
}

TEST(GradientPenalty, NonlinearCriticMatchesFiniteDifferenceOracle) {
    GanConfig s = small_config();
    NetworkParams d = NetworkParams::init(critic_architecture(s), 4, 0.3);
    Tensor real = gaussian({3, 16, 16, 1}, 5), fake = gaussian({3, 16, 16, 1}, 6);
    std::mt19937_64 a(7), b(7);
    const double gp = gradient_penalty(d, real, fake, 10, a);

    // Oracle: replay the interpolation, then central differences of D per pixel.
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t per = 256;
    double acc = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double eps = unit(b);
        Tensor x(Shape{1, 16, 16, 1});
        for (std::size_t j = 0; j < per; ++j) x[j] = eps * real[i * per + j] + (1 - eps) * fake[i * per + j];
        double sq = 0;
        for (std::size_t j = 0; j < per; ++j) {
            const double h = 1e-5;
            Tensor xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const double g = (run(d, xp)[0] - run(d, xm)[0]) / (2 * h);
            sq += g * g;
        }
        acc += (std::sqrt(sq) - 1) * (std::sqrt(sq) - 1);
    }
    const double oracle = 10 * acc / 3;
    EXPECT_NEAR(gp, oracle, 1e-3 * std::abs(oracle));
}

TEST(Clipping, Examples) {
    NetworkParams d = linear_critic({0.9, -0.005, -3}, 0.002);
    NetworkParams c = clip_weights(d, 0.01);
    EXPECT_EQ(c.layers[0].weight[0], 0.01);
    EXPECT_EQ(c.layers[0].weight[1], -0.005);
    EXPECT_EQ(c.layers[0].weight[2], -0.01);
    EXPECT_EQ(c.layers[0].bias[0], 0.002);
    EXPECT_EQ(clip_weights(c, 0.01), c);
    NetworkParams inside = linear_critic({0.001, -0.002});
    EXPECT_EQ(clip_weights(inside, 0.01), inside);
    EXPECT_THROW(clip_weights(d, 0.0), InvalidArgument);
    EXPECT_THROW(clip_weights(d, -1.0), InvalidArgument);
}

TEST(Train, ZeroStepsReturnsInitialParameters) {
    GanConfig s = small_config();
    s.total_steps = 0;
    Tensor data = gaussian({8, 16, 16, 1}, 1);
    TrainResult r = train(data, s);
    EXPECT_TRUE(r.history.empty());
    EXPECT_EQ(r.generator, build_generator(s, s.seed));
    EXPECT_EQ(r.critic, build_critic(s, s.seed + 1));
}

TEST(Train, SameSeedIsBitIdentical) {
    for (LossKind k : {LossKind::Vanilla, LossKind::WganClip, LossKind::WganGp}) {
        GanConfig s = small_config();
        GanConfig d = GanConfig::defaults(k);
        d.image_size = s.image_size;
        d.nz = s.nz;
        d.gen_channels = d.critic_channels = 4;
        d.batch_size = 4;
        d.total_steps = 3;
        d.seed = 11;
        Tensor data = gaussian({16, 16, 16, 1}, 2);
        for (auto& v : data.data()) v = std::tanh(v);
        TrainResult a = train(data, d), b = train(data, d);
        ASSERT_EQ(a.history.size(), 3u);
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_EQ(std::bit_cast<std::uint64_t>(a.history[i].critic_loss),
                      std::bit_cast<std::uint64_t>(b.history[i].critic_loss));
            EXPECT_EQ(std::bit_cast<std::uint64_t>(a.history[i].generator_loss),
                      std::bit_cast<std::uint64_t>(b.history[i].generator_loss));
            EXPECT_EQ(std::bit_cast<std::uint64_t>(a.history[i].gradient_penalty),
                      std::bit_cast<std::uint64_t>(b.history[i].gradient_penalty));
        }
        EXPECT_EQ(a.generator, b.generator);
        EXPECT_EQ(a.critic, b.critic);
        if (k == LossKind::WganGp) {
            EXPECT_GT(a.history[0].gradient_penalty, 0.0);
        }
    }
}

TEST(Train, ClippingHoldsAfterEveryCriticStep) {
    GanConfig c = GanConfig::defaults(LossKind::WganClip);
    c.nz = 2;
    c.batch_size = 16;
    c.total_steps = 20;
    c.learning_rate = 1e-2;  // large steps so clipping is active
    double worst = 0;
    std::size_t calls = 0;
    train(two_point_data(-1, 1, 50), c, NetworkParams::init(linear_arch("generator", 2, 1), 1, 0.02),
          NetworkParams::init(linear_arch("critic", 1, 1), 2, 0.5), [&](std::size_t, std::size_t, const NetworkParams& d) {
              worst = std::max(worst, max_abs_parameter(d));
              ++calls;
          });
    EXPECT_EQ(calls, 100u);
    EXPECT_LE(worst, 0.01);
    EXPECT_EQ(worst, 0.01);
}

TEST(Train, OneDimensionalWassersteinConverges) {
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        const double mean = one_d_run(one_d_config(2000, seed));
        EXPECT_NEAR(mean, 4.0, 0.4) << "seed " << seed;
    }
}

TEST(Train, OneDimensionalLargePenaltyLimitCycles) {
    // With lambda = 10 the critic weight cannot change sign until the mean
    // gap reaches 2 lambda, so the generator overshoots far past the data.
    GanConfig c = one_d_config(2000, 0);
    c.lambda = 10;
    c.learning_rate = 1e-2;
    EXPECT_GT(std::abs(one_d_run(c) - 4.0), 5.0);
}

TEST(Train, Errors) {
    GanConfig s = small_config();
    s.total_steps = 1;
    EXPECT_THROW(train(Tensor(Shape{0, 16, 16, 1}), s), InvalidArgument);
    EXPECT_THROW(train(gaussian({4, 8, 8, 1}, 1), s), InvalidArgument);
    GanConfig bad = s;
    bad.lambda.reset();
    EXPECT_THROW(train(gaussian({4, 16, 16, 1}, 1), bad), InvalidArgument);
    Tensor inf = gaussian({4, 16, 16, 1}, 1);
    inf[5] = INFINITY;
    EXPECT_THROW(train(inf, s), NumericError);
}

TEST(Train, DivergenceIsReported) {
    GanConfig c = GanConfig::defaults(LossKind::WganGp);
    c.nz = 1;
    c.total_steps = 50;
    c.learning_rate = 1e300;
    try {
        train(two_point_data(1e300, -1e300, 4), c, NetworkParams::init(linear_arch("generator", 1, 1), 1, 1.0),
              NetworkParams::init(linear_arch("critic", 1, 1), 2, 1.0));
        FAIL() << "expected divergence";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("diverged at step"), std::string::npos) << e.what();
    }
}

TEST(Checkpoint, RoundTripAndCorruption) {
    GanConfig s = small_config();
    NetworkParams g = build_generator(s, 9);
    std::stringstream ss;
    save_checkpoint(g, ss);
    const std::string bytes = ss.str();
    EXPECT_EQ(bytes.substr(0, 4), "NGAN");
    std::istringstream in(bytes);
    NetworkParams back = load_checkpoint(in);
    EXPECT_EQ(back, g);
    Tensor z = gaussian({2, 8}, 1);
    EXPECT_EQ(generate(back, z), generate(g, z));

    std::istringstream cut(bytes.substr(0, bytes.size() - 8));
    EXPECT_THROW(load_checkpoint(cut), FormatError);
    std::istringstream extra(bytes + "?");
    EXPECT_THROW(load_checkpoint(extra), FormatError);
    std::string magic = bytes;
    magic[0] = 'M';
    std::istringstream bad(magic);
    EXPECT_THROW(load_checkpoint(bad), FormatError);
}
