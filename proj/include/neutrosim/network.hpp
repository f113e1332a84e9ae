#pragma once

// Feed-forward networks described by a layer list, their parameters, and the
// NGAN checkpoint format.
//
// Images travel through convolutional layers in NHWC layout. Because the
// networks here are single-channel at both ends, an image batch
// [N, 1, s, s] and [N, s, s, 1] share one memory layout and the forward pass
// reshapes freely between the per-sample shapes declared by Architecture.

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "neutrosim/autodiff.hpp"
#include "neutrosim/binary_io.hpp"
#include "neutrosim/error.hpp"
#include "neutrosim/tensor.hpp"

namespace neutrosim::gan {

enum class LayerKind { Dense, Conv, ConvTranspose };
enum class Activation { None, Tanh, Sigmoid, LeakyRelu };

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t pad = 0;
    Activation act = Activation::None;
    double slope = 0.2;

    Shape weight_shape() const {
        switch (kind) {
        case LayerKind::Dense: return {in, out};
        case LayerKind::Conv: return {kernel, kernel, in, out};
        case LayerKind::ConvTranspose: return {in, kernel, kernel, out};
        }
        return {};
    }
};

namespace detail {

inline const char* kind_name(LayerKind k) {
    switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv: return "conv";
    case LayerKind::ConvTranspose: return "convt";
    }
    return "?";
}

inline const char* act_name(Activation a) {
    switch (a) {
    case Activation::None: return "none";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::LeakyRelu: return "lrelu";
    }
    return "?";
}

inline std::string shape_text(const Shape& s) {
    std::string out;
    for (std::size_t d : s) out += " " + std::to_string(d);
    return out;
}

}  // namespace detail

/// Layer stack plus the per-sample input and output shapes. Per-sample shapes
/// of rank 3 are read as (H, W, C) by convolutional layers.
struct Architecture {
    std::string role;
    Shape input;
    Shape output;
    std::vector<LayerSpec> layers;

    /// Spatial shape entering each layer, then the final one. Throws if the
    /// chain is inconsistent.
    std::vector<Shape> trace() const {
        if (layers.empty()) throw InvalidArgument("gan", "architecture has no layers");
        std::vector<Shape> shapes;
        Shape cur = input;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const LayerSpec& l = layers[i];
            const std::string where = "layer " + std::to_string(i) + ": ";
            if (l.in == 0 || l.out == 0 || l.kernel == 0 || l.stride == 0)
                throw InvalidArgument("gan", where + "zero-sized layer");
            if (l.kind == LayerKind::Dense) {
                if (numel(cur) != l.in)
                    throw InvalidArgument("gan", where + "dense input " + std::to_string(l.in) +
                                                     " does not match " + to_string(cur));
                shapes.push_back({l.in});
                cur = {l.out};
                continue;
            }
            if (cur.size() != 3) cur = {1, 1, numel(cur)};
            if (cur[2] != l.in)
                throw InvalidArgument("gan", where + "input channels " + std::to_string(l.in) +
                                                 " do not chain with " + to_string(cur));
            shapes.push_back(cur);
            if (l.kind == LayerKind::Conv) {
                if (cur[0] + 2 * l.pad < l.kernel || cur[1] + 2 * l.pad < l.kernel)
                    throw InvalidArgument("gan", where + "kernel larger than padded input");
                cur = {(cur[0] + 2 * l.pad - l.kernel) / l.stride + 1,
                       (cur[1] + 2 * l.pad - l.kernel) / l.stride + 1, l.out};
            } else {
                const std::size_t h = (cur[0] - 1) * l.stride + l.kernel;
                const std::size_t w = (cur[1] - 1) * l.stride + l.kernel;
                if (h <= 2 * l.pad || w <= 2 * l.pad)
                    throw InvalidArgument("gan", where + "padding too large");
                cur = {h - 2 * l.pad, w - 2 * l.pad, l.out};
            }
        }
        if (numel(cur) != numel(output))
            throw InvalidArgument("gan", "final layer yields " + to_string(cur) +
                                             ", declared output " + to_string(output));
        shapes.push_back(cur);
        return shapes;
    }

    std::string to_text() const {
        std::ostringstream out;
        out.precision(17);
        out << "role " << role << "\n";
        out << "input" << detail::shape_text(input) << "\n";
        out << "output" << detail::shape_text(output) << "\n";
        for (const LayerSpec& l : layers)
            out << "layer " << detail::kind_name(l.kind) << ' ' << l.in << ' ' << l.out << ' '
                << l.kernel << ' ' << l.stride << ' ' << l.pad << ' ' << detail::act_name(l.act)
                << ' ' << l.slope << "\n";
        return out.str();
    }

    static Architecture parse(const std::string& text) {
        Architecture arch;
        std::istringstream in(text);
        std::string line;
        auto bad = [](const std::string& l) {
            return FormatError("gan", "malformed architecture line '" + l + "'");
        };
        auto read_shape = [&](std::istringstream& ls) {
            Shape s;
            std::size_t d;
            while (ls >> d) s.push_back(d);
            return s;
        };
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            if (key == "role") {
                ls >> arch.role;
            } else if (key == "input") {
                arch.input = read_shape(ls);
            } else if (key == "output") {
                arch.output = read_shape(ls);
            } else if (key == "layer") {
                LayerSpec l;
                std::string kind, act;
                if (!(ls >> kind >> l.in >> l.out >> l.kernel >> l.stride >> l.pad >> act >> l.slope))
                    throw bad(line);
                if (kind == "dense") l.kind = LayerKind::Dense;
                else if (kind == "conv") l.kind = LayerKind::Conv;
                else if (kind == "convt") l.kind = LayerKind::ConvTranspose;
                else throw bad(line);
                if (act == "none") l.act = Activation::None;
                else if (act == "tanh") l.act = Activation::Tanh;
                else if (act == "sigmoid") l.act = Activation::Sigmoid;
                else if (act == "lrelu") l.act = Activation::LeakyRelu;
                else throw bad(line);
                arch.layers.push_back(l);
            } else {
                throw bad(line);
            }
        }
        arch.trace();
        return arch;
    }
};

struct Layer {
    std::string name;
    Tensor weight;
    Tensor bias;
};

/// Ordered parameter tensors of one network.
struct NetworkParams {
    Architecture arch;
    std::vector<Layer> layers;

    /// Gaussian weights with the given std, zero biases.
    static NetworkParams init(Architecture arch, std::uint64_t seed, double stddev = 0.02) {
        arch.trace();
        NetworkParams p;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, stddev > 0 ? stddev : 1.0);
        const std::string prefix = arch.role.empty() ? "net" : arch.role;
        for (std::size_t i = 0; i < arch.layers.size(); ++i) {
            Layer layer{prefix + "." + std::to_string(i), Tensor(arch.layers[i].weight_shape()),
                        Tensor(Shape{arch.layers[i].out})};
            if (stddev > 0)
                for (auto& v : layer.weight.data()) v = normal(rng);
            p.layers.push_back(std::move(layer));
        }
        p.arch = std::move(arch);
        return p;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const Layer& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }

    /// Visits every parameter tensor in declaration order.
    template <class F>
    void for_each_tensor(F&& f) {
        for (Layer& l : layers) {
            f(l.name + ".weight", l.weight);
            f(l.name + ".bias", l.bias);
        }
    }
    template <class F>
    void for_each_tensor(F&& f) const {
        for (const Layer& l : layers) {
            f(l.name + ".weight", l.weight);
            f(l.name + ".bias", l.bias);
        }
    }

    friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
        if (a.arch.to_text() != b.arch.to_text() || a.layers.size() != b.layers.size())
            return false;
        for (std::size_t i = 0; i < a.layers.size(); ++i)
            if (a.layers[i].name != b.layers[i].name || !(a.layers[i].weight == b.layers[i].weight) ||
                !(a.layers[i].bias == b.layers[i].bias))
                return false;
        return true;
    }
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// A network's parameters placed on a graph as leaves.
struct BoundNetwork {
    const NetworkParams* params = nullptr;
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;

    /// Leaves in declaration order (weight, bias per layer).
    std::vector<ad::Var> leaves() const {
        std::vector<ad::Var> out;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            out.push_back(weights[i]);
            out.push_back(biases[i]);
        }
        return out;
    }
};

inline BoundNetwork bind(ad::Graph& g, const NetworkParams& p, bool trainable) {
    BoundNetwork b;
    b.params = &p;
    for (const Layer& l : p.layers) {
        b.weights.push_back(g.parameter(l.name + ".weight", l.weight, trainable));
        b.biases.push_back(g.parameter(l.name + ".bias", l.bias, trainable));
    }
    return b;
}

/// Runs the layer stack on a batch [N, ...] whose per-sample size matches
/// the architecture input. Returns [N, ...output].
inline ad::Var forward(const BoundNetwork& net, ad::Var batch) {
    const Architecture& arch = net.params->arch;
    const Shape in_shape = batch.shape();
    if (in_shape.empty()) throw InvalidArgument("gan", "batch tensor needs a leading axis");
    const std::size_t n = in_shape[0];
    const std::size_t per_sample = n ? batch.value().size() / n : numel(arch.input);
    if (per_sample != numel(arch.input))
        throw InvalidArgument("gan", "input of shape " + to_string(in_shape) +
                                         " does not match per-sample shape " +
                                         to_string(arch.input));
    const std::vector<Shape> shapes = arch.trace();
    ad::Var x = batch;
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerSpec& l = arch.layers[i];
        Shape s = {n};
        s.insert(s.end(), shapes[i].begin(), shapes[i].end());
        x = ad::reshape(x, s);
        switch (l.kind) {
        case LayerKind::Dense: x = ad::matmul(x, net.weights[i]) + net.biases[i]; break;
        case LayerKind::Conv:
            x = ad::conv2d(x, net.weights[i], net.biases[i], l.stride, l.pad);
            break;
        case LayerKind::ConvTranspose:
            x = ad::conv2d_transpose(x, net.weights[i], net.biases[i], l.stride, l.pad);
            break;
        }
        switch (l.act) {
        case Activation::None: break;
        case Activation::Tanh: x = ad::tanh(x); break;
        case Activation::Sigmoid: x = ad::sigmoid(x); break;
        case Activation::LeakyRelu: x = ad::leaky_relu(x, l.slope); break;
        }
    }
    Shape out = {n};
    out.insert(out.end(), arch.output.begin(), arch.output.end());
    return ad::reshape(x, out);
}

/// Forward pass without gradient bookkeeping.
inline Tensor run(const NetworkParams& p, const Tensor& batch) {
    if (batch.rank() >= 1 && batch.dim(0) == 0) {
        Shape out = {0};
        out.insert(out.end(), p.arch.output.begin(), p.arch.output.end());
        return Tensor(out);
    }
    ad::Graph g;
    BoundNetwork b = bind(g, p, false);
    return forward(b, g.input("x", batch)).value();
}

/// d(scalar)/d(parameter) for every parameter of a bound network, named and
/// in declaration order.
inline NamedTensors parameter_gradient(ad::Var scalar, const BoundNetwork& net) {
    const std::vector<ad::Var> leaves = net.leaves();
    const std::vector<ad::Var> grads = ad::gradients(scalar, leaves, false);
    NamedTensors out;
    std::size_t i = 0;
    net.params->for_each_tensor([&](const std::string& name, const Tensor&) {
        out.emplace_back(name, grads[i++].value());
    });
    return out;
}

// ---------------------------------------------------------------------------
// NGAN checkpoint: magic, u32 version, u32 text length, architecture text,
// then every parameter tensor in declaration order as f64 little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const NetworkParams& p, std::ostream& out) {
    const std::string text = p.arch.to_text();
    io::write_magic(out, "NGAN");
    io::write_u32(out, kCheckpointVersion);
    io::write_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    p.for_each_tensor([&](const std::string&, const Tensor& t) {
        for (double v : t.data()) io::write_f64(out, v);
    });
    if (!out) throw FormatError("gan", "failed to write checkpoint");
}

inline NetworkParams load_checkpoint(std::istream& in) {
    io::expect_magic(in, "NGAN", "gan");
    const std::uint32_t version = io::read_u32(in, "gan");
    if (version != kCheckpointVersion)
        throw FormatError("gan", "unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t len = io::read_u32(in, "gan");
    if (len > (1u << 24)) throw FormatError("gan", "malformed header: architecture too long");
    std::string text(len, '\0');
    io::read_exact(in, text.data(), len, "gan");
    NetworkParams p = NetworkParams::init(Architecture::parse(text), 0, 0.0);
    p.for_each_tensor([&](const std::string& name, Tensor& t) {
        for (auto& v : t.data()) {
            v = io::read_f64(in, "gan");
            if (!std::isfinite(v)) throw FormatError("gan", "non-finite value in " + name);
        }
    });
    io::expect_eof(in, "gan");
    return p;
}

inline void save_checkpoint(const NetworkParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("gan", "cannot open " + path + " for writing");
    save_checkpoint(p, out);
}

inline NetworkParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("gan", "cannot open " + path);
    return load_checkpoint(in);
}

}  // namespace neutrosim::gan
