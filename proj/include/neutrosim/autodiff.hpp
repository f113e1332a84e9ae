#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// Every operation appends a node to a Graph; node ids are therefore a valid
// topological order. Backward passes are themselves recorded as ordinary
// nodes built from the same differentiable operations, so the gradient of a
// scalar is again a Var that can be differentiated (double backprop). This is
// what the Wasserstein gradient penalty needs: a loss built from the norm of
// an input-gradient, differentiated with respect to critic parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neutrosim/error.hpp"
#include "neutrosim/tensor.hpp"

namespace neutrosim::ad {

enum class Op : std::uint8_t {
    Input,
    Parameter,
    Constant,
    MatMul,
    Transpose,
    Reshape,
    BroadcastTo,
    SumTo,
    Sum,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,
    AddScalar,
    Tanh,
    Sigmoid,
    LeakyRelu,
    LeakySlope,
    Log,
    LogSigmoid,
    Sqrt,
    Im2Col,
    Col2Im,
};

inline const char* op_name(Op op) {
    switch (op) {
    case Op::Input: return "input";
    case Op::Parameter: return "parameter";
    case Op::Constant: return "constant";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Reshape: return "reshape";
    case Op::BroadcastTo: return "broadcast_to";
    case Op::SumTo: return "sum_to";
    case Op::Sum: return "sum";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::LeakySlope: return "leaky_slope";
    case Op::Log: return "log";
    case Op::LogSigmoid: return "log_sigmoid";
    case Op::Sqrt: return "sqrt";
    case Op::Im2Col: return "im2col";
    case Op::Col2Im: return "col2im";
    }
    return "unknown";
}

/// Geometry of a 2D convolution over NHWC images. `height`/`width` describe
/// the image side; the patch side has out_height() * out_width() positions.
struct ConvGeometry {
    std::size_t batch = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t pad = 0;

    std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
    std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
    Shape image_shape() const { return {batch, height, width, channels}; }
    Shape patch_shape() const {
        return {batch * out_height() * out_width(), kernel * kernel * channels};
    }
};

struct Attrs {
    double scalar = 0.0;
    Shape shape;
    ConvGeometry conv;
};

struct Node {
    Op op = Op::Constant;
    std::vector<std::size_t> inputs;
    Attrs attrs;
    Tensor value;
    bool requires_grad = false;
    std::string name;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its Graph lives.
class Var {
public:
    Var() = default;

    /// Reference is invalidated by the next op appended to the graph.
    const Tensor& value() const;
    Shape shape() const { return value().shape(); }
    bool requires_grad() const;
    std::size_t id() const noexcept { return id_; }
    Graph* graph() const noexcept { return graph_; }
    bool valid() const noexcept { return graph_ != nullptr; }

private:
    Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
    friend class Graph;
};

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1)
            throw InvalidArgument("autodiff", "shapes " + to_string(a) + " and " +
                                                  to_string(b) + " do not broadcast");
        out[i] = da == 1 ? db : da;
    }
    return out;
}

// For every flat index of `big`, the flat index of the right-aligned
// broadcast source `small`.
inline std::vector<std::size_t> broadcast_index(const Shape& big, const Shape& small) {
    if (broadcast_shape(big, small) != big)
        throw InvalidArgument("autodiff", "cannot broadcast " + to_string(small) +
                                              " to " + to_string(big));
    const std::size_t n = numel(big);
    std::vector<std::size_t> map(n);
    const std::size_t rank = big.size();
    const std::size_t offset = rank - small.size();
    std::vector<std::size_t> stride(rank, 0);
    std::size_t s = 1;
    for (std::size_t i = rank; i-- > offset;) {
        const std::size_t d = small[i - offset];
        stride[i] = d == 1 ? 0 : s;
        s *= d;
    }
    std::vector<std::size_t> idx(rank, 0);
    std::size_t src = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        map[flat] = src;
        for (std::size_t i = rank; i-- > 0;) {
            ++idx[i];
            src += stride[i];
            if (idx[i] < big[i]) break;
            src -= stride[i] * idx[i];
            idx[i] = 0;
        }
    }
    return map;
}

inline void require_same(const Tensor& a, const Tensor& b, Op op) {
    if (a.shape() != b.shape())
        throw InvalidArgument("autodiff", std::string(op_name(op)) + ": shape " +
                                              to_string(a.shape()) + " vs " +
                                              to_string(b.shape()));
}

inline double dot(const double* x, const double* y, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += x[i] * y[i];
        s1 += x[i + 1] * y[i + 1];
        s2 += x[i + 2] * y[i + 2];
        s3 += x[i + 3] * y[i + 3];
    }
    for (; i < n; ++i) s0 += x[i] * y[i];
    return (s0 + s1) + (s2 + s3);
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw InvalidArgument("autodiff", "matmul: shape " + to_string(a.shape()) +
                                              " x " + to_string(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out(Shape{m, n});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = out.data().data();
    // Every output element is accumulated in an order that depends only on
    // k and n, never on its row, so batch rows are computed independently
    // and bit-reproducibly.
    if (n < 16) {
        std::vector<double> bt(n * k);
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = pb[p * n + j];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) pc[i * n + j] = dot(pa + i * k, bt.data() + j * k, k);
        return out;
    }
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = pc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = pa[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2)
        throw InvalidArgument("autodiff", "transpose: rank-2 tensor required, got " +
                                              to_string(a.shape()));
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out(Shape{n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    return out;
}

inline void check_geometry(const ConvGeometry& g) {
    if (g.kernel == 0 || g.stride == 0 || g.height + 2 * g.pad < g.kernel ||
        g.width + 2 * g.pad < g.kernel)
        throw InvalidArgument("autodiff", "invalid convolution geometry");
}

inline Tensor im2col(const Tensor& x, const ConvGeometry& g) {
    check_geometry(g);
    if (x.shape() != g.image_shape())
        throw InvalidArgument("autodiff", "im2col: expected " + to_string(g.image_shape()) +
                                              ", got " + to_string(x.shape()));
    const std::size_t ho = g.out_height(), wo = g.out_width(), c = g.channels,
                      k = g.kernel;
    Tensor out(g.patch_shape());
    const std::size_t cols = k * k * c;
    for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                double* row = out.data().data() + ((n * ho + oy) * wo + ox) * cols;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
                        const double* src =
                            x.data().data() +
                            ((n * g.height + static_cast<std::size_t>(iy)) * g.width +
                             static_cast<std::size_t>(ix)) * c;
                        std::copy(src, src + c, row + (ky * k + kx) * c);
                    }
                }
            }
    return out;
}

inline Tensor col2im(const Tensor& cols, const ConvGeometry& g) {
    check_geometry(g);
    if (cols.shape() != g.patch_shape())
        throw InvalidArgument("autodiff", "col2im: expected " + to_string(g.patch_shape()) +
                                              ", got " + to_string(cols.shape()));
    const std::size_t ho = g.out_height(), wo = g.out_width(), c = g.channels,
                      k = g.kernel;
    const std::size_t ncols = k * k * c;
    Tensor out(g.image_shape());
    for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                const double* row =
                    cols.data().data() + ((n * ho + oy) * wo + ox) * ncols;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
                        double* dst = out.data().data() +
                                      ((n * g.height + static_cast<std::size_t>(iy)) * g.width +
                                       static_cast<std::size_t>(ix)) * c;
                        const double* src = row + (ky * k + kx) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                    }
                }
            }
    return out;
}

template <class F>
Tensor map(const Tensor& a, F f) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, Op op, F f) {
    require_same(a, b, op);
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

inline double stable_sigmoid(double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

inline double stable_log_sigmoid(double v) {
    return v >= 0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
}

/// Forward kernel shared by graph construction and evaluate().
inline Tensor forward(Op op, const Attrs& at, const std::vector<const Tensor*>& in) {
    switch (op) {
    case Op::MatMul: return matmul(*in[0], *in[1]);
    case Op::Transpose: return transpose(*in[0]);
    case Op::Reshape:
        if (numel(at.shape) != in[0]->size())
            throw InvalidArgument("autodiff", "reshape " + to_string(in[0]->shape()) +
                                                  " to " + to_string(at.shape));
        return in[0]->reshaped(at.shape);
    case Op::BroadcastTo: {
        const auto idx = broadcast_index(at.shape, in[0]->shape());
        Tensor out(at.shape);
        for (std::size_t i = 0; i < idx.size(); ++i) out[i] = (*in[0])[idx[i]];
        return out;
    }
    case Op::SumTo: {
        const auto idx = broadcast_index(in[0]->shape(), at.shape);
        Tensor out(at.shape);
        for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] += (*in[0])[i];
        return out;
    }
    case Op::Sum: {
        double s = 0.0;
        for (double v : in[0]->data()) s += v;
        return Tensor::scalar(s);
    }
    case Op::Add: return zip(*in[0], *in[1], op, [](double a, double b) { return a + b; });
    case Op::Sub: return zip(*in[0], *in[1], op, [](double a, double b) { return a - b; });
    case Op::Mul: return zip(*in[0], *in[1], op, [](double a, double b) { return a * b; });
    case Op::Div: return zip(*in[0], *in[1], op, [](double a, double b) { return a / b; });
    case Op::Neg: return map(*in[0], [](double a) { return -a; });
    case Op::Scale: return map(*in[0], [c = at.scalar](double a) { return c * a; });
    case Op::AddScalar: return map(*in[0], [c = at.scalar](double a) { return a + c; });
    case Op::Tanh: return map(*in[0], [](double a) { return std::tanh(a); });
    case Op::Sigmoid: return map(*in[0], stable_sigmoid);
    case Op::LeakyRelu:
        return map(*in[0], [s = at.scalar](double a) { return a > 0 ? a : s * a; });
    case Op::LeakySlope:
        return map(*in[0], [s = at.scalar](double a) { return a > 0 ? 1.0 : s; });
    case Op::Log: return map(*in[0], [](double a) { return std::log(a); });
    case Op::LogSigmoid: return map(*in[0], stable_log_sigmoid);
    case Op::Sqrt: return map(*in[0], [](double a) { return std::sqrt(a); });
    case Op::Im2Col: return im2col(*in[0], at.conv);
    case Op::Col2Im: return col2im(*in[0], at.conv);
    case Op::Input:
    case Op::Parameter:
    case Op::Constant: break;
    }
    throw InvalidArgument("autodiff", std::string("unsupported op ") + op_name(op));
}

}  // namespace detail

/// Append-only computation record. Not copyable: Vars point into it.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// Named placeholder; evaluate() requires a binding for it.
    Var input(std::string name, Tensor value, bool requires_grad = false) {
        return leaf(Op::Input, std::move(name), std::move(value), requires_grad);
    }

    /// Named leaf holding a stored value; evaluate() may override it.
    Var parameter(std::string name, Tensor value, bool requires_grad = true) {
        return leaf(Op::Parameter, std::move(name), std::move(value), requires_grad);
    }

    Var constant(Tensor value) {
        return leaf(Op::Constant, {}, std::move(value), false);
    }

    void mark_output(const std::string& name, Var v) {
        check_owned(v);
        outputs_[name] = v.id();
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    Var var(std::size_t id) {
        if (id >= nodes_.size()) throw InvalidArgument("autodiff", "node id out of range");
        return Var(this, id);
    }
    const Node& node(std::size_t id) const { return nodes_.at(id); }
    const std::map<std::string, std::size_t>& outputs() const noexcept { return outputs_; }

    void check_owned(Var v) const {
        if (v.graph() != this || v.id() >= nodes_.size())
            throw InvalidArgument("autodiff", "variable is not on this tape");
    }

    Var apply(Op op, std::vector<Var> ins, Attrs attrs = {}) {
        std::vector<const Tensor*> vals;
        std::vector<std::size_t> ids;
        bool rg = false;
        for (const Var& v : ins) {
            check_owned(v);
            ids.push_back(v.id());
            vals.push_back(&nodes_[v.id()].value);
            rg = rg || nodes_[v.id()].requires_grad;
        }
        // The slope mask is piecewise constant: its derivative is zero,
        // including at the kink.
        if (op == Op::LeakySlope) rg = false;
        Tensor value = detail::forward(op, attrs, vals);
        if (!value.all_finite())
            throw NumericError("autodiff", std::string("non-finite value produced by ") +
                                               op_name(op));
        nodes_.push_back(Node{op, std::move(ids), std::move(attrs), std::move(value), rg, {}});
        return Var(this, nodes_.size() - 1);
    }

private:
    Var leaf(Op op, std::string name, Tensor value, bool requires_grad) {
        if (!value.all_finite())
            throw NumericError("autodiff", "non-finite value in leaf '" + name + "'");
        nodes_.push_back(Node{op, {}, {}, std::move(value), requires_grad, std::move(name)});
        return Var(this, nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    std::map<std::string, std::size_t> outputs_;
};

inline const Tensor& Var::value() const { return graph_->node(id_).value; }
inline bool Var::requires_grad() const { return graph_->node(id_).requires_grad; }

// ---------------------------------------------------------------------------
// Operation builders

inline Var matmul(Var a, Var b) { return a.graph()->apply(Op::MatMul, {a, b}); }
inline Var transpose(Var a) { return a.graph()->apply(Op::Transpose, {a}); }

inline Var reshape(Var a, Shape shape) {
    if (a.shape() == shape) return a;
    Attrs at;
    at.shape = std::move(shape);
    return a.graph()->apply(Op::Reshape, {a}, std::move(at));
}

inline Var broadcast_to(Var a, Shape shape) {
    if (a.shape() == shape) return a;
    Attrs at;
    at.shape = std::move(shape);
    return a.graph()->apply(Op::BroadcastTo, {a}, std::move(at));
}

/// Sums `a` down to a right-aligned broadcast-compatible shape.
inline Var sum_to(Var a, Shape shape) {
    if (a.shape() == shape) return a;
    Attrs at;
    at.shape = std::move(shape);
    return a.graph()->apply(Op::SumTo, {a}, std::move(at));
}

inline Var sum(Var a) { return a.graph()->apply(Op::Sum, {a}); }

inline Var scale(Var a, double c) {
    Attrs at;
    at.scalar = c;
    return a.graph()->apply(Op::Scale, {a}, at);
}

inline Var add_scalar(Var a, double c) {
    Attrs at;
    at.scalar = c;
    return a.graph()->apply(Op::AddScalar, {a}, at);
}

inline Var mean(Var a) {
    if (a.value().size() == 0)
        throw InvalidArgument("autodiff", "mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

namespace detail {
inline Var binary(Op op, Var a, Var b) {
    const Shape s = broadcast_shape(a.shape(), b.shape());
    return a.graph()->apply(op, {broadcast_to(a, s), broadcast_to(b, s)});
}
}  // namespace detail

inline Var add(Var a, Var b) { return detail::binary(Op::Add, a, b); }
inline Var sub(Var a, Var b) { return detail::binary(Op::Sub, a, b); }
inline Var mul(Var a, Var b) { return detail::binary(Op::Mul, a, b); }
inline Var div(Var a, Var b) { return detail::binary(Op::Div, a, b); }
inline Var neg(Var a) { return a.graph()->apply(Op::Neg, {a}); }
inline Var square(Var a) { return mul(a, a); }

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator+(Var a, double c) { return add_scalar(a, c); }
inline Var operator-(Var a, double c) { return add_scalar(a, -c); }
inline Var operator-(double c, Var a) { return add_scalar(neg(a), c); }

inline Var tanh(Var a) { return a.graph()->apply(Op::Tanh, {a}); }
inline Var sigmoid(Var a) { return a.graph()->apply(Op::Sigmoid, {a}); }
inline Var log(Var a) { return a.graph()->apply(Op::Log, {a}); }
inline Var log_sigmoid(Var a) { return a.graph()->apply(Op::LogSigmoid, {a}); }
inline Var sqrt(Var a) { return a.graph()->apply(Op::Sqrt, {a}); }

inline Var leaky_relu(Var a, double slope) {
    Attrs at;
    at.scalar = slope;
    return a.graph()->apply(Op::LeakyRelu, {a}, at);
}

inline Var im2col(Var x, const ConvGeometry& g) {
    Attrs at;
    at.conv = g;
    return x.graph()->apply(Op::Im2Col, {x}, at);
}

inline Var col2im(Var cols, const ConvGeometry& g) {
    Attrs at;
    at.conv = g;
    return cols.graph()->apply(Op::Col2Im, {cols}, at);
}

/// 2D convolution, lowered to a patch matrix times the kernel.
/// x: [N, H, W, Cin]; kernel: [k, k, Cin, Cout]; bias: [Cout] (optional).
inline Var conv2d(Var x, Var kernel, std::optional<Var> bias, std::size_t stride,
                  std::size_t pad) {
    const Shape xs = x.shape();
    const Shape ks = kernel.shape();
    if (xs.size() != 4 || ks.size() != 4 || ks[0] != ks[1] || ks[2] != xs[3])
        throw InvalidArgument("autodiff", "conv2d: input " + to_string(xs) + ", kernel " +
                                              to_string(ks));
    ConvGeometry g{xs[0], xs[1], xs[2], xs[3], ks[0], stride, pad};
    detail::check_geometry(g);
    Var cols = im2col(x, g);
    Var w = reshape(kernel, {ks[0] * ks[1] * ks[2], ks[3]});
    Var out = reshape(matmul(cols, w), {xs[0], g.out_height(), g.out_width(), ks[3]});
    return bias ? add(out, *bias) : out;
}

/// Transposed 2D convolution: the adjoint of conv2d with the same geometry.
/// x: [N, H, W, Cin]; kernel: [Cin, k, k, Cout]; output spatial size
/// (H - 1) * stride - 2 * pad + k.
inline Var conv2d_transpose(Var x, Var kernel, std::optional<Var> bias,
                            std::size_t stride, std::size_t pad) {
    const Shape xs = x.shape();
    const Shape ks = kernel.shape();
    if (xs.size() != 4 || ks.size() != 4 || ks[1] != ks[2] || ks[0] != xs[3])
        throw InvalidArgument("autodiff", "conv2d_transpose: input " + to_string(xs) +
                                              ", kernel " + to_string(ks));
    const std::size_t k = ks[1];
    if ((xs[1] - 1) * stride + k < 2 * pad + 1 || (xs[2] - 1) * stride + k < 2 * pad + 1)
        throw InvalidArgument("autodiff", "conv2d_transpose: padding too large");
    ConvGeometry g{xs[0], (xs[1] - 1) * stride + k - 2 * pad,
                   (xs[2] - 1) * stride + k - 2 * pad, ks[3], k, stride, pad};
    if (g.out_height() != xs[1] || g.out_width() != xs[2])
        throw InvalidArgument("autodiff", "conv2d_transpose: inconsistent geometry");
    Var flat = reshape(x, {xs[0] * xs[1] * xs[2], xs[3]});
    Var w = reshape(kernel, {ks[0], k * k * ks[3]});
    Var out = col2im(matmul(flat, w), g);
    return bias ? add(out, *bias) : out;
}

/// Euclidean norm of all elements.
inline Var l2_norm(Var a) { return sqrt(sum(square(a))); }

/// Euclidean norm of each leading-axis slice: [N, ...] -> [N].
inline Var row_l2_norms(Var a) {
    const std::size_t n = a.shape().at(0);
    Var flat = reshape(a, {n, a.value().size() / std::max<std::size_t>(n, 1)});
    return reshape(sqrt(sum_to(square(flat), {n, 1})), {n});
}

// ---------------------------------------------------------------------------
// Reverse mode

namespace detail {

/// Vector-Jacobian products of node `id` given the gradient of its output,
/// one entry per input. Built from differentiable ops so the result can be
/// differentiated again.
inline std::vector<Var> vjp(Graph& g, std::size_t id, Var grad) {
    const Op op = g.node(id).op;
    const Attrs attrs = g.node(id).attrs;
    const std::vector<std::size_t> ids = g.node(id).inputs;
    auto input = [&](std::size_t i) { return g.var(ids[i]); };
    Var y = g.var(id);

    switch (op) {
    case Op::MatMul:
        return {matmul(grad, transpose(input(1))), matmul(transpose(input(0)), grad)};
    case Op::Transpose: return {transpose(grad)};
    case Op::Reshape: return {reshape(grad, input(0).shape())};
    case Op::BroadcastTo: return {sum_to(grad, input(0).shape())};
    case Op::SumTo:
    case Op::Sum: return {broadcast_to(grad, input(0).shape())};
    case Op::Add: return {grad, grad};
    case Op::Sub: return {grad, neg(grad)};
    case Op::Mul: return {mul(grad, input(1)), mul(grad, input(0))};
    case Op::Div: return {div(grad, input(1)), neg(div(mul(grad, y), input(1)))};
    case Op::Neg: return {neg(grad)};
    case Op::Scale: return {scale(grad, attrs.scalar)};
    case Op::AddScalar: return {grad};
    case Op::Tanh: return {mul(grad, 1.0 - square(y))};
    case Op::Sigmoid: return {mul(grad, mul(y, 1.0 - y))};
    case Op::LeakyRelu: {
        Var mask = g.apply(Op::LeakySlope, {input(0)}, attrs);
        return {mul(grad, mask)};
    }
    case Op::LeakySlope: return {};
    case Op::Log: return {div(grad, input(0))};
    case Op::LogSigmoid: return {mul(grad, sigmoid(neg(input(0))))};
    case Op::Sqrt: return {div(scale(grad, 0.5), y)};
    case Op::Im2Col: return {col2im(grad, attrs.conv)};
    case Op::Col2Im: return {im2col(grad, attrs.conv)};
    case Op::Input:
    case Op::Parameter:
    case Op::Constant: return {};
    }
    throw InvalidArgument("autodiff", std::string("no gradient rule for ") + op_name(op));
}

}  // namespace detail

/// Gradients of scalar `y` with respect to each of `wrt`.
///
/// With `create_graph` the returned Vars stay connected to the tape and can be
/// differentiated again; otherwise they are detached constants. A variable
/// that `y` does not depend on gets a zero gradient.
inline std::vector<Var> gradients(Var y, std::span<const Var> wrt, bool create_graph = false) {
    Graph& g = *y.graph();
    g.check_owned(y);
    if (y.value().size() != 1)
        throw InvalidArgument("autodiff", "gradient of non-scalar of shape " +
                                              to_string(y.shape()));
    const std::size_t top = y.id();
    std::vector<char> reaches(top + 1, 0);
    for (const Var& w : wrt) {
        if (w.graph() != &g || w.id() >= g.size())
            throw InvalidArgument("autodiff", "variable is not on this tape");
        if (!w.requires_grad())
            throw InvalidArgument("autodiff", "variable is not on the tape (requires_grad unset)");
        if (w.id() <= top) reaches[w.id()] = 1;
    }
    for (std::size_t id = 0; id <= top; ++id) {
        if (reaches[id]) continue;
        for (std::size_t in : g.node(id).inputs)
            if (reaches[in]) {
                reaches[id] = 1;
                break;
            }
    }

    std::vector<std::optional<Var>> acc(top + 1);
    acc[top] = g.constant(Tensor(y.shape(), 1.0));
    for (std::size_t id = top + 1; id-- > 0;) {
        if (!acc[id] || !reaches[id] || g.node(id).inputs.empty()) continue;
        if (!g.node(id).requires_grad) continue;
        const std::vector<std::size_t> ins = g.node(id).inputs;
        std::vector<Var> parts = detail::vjp(g, id, *acc[id]);
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const std::size_t in = ins[i];
            if (!reaches[in] || !g.node(in).requires_grad) continue;
            acc[in] = acc[in] ? add(*acc[in], parts[i]) : parts[i];
        }
    }

    std::vector<Var> out;
    out.reserve(wrt.size());
    for (const Var& w : wrt) {
        if (w.id() <= top && acc[w.id()]) {
            out.push_back(create_graph ? *acc[w.id()] : g.constant(acc[w.id()]->value()));
        } else {
            out.push_back(g.constant(Tensor(w.shape(), 0.0)));
        }
    }
    return out;
}

/// Gradient of scalar `y` with respect to a graph input. The result stays on
/// the tape, so scalars built from it (a gradient penalty) can be
/// differentiated with respect to parameters.
inline Var input_gradient(Var y, Var input, bool create_graph = true) {
    const Var wrt[] = {input};
    return gradients(y, wrt, create_graph).front();
}

/// Replays `graph` with new bindings for its named leaves and returns the
/// values of its marked outputs. Every Input leaf must be bound; Parameter
/// leaves keep their recorded value unless bound. Shapes are static.
inline std::map<std::string, Tensor> evaluate(const Graph& graph,
                                              const std::map<std::string, Tensor>& inputs) {
    std::map<std::string, std::size_t> named;
    for (std::size_t id = 0; id < graph.size(); ++id) {
        const Node& n = graph.node(id);
        if ((n.op == Op::Input || n.op == Op::Parameter) && !n.name.empty())
            named.emplace(n.name, id);
    }
    for (const auto& [name, value] : inputs)
        if (!named.contains(name))
            throw InvalidArgument("autodiff", "unknown input '" + name + "'");

    std::vector<Tensor> values(graph.size());
    for (std::size_t id = 0; id < graph.size(); ++id) {
        const Node& n = graph.node(id);
        switch (n.op) {
        case Op::Input:
        case Op::Parameter: {
            auto it = inputs.find(n.name);
            if (it == inputs.end()) {
                if (n.op == Op::Input)
                    throw InvalidArgument("autodiff", "input '" + n.name + "' is not bound");
                values[id] = n.value;
                break;
            }
            if (it->second.shape() != n.value.shape())
                throw InvalidArgument("autodiff", "input '" + n.name + "' has shape " +
                                                      to_string(it->second.shape()) +
                                                      ", graph expects " +
                                                      to_string(n.value.shape()));
            if (!it->second.all_finite())
                throw NumericError("autodiff", "non-finite value in input '" + n.name + "'");
            values[id] = it->second;
            break;
        }
        case Op::Constant: values[id] = n.value; break;
        default: {
            std::vector<const Tensor*> in;
            for (std::size_t i : n.inputs) in.push_back(&values[i]);
            values[id] = detail::forward(n.op, n.attrs, in);
            if (!values[id].all_finite())
                throw NumericError("autodiff", std::string("non-finite value produced by ") +
                                                   op_name(n.op));
        }
        }
    }
    std::map<std::string, Tensor> out;
    for (const auto& [name, id] : graph.outputs()) out.emplace(name, values[id]);
    return out;
}

}  // namespace neutrosim::ad
