#include "coevo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace coevo {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

std::vector<Eigen::Index> row_major_strides(const Shape& s) {
    std::vector<Eigen::Index> st(s.size());
    Eigen::Index acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= s[static_cast<size_t>(i)];
    }
    return st;
}

void check_finite(const Eigen::ArrayXd& v, const std::string& op) {
    if (!v.isFinite().all())
        throw std::runtime_error("non-finite value produced by op '" + op + "'");
}

std::shared_ptr<TensorNode> make_node(Shape shape, Eigen::ArrayXd value, std::string op,
                                      std::vector<std::shared_ptr<TensorNode>> parents,
                                      std::function<void(TensorNode&)> backward_fn) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = std::move(op);
    check_finite(n->value, n->op);
    for (const auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    size_t nd = std::max(a.size(), b.size());
    Shape out(nd);
    for (size_t i = 0; i < nd; ++i) {
        Eigen::Index da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
        Eigen::Index db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
        if (da != db && da != 1 && db != 1)
            throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a) + " and " +
                                        shape_str(b) + " are not broadcastable");
        out[i] = std::max(da, db);
    }
    return out;
}

/// Linear-offset map from output coordinates into a (possibly broadcast)
/// operand. Shared by the forward and backward passes of elementwise ops.
std::vector<Eigen::Index> broadcast_offsets(const Shape& out, const Shape& in) {
    auto out_strides = row_major_strides(out);
    auto in_strides = row_major_strides(in);
    size_t pad = out.size() - in.size();
    Eigen::Index n = shape_size(out);
    std::vector<Eigen::Index> map(static_cast<size_t>(n));
    for (Eigen::Index lin = 0; lin < n; ++lin) {
        Eigen::Index rem = lin, off = 0;
        for (size_t d = 0; d < out.size(); ++d) {
            Eigen::Index c = rem / out_strides[d];
            rem %= out_strides[d];
            if (d >= pad && in[d - pad] != 1) off += c * in_strides[d - pad];
        }
        map[static_cast<size_t>(lin)] = off;
    }
    return map;
}

// equal shapes skip the broadcast index maps entirely; templates keep the
// per-element functors inlinable
template <typename Fwd, typename Da, typename Db>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, Da da,
                          Db db) {
    Shape out_shape = broadcast_shape(a.shape(), b.shape(), op);
    Eigen::Index n = shape_size(out_shape);
    auto an = a.node();
    auto bn = b.node();
    const auto& av = a.values();
    const auto& bv = b.values();
    Eigen::ArrayXd out(n);

    if (a.shape() == out_shape && b.shape() == out_shape) {
        for (Eigen::Index i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i]);
        return Tensor(make_node(out_shape, std::move(out), op, {an, bn},
                                [an, bn, da, db](TensorNode& node) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (Eigen::Index i = 0; i < node.grad.size(); ++i)
                    an->grad[i] += node.grad[i] * da(an->value[i], bn->value[i]);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (Eigen::Index i = 0; i < node.grad.size(); ++i)
                    bn->grad[i] += node.grad[i] * db(an->value[i], bn->value[i]);
            }
        }));
    }

    // trailing-axes broadcast (bias adds, per-channel scales): the source
    // offset is just i mod size, no index table needed
    auto is_tail = [&out_shape](const Shape& s) {
        if (s.size() > out_shape.size()) return false;
        for (size_t i = 0; i < s.size(); ++i)
            if (s[s.size() - 1 - i] != out_shape[out_shape.size() - 1 - i]) return false;
        return true;
    };
    if (a.shape() == out_shape && is_tail(b.shape())) {
        const Eigen::Index bs = shape_size(b.shape());
        for (Eigen::Index base = 0; base < n; base += bs)
            for (Eigen::Index j = 0; j < bs; ++j) out[base + j] = fwd(av[base + j], bv[j]);
        auto an2 = a.node();
        auto bn2 = b.node();
        return Tensor(make_node(out_shape, std::move(out), op, {an2, bn2},
                                [an2, bn2, bs, da, db](TensorNode& node) {
            const Eigen::Index total = node.grad.size();
            if (an2->requires_grad) {
                an2->ensure_grad();
                for (Eigen::Index base = 0; base < total; base += bs)
                    for (Eigen::Index j = 0; j < bs; ++j)
                        an2->grad[base + j] +=
                            node.grad[base + j] * da(an2->value[base + j], bn2->value[j]);
            }
            if (bn2->requires_grad) {
                bn2->ensure_grad();
                for (Eigen::Index base = 0; base < total; base += bs)
                    for (Eigen::Index j = 0; j < bs; ++j)
                        bn2->grad[j] +=
                            node.grad[base + j] * db(an2->value[base + j], bn2->value[j]);
            }
        }));
    }

    auto amap = std::make_shared<std::vector<Eigen::Index>>(broadcast_offsets(out_shape, a.shape()));
    auto bmap = std::make_shared<std::vector<Eigen::Index>>(broadcast_offsets(out_shape, b.shape()));
    for (Eigen::Index i = 0; i < n; ++i)
        out[i] = fwd(av[(*amap)[static_cast<size_t>(i)]], bv[(*bmap)[static_cast<size_t>(i)]]);
    return Tensor(make_node(out_shape, std::move(out), op,
                            {an, bn}, [an, bn, amap, bmap, da, db](TensorNode& node) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (Eigen::Index i = 0; i < node.grad.size(); ++i) {
                Eigen::Index ai = (*amap)[static_cast<size_t>(i)];
                an->grad[ai] += node.grad[i] * da(an->value[ai], bn->value[(*bmap)[static_cast<size_t>(i)]]);
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (Eigen::Index i = 0; i < node.grad.size(); ++i) {
                Eigen::Index bi = (*bmap)[static_cast<size_t>(i)];
                bn->grad[bi] += node.grad[i] * db(an->value[(*amap)[static_cast<size_t>(i)]], bn->value[bi]);
            }
        }
    }));
}

template <typename Fwd, typename Deriv>
Tensor unary_elementwise(const Tensor& a, const char* op, Fwd fwd, Deriv deriv) {
    Eigen::ArrayXd out(a.size());
    const auto& av = a.values();
    for (Eigen::Index i = 0; i < a.size(); ++i) out[i] = fwd(av[i]);
    auto an = a.node();
    return Tensor(make_node(a.shape(), std::move(out), op, {an}, [an, deriv](TensorNode& node) {
        an->ensure_grad();
        for (Eigen::Index i = 0; i < node.grad.size(); ++i)
            an->grad[i] += node.grad[i] * deriv(an->value[i]);
    }));
}

int normalize_axis(int axis, int ndim, const char* op) {
    int a = axis < 0 ? axis + ndim : axis;
    if (a < 0 || a >= ndim)
        throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) +
                                    " out of range for rank " + std::to_string(ndim));
    return a;
}

}  // namespace

Eigen::Index shape_size(const Shape& s) {
    Eigen::Index n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

// ---- Tensor ------------------------------------------------------------

Tensor Tensor::from(const Shape& shape, std::vector<double> data) {
    Eigen::ArrayXd v = Eigen::Map<const Eigen::ArrayXd>(data.data(), static_cast<Eigen::Index>(data.size()));
    return from(shape, v);
}

Tensor Tensor::from(const Shape& shape, const Eigen::ArrayXd& data) {
    for (auto d : shape)
        if (d <= 0) throw std::invalid_argument("tensor: non-positive extent in " + shape_str(shape));
    if (shape_size(shape) != data.size())
        throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match " +
                                    std::to_string(data.size()) + " values");
    return Tensor(make_node(shape, data, "leaf", {}, nullptr));
}

Tensor Tensor::zeros(const Shape& shape) {
    return from(shape, Eigen::ArrayXd::Zero(shape_size(shape)));
}

Tensor Tensor::ones(const Shape& shape) {
    return from(shape, Eigen::ArrayXd::Ones(shape_size(shape)));
}

Tensor Tensor::full(const Shape& shape, double v) {
    return from(shape, Eigen::ArrayXd::Constant(shape_size(shape), v));
}

Tensor Tensor::scalar(double v) { return from(Shape{1}, Eigen::ArrayXd::Constant(1, v)); }

Tensor Tensor::randn(const Shape& shape, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Eigen::ArrayXd v(shape_size(shape));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
    return from(shape, v);
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m) {
    Eigen::ArrayXd v(m.size());
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) v[k++] = m(r, c);
    return from(Shape{m.rows(), m.cols()}, v);
}

Eigen::Index Tensor::dim(int axis) const {
    int a = normalize_axis(axis, ndim(), "dim");
    return node_->shape[static_cast<size_t>(a)];
}

double Tensor::item() const {
    if (size() != 1) throw std::logic_error("item(): tensor of shape " + shape_str(shape()) + " is not scalar");
    return node_->value[0];
}

double Tensor::at(std::initializer_list<Eigen::Index> idx) const {
    if (static_cast<int>(idx.size()) != ndim()) throw std::logic_error("at(): rank mismatch");
    auto strides = row_major_strides(shape());
    Eigen::Index off = 0;
    size_t d = 0;
    for (auto i : idx) off += i * strides[d++];
    return node_->value[off];
}

Eigen::MatrixXd Tensor::as_matrix() const {
    Eigen::Index rows, cols;
    if (ndim() == 1) {
        rows = shape()[0];
        cols = 1;
    } else if (ndim() == 2) {
        rows = shape()[0];
        cols = shape()[1];
    } else {
        throw std::logic_error("as_matrix(): rank " + std::to_string(ndim()) + " tensor");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = node_->value[r * cols + c];
    return m;
}

Tensor& Tensor::set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
}

const Eigen::ArrayXd& Tensor::grad() const {
    if (!node_->has_grad()) throw std::logic_error("grad(): no gradient recorded for this tensor");
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.resize(0); }

void Tensor::set_values(const Eigen::ArrayXd& v) {
    if (v.size() != node_->value.size()) throw std::invalid_argument("set_values: size mismatch");
    node_->value = v;
}

// ---- elementwise suite ---------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "hadamard", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary_elementwise(a, "add_scalar", [s](double x) { return x + s; },
                             [](double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
    return unary_elementwise(a, "mul_scalar", [s](double x) { return x * s; },
                             [s](double) { return s; });
}

Tensor neg(const Tensor& a) {
    return unary_elementwise(a, "neg", [](double x) { return -x; }, [](double) { return -1.0; });
}

Tensor relu(const Tensor& a) {
    return unary_elementwise(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                             [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
    return unary_elementwise(
        a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::erf(x / kSqrt2)); },
        [](double x) {
            double cdf = 0.5 * (1.0 + std::erf(x / kSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            return cdf + x * pdf;
        });
}

Tensor tanh_op(const Tensor& a) {
    return unary_elementwise(a, "tanh", [](double x) { return std::tanh(x); },
                             [](double x) {
                                 double t = std::tanh(x);
                                 return 1.0 - t * t;
                             });
}

Tensor sigmoid(const Tensor& a) {
    return unary_elementwise(a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                             [](double x) {
                                 double s = 1.0 / (1.0 + std::exp(-x));
                                 return s * (1.0 - s);
                             });
}

Tensor abs_op(const Tensor& a) {
    return unary_elementwise(a, "abs", [](double x) { return std::abs(x); },
                             [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor sqrt_op(const Tensor& a) {
    return unary_elementwise(a, "sqrt", [](double x) { return std::sqrt(x); },
                             [](double x) { return 0.5 / std::sqrt(x); });
}

Tensor square(const Tensor& a) {
    return unary_elementwise(a, "square", [](double x) { return x * x; },
                             [](double x) { return 2.0 * x; });
}

// ---- reductions -----------------------------------------------------------

Tensor sum(const Tensor& a) {
    Eigen::ArrayXd out(1);
    out[0] = a.values().sum();
    auto an = a.node();
    return Tensor(make_node(Shape{1}, std::move(out), "sum", {an}, [an](TensorNode& node) {
        an->ensure_grad();
        an->grad += node.grad[0];
    }));
}

namespace {

/// Decompose a shape around one axis: outer (dims before), n (the axis),
/// inner (dims after). Slice s of outer o starts at (o*n)*inner + s.
struct AxisView {
    Eigen::Index outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const Shape& s, int axis) {
    AxisView v;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        if (i < axis) v.outer *= s[static_cast<size_t>(i)];
        else if (i == axis) v.n = s[static_cast<size_t>(i)];
        else v.inner *= s[static_cast<size_t>(i)];
    }
    return v;
}

Shape reduced_shape(const Shape& s, int axis, bool keepdim) {
    Shape out;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        if (i == axis) {
            if (keepdim) out.push_back(1);
        } else {
            out.push_back(s[static_cast<size_t>(i)]);
        }
    }
    if (out.empty()) out.push_back(1);
    return out;
}

}  // namespace

Tensor sum_axis(const Tensor& a, int axis, bool keepdim) {
    int ax = normalize_axis(axis, a.ndim(), "sum_axis");
    AxisView v = axis_view(a.shape(), ax);
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(v.outer * v.inner);
    const auto& av = a.values();
    for (Eigen::Index o = 0; o < v.outer; ++o)
        for (Eigen::Index k = 0; k < v.n; ++k)
            for (Eigen::Index i = 0; i < v.inner; ++i)
                out[o * v.inner + i] += av[(o * v.n + k) * v.inner + i];
    auto an = a.node();
    return Tensor(make_node(reduced_shape(a.shape(), ax, keepdim), std::move(out), "sum_axis", {an},
                            [an, v](TensorNode& node) {
                                an->ensure_grad();
                                for (Eigen::Index o = 0; o < v.outer; ++o)
                                    for (Eigen::Index k = 0; k < v.n; ++k)
                                        for (Eigen::Index i = 0; i < v.inner; ++i)
                                            an->grad[(o * v.n + k) * v.inner + i] += node.grad[o * v.inner + i];
                            }));
}

Tensor mean_axis(const Tensor& a, int axis, bool keepdim) {
    int ax = normalize_axis(axis, a.ndim(), "mean_axis");
    double inv = 1.0 / static_cast<double>(a.shape()[static_cast<size_t>(ax)]);
    return mul_scalar(sum_axis(a, ax, keepdim), inv);
}

Tensor std_axis(const Tensor& a, int axis, bool keepdim) {
    int ax = normalize_axis(axis, a.ndim(), "std_axis");
    AxisView v = axis_view(a.shape(), ax);
    const auto& av = a.values();
    Eigen::ArrayXd mean = Eigen::ArrayXd::Zero(v.outer * v.inner);
    for (Eigen::Index o = 0; o < v.outer; ++o)
        for (Eigen::Index k = 0; k < v.n; ++k)
            for (Eigen::Index i = 0; i < v.inner; ++i)
                mean[o * v.inner + i] += av[(o * v.n + k) * v.inner + i];
    mean /= static_cast<double>(v.n);
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(v.outer * v.inner);
    for (Eigen::Index o = 0; o < v.outer; ++o)
        for (Eigen::Index k = 0; k < v.n; ++k)
            for (Eigen::Index i = 0; i < v.inner; ++i) {
                double d = av[(o * v.n + k) * v.inner + i] - mean[o * v.inner + i];
                out[o * v.inner + i] += d * d;
            }
    out = (out / static_cast<double>(v.n)).sqrt();
    auto an = a.node();
    auto mean_sp = std::make_shared<Eigen::ArrayXd>(std::move(mean));
    auto std_sp = std::make_shared<Eigen::ArrayXd>(out);
    return Tensor(make_node(reduced_shape(a.shape(), ax, keepdim), std::move(out), "std_axis", {an},
                            [an, v, mean_sp, std_sp](TensorNode& node) {
                                an->ensure_grad();
                                for (Eigen::Index o = 0; o < v.outer; ++o)
                                    for (Eigen::Index k = 0; k < v.n; ++k)
                                        for (Eigen::Index i = 0; i < v.inner; ++i) {
                                            Eigen::Index s = o * v.inner + i;
                                            double sd = (*std_sp)[s];
                                            if (sd <= 0.0) continue;  // constant slice: 0 subgradient
                                            double d = an->value[(o * v.n + k) * v.inner + i] - (*mean_sp)[s];
                                            an->grad[(o * v.n + k) * v.inner + i] +=
                                                node.grad[s] * d / (static_cast<double>(v.n) * sd);
                                        }
                            }));
}

// ---- linear algebra --------------------------------------------------------

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() < 2 || b.ndim() < 2)
        throw std::invalid_argument("matmul: operands must have rank >= 2, got " +
                                    shape_str(a.shape()) + " and " + shape_str(b.shape()));
    Eigen::Index m = a.shape()[a.shape().size() - 2];
    Eigen::Index k = a.shape()[a.shape().size() - 1];
    Eigen::Index k2 = b.shape()[b.shape().size() - 2];
    Eigen::Index n = b.shape()[b.shape().size() - 1];
    if (k != k2)
        throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    Shape abatch(a.shape().begin(), a.shape().end() - 2);
    Shape bbatch(b.shape().begin(), b.shape().end() - 2);
    Shape batch = broadcast_shape(abatch, bbatch, "matmul");
    Eigen::Index nb = shape_size(batch);

    // batched-by-a times plain matrix collapses into one product over the
    // stacked rows; row-major layout makes the reinterpretation free
    if (b.ndim() == 2 && nb > 1 && shape_size(abatch) == nb) {
        Shape out_shape = batch;
        out_shape.push_back(m);
        out_shape.push_back(n);
        Eigen::ArrayXd out(nb * m * n);
        {
            CMapMat A(a.values().data(), nb * m, k);
            CMapMat B(b.values().data(), k, n);
            MapMat C(out.data(), nb * m, n);
            C.noalias() = A * B;
        }
        auto an = a.node();
        auto bn = b.node();
        return Tensor(make_node(out_shape, std::move(out), "matmul", {an, bn},
                                [an, bn, nb, m, k, n](TensorNode& node) {
                                    CMapMat G(node.grad.data(), nb * m, n);
                                    CMapMat A(an->value.data(), nb * m, k);
                                    CMapMat B(bn->value.data(), k, n);
                                    if (an->requires_grad) {
                                        an->ensure_grad();
                                        MapMat GA(an->grad.data(), nb * m, k);
                                        GA.noalias() += G * B.transpose();
                                    }
                                    if (bn->requires_grad) {
                                        bn->ensure_grad();
                                        MapMat GB(bn->grad.data(), k, n);
                                        GB.noalias() += A.transpose() * G;
                                    }
                                }));
    }
    auto amap = std::make_shared<std::vector<Eigen::Index>>(broadcast_offsets(batch, abatch));
    auto bmap = std::make_shared<std::vector<Eigen::Index>>(broadcast_offsets(batch, bbatch));

    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(n);

    Eigen::ArrayXd out(nb * m * n);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (Eigen::Index bidx = 0; bidx < nb; ++bidx) {
        CMapMat A(av.data() + (*amap)[static_cast<size_t>(bidx)] * m * k, m, k);
        CMapMat B(bv.data() + (*bmap)[static_cast<size_t>(bidx)] * k * n, k, n);
        MapMat C(out.data() + bidx * m * n, m, n);
        C.noalias() = A * B;
    }
    auto an = a.node();
    auto bn = b.node();
    return Tensor(make_node(out_shape, std::move(out), "matmul", {an, bn},
                            [an, bn, amap, bmap, nb, m, k, n](TensorNode& node) {
                                if (an->requires_grad) an->ensure_grad();
                                if (bn->requires_grad) bn->ensure_grad();
                                for (Eigen::Index bidx = 0; bidx < nb; ++bidx) {
                                    CMapMat G(node.grad.data() + bidx * m * n, m, n);
                                    CMapMat A(an->value.data() + (*amap)[static_cast<size_t>(bidx)] * m * k, m, k);
                                    CMapMat B(bn->value.data() + (*bmap)[static_cast<size_t>(bidx)] * k * n, k, n);
                                    if (an->requires_grad) {
                                        MapMat GA(an->grad.data() + (*amap)[static_cast<size_t>(bidx)] * m * k, m, k);
                                        GA.noalias() += G * B.transpose();
                                    }
                                    if (bn->requires_grad) {
                                        MapMat GB(bn->grad.data() + (*bmap)[static_cast<size_t>(bidx)] * k * n, k, n);
                                        GB.noalias() += A.transpose() * G;
                                    }
                                }
                            }));
}

Tensor softmax(const Tensor& a, int axis) {
    int ax = normalize_axis(axis, a.ndim(), "softmax");
    AxisView v = axis_view(a.shape(), ax);
    const auto& av = a.values();
    Eigen::ArrayXd out(a.size());
    for (Eigen::Index o = 0; o < v.outer; ++o)
        for (Eigen::Index i = 0; i < v.inner; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (Eigen::Index k = 0; k < v.n; ++k)
                mx = std::max(mx, av[(o * v.n + k) * v.inner + i]);
            double denom = 0.0;
            for (Eigen::Index k = 0; k < v.n; ++k) {
                double e = std::exp(av[(o * v.n + k) * v.inner + i] - mx);
                out[(o * v.n + k) * v.inner + i] = e;
                denom += e;
            }
            for (Eigen::Index k = 0; k < v.n; ++k) out[(o * v.n + k) * v.inner + i] /= denom;
        }
    auto an = a.node();
    auto ysp = std::make_shared<Eigen::ArrayXd>(out);
    return Tensor(make_node(a.shape(), std::move(out), "softmax", {an},
                            [an, v, ysp](TensorNode& node) {
                                an->ensure_grad();
                                const auto& y = *ysp;
                                for (Eigen::Index o = 0; o < v.outer; ++o)
                                    for (Eigen::Index i = 0; i < v.inner; ++i) {
                                        double dot = 0.0;
                                        for (Eigen::Index k = 0; k < v.n; ++k) {
                                            Eigen::Index s = (o * v.n + k) * v.inner + i;
                                            dot += node.grad[s] * y[s];
                                        }
                                        for (Eigen::Index k = 0; k < v.n; ++k) {
                                            Eigen::Index s = (o * v.n + k) * v.inner + i;
                                            an->grad[s] += y[s] * (node.grad[s] - dot);
                                        }
                                    }
                            }));
}

// ---- structural ops --------------------------------------------------------

Tensor reshape(const Tensor& a, const Shape& shape) {
    if (shape_size(shape) != a.size())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                    shape_str(shape));
    auto an = a.node();
    return Tensor(make_node(shape, a.values(), "reshape", {an}, [an](TensorNode& node) {
        an->ensure_grad();
        an->grad += node.grad;
    }));
}

Tensor permute(const Tensor& a, const std::vector<int>& axes) {
    int nd = a.ndim();
    if (static_cast<int>(axes.size()) != nd)
        throw std::invalid_argument("permute: got " + std::to_string(axes.size()) +
                                    " axes for rank " + std::to_string(nd));
    std::vector<bool> seen(static_cast<size_t>(nd), false);
    Shape out_shape(static_cast<size_t>(nd));
    for (int i = 0; i < nd; ++i) {
        int ax = normalize_axis(axes[static_cast<size_t>(i)], nd, "permute");
        if (seen[static_cast<size_t>(ax)]) throw std::invalid_argument("permute: repeated axis");
        seen[static_cast<size_t>(ax)] = true;
        out_shape[static_cast<size_t>(i)] = a.shape()[static_cast<size_t>(ax)];
    }
    auto in_strides = row_major_strides(a.shape());
    auto out_strides = row_major_strides(out_shape);
    Eigen::Index n = a.size();
    auto map = std::make_shared<std::vector<Eigen::Index>>(static_cast<size_t>(n));
    for (Eigen::Index lin = 0; lin < n; ++lin) {
        Eigen::Index rem = lin, src = 0;
        for (int d = 0; d < nd; ++d) {
            Eigen::Index c = rem / out_strides[static_cast<size_t>(d)];
            rem %= out_strides[static_cast<size_t>(d)];
            src += c * in_strides[static_cast<size_t>(axes[static_cast<size_t>(d)])];
        }
        (*map)[static_cast<size_t>(lin)] = src;
    }
    Eigen::ArrayXd out(n);
    const auto& av = a.values();
    for (Eigen::Index i = 0; i < n; ++i) out[i] = av[(*map)[static_cast<size_t>(i)]];
    auto an = a.node();
    return Tensor(make_node(out_shape, std::move(out), "permute", {an}, [an, map](TensorNode& node) {
        an->ensure_grad();
        for (Eigen::Index i = 0; i < node.grad.size(); ++i)
            an->grad[(*map)[static_cast<size_t>(i)]] += node.grad[i];
    }));
}

Tensor transpose_last2(const Tensor& a) {
    std::vector<int> axes(static_cast<size_t>(a.ndim()));
    std::iota(axes.begin(), axes.end(), 0);
    std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
    return permute(a, axes);
}

Tensor slice(const Tensor& a, int axis, Eigen::Index start, Eigen::Index len) {
    int ax = normalize_axis(axis, a.ndim(), "slice");
    Eigen::Index extent = a.shape()[static_cast<size_t>(ax)];
    if (start < 0 || len <= 0 || start + len > extent)
        throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") exceeds extent " +
                                    std::to_string(extent));
    AxisView v = axis_view(a.shape(), ax);
    Shape out_shape = a.shape();
    out_shape[static_cast<size_t>(ax)] = len;
    Eigen::ArrayXd out(v.outer * len * v.inner);
    const auto& av = a.values();
    for (Eigen::Index o = 0; o < v.outer; ++o)
        for (Eigen::Index k = 0; k < len; ++k)
            for (Eigen::Index i = 0; i < v.inner; ++i)
                out[(o * len + k) * v.inner + i] = av[(o * v.n + start + k) * v.inner + i];
    auto an = a.node();
    return Tensor(make_node(out_shape, std::move(out), "slice", {an},
                            [an, v, start, len](TensorNode& node) {
                                an->ensure_grad();
                                for (Eigen::Index o = 0; o < v.outer; ++o)
                                    for (Eigen::Index k = 0; k < len; ++k)
                                        for (Eigen::Index i = 0; i < v.inner; ++i)
                                            an->grad[(o * v.n + start + k) * v.inner + i] +=
                                                node.grad[(o * len + k) * v.inner + i];
                            }));
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no tensors");
    int nd = parts[0].ndim();
    int ax = normalize_axis(axis, nd, "concat");
    Shape out_shape = parts[0].shape();
    Eigen::Index total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != nd) throw std::invalid_argument("concat: rank mismatch");
        for (int d = 0; d < nd; ++d)
            if (d != ax && p.shape()[static_cast<size_t>(d)] != out_shape[static_cast<size_t>(d)])
                throw std::invalid_argument("concat: shape mismatch off the concat axis, " +
                                            shape_str(p.shape()) + " vs " + shape_str(out_shape));
        total += p.shape()[static_cast<size_t>(ax)];
    }
    out_shape[static_cast<size_t>(ax)] = total;
    AxisView v = axis_view(out_shape, ax);
    Eigen::ArrayXd out(shape_size(out_shape));
    Eigen::Index off = 0;
    std::vector<std::shared_ptr<TensorNode>> pnodes;
    std::vector<Eigen::Index> offsets, lens;
    for (const auto& p : parts) {
        Eigen::Index len = p.shape()[static_cast<size_t>(ax)];
        const auto& pv = p.values();
        for (Eigen::Index o = 0; o < v.outer; ++o)
            for (Eigen::Index k = 0; k < len; ++k)
                for (Eigen::Index i = 0; i < v.inner; ++i)
                    out[(o * v.n + off + k) * v.inner + i] = pv[(o * len + k) * v.inner + i];
        pnodes.push_back(p.node());
        offsets.push_back(off);
        lens.push_back(len);
        off += len;
    }
    return Tensor(make_node(out_shape, std::move(out), "concat", pnodes,
                            [pnodes, offsets, lens, v](TensorNode& node) {
                                for (size_t pi = 0; pi < pnodes.size(); ++pi) {
                                    auto& pn = pnodes[pi];
                                    if (!pn->requires_grad) continue;
                                    pn->ensure_grad();
                                    Eigen::Index len = lens[pi], start = offsets[pi];
                                    for (Eigen::Index o = 0; o < v.outer; ++o)
                                        for (Eigen::Index k = 0; k < len; ++k)
                                            for (Eigen::Index i = 0; i < v.inner; ++i)
                                                pn->grad[(o * len + k) * v.inner + i] +=
                                                    node.grad[(o * v.n + start + k) * v.inner + i];
                                }
                            }));
}

Tensor gather_rows(const Tensor& a, const std::vector<Eigen::Index>& indices) {
    if (a.ndim() < 1) throw std::invalid_argument("gather_rows: rank-0 tensor");
    Eigen::Index rows = a.shape()[0];
    Eigen::Index inner = a.size() / rows;
    for (auto i : indices)
        if (i < 0 || i >= rows)
            throw std::invalid_argument("gather_rows: index " + std::to_string(i) +
                                        " out of range [0," + std::to_string(rows) + ")");
    Shape out_shape = a.shape();
    out_shape[0] = static_cast<Eigen::Index>(indices.size());
    Eigen::ArrayXd out(out_shape[0] * inner);
    const auto& av = a.values();
    for (size_t r = 0; r < indices.size(); ++r)
        for (Eigen::Index i = 0; i < inner; ++i)
            out[static_cast<Eigen::Index>(r) * inner + i] = av[indices[r] * inner + i];
    auto an = a.node();
    auto idx = std::make_shared<std::vector<Eigen::Index>>(indices);
    return Tensor(make_node(out_shape, std::move(out), "gather_rows", {an},
                            [an, idx, inner](TensorNode& node) {
                                an->ensure_grad();
                                for (size_t r = 0; r < idx->size(); ++r)
                                    for (Eigen::Index i = 0; i < inner; ++i)
                                        an->grad[(*idx)[r] * inner + i] +=
                                            node.grad[static_cast<Eigen::Index>(r) * inner + i];
                            }));
}

// ---- backward --------------------------------------------------------------

void backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw std::logic_error("backward: loss has shape " + shape_str(loss.shape()) +
                               ", expected a scalar");
    // iterative post-order DFS
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, child] = stack.back();
        if (child < node->parents.size()) {
            TensorNode* p = node->parents[child++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward_fn && node->has_grad()) node->backward_fn(*node);
    }
    for (TensorNode* node : order)
        if (node->has_grad() && !node->grad.isFinite().all())
            throw std::runtime_error("backward: non-finite gradient at op '" + node->op + "'");
}

// ---- gradient checking -----------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                           std::vector<Tensor> inputs, double step, Eigen::Index max_coords,
                           std::mt19937_64* rng) {
    if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
    if (max_coords >= 0 && rng == nullptr)
        throw std::invalid_argument("grad_check: sampled mode needs an rng");
    for (auto& in : inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }
    Tensor out = f(inputs);
    if (out.size() != 1) throw std::logic_error("grad_check: function is not scalar-valued");
    backward(out);
    std::vector<Eigen::ArrayXd> analytic;
    for (auto& in : inputs)
        analytic.push_back(in.node()->has_grad() ? Eigen::ArrayXd(in.grad())
                                                 : Eigen::ArrayXd(Eigen::ArrayXd::Zero(in.size())));

    GradCheckReport report;
    for (size_t ii = 0; ii < inputs.size(); ++ii) {
        GradCheckEntry entry;
        entry.input_index = static_cast<int>(ii);
        Eigen::ArrayXd base = inputs[ii].values();
        std::vector<Eigen::Index> coords(static_cast<size_t>(base.size()));
        std::iota(coords.begin(), coords.end(), Eigen::Index{0});
        if (max_coords >= 0 && max_coords < base.size()) {
            std::shuffle(coords.begin(), coords.end(), *rng);
            coords.resize(static_cast<size_t>(max_coords));
        }
        for (Eigen::Index c : coords) {
            double fplus, fminus;
            try {
                Eigen::ArrayXd probe = base;
                probe[c] = base[c] + step;
                inputs[ii].set_values(probe);
                fplus = f(inputs).item();
                probe[c] = base[c] - step;
                inputs[ii].set_values(probe);
                fminus = f(inputs).item();
            } catch (const std::exception& e) {
                inputs[ii].set_values(base);
                throw std::runtime_error("grad_check: probing input " + std::to_string(ii) +
                                         " coord " + std::to_string(c) + " failed: " + e.what());
            }
            inputs[ii].set_values(base);
            double numeric = (fplus - fminus) / (2.0 * step);
            double a = analytic[ii][c];
            double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (rel > entry.max_rel_error) {
                entry.max_rel_error = rel;
                entry.worst_coord = c;
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.per_input.push_back(entry);
    }
    for (auto& in : inputs) in.zero_grad();
    return report;
}

}  // namespace coevo
