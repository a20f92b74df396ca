#include "coevo/layers.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace coevo {

// ---- ParameterStore ---------------------------------------------------------

Tensor ParameterStore::create(const std::string& name, const Shape& shape,
                              const Eigen::ArrayXd& init) {
    if (contains(name)) throw std::logic_error("parameter '" + name + "' already registered");
    Tensor t = Tensor::from(shape, init);
    t.set_requires_grad(true);
    entries_.emplace_back(name, t);
    return t;
}

Tensor ParameterStore::create_randn(const std::string& name, const Shape& shape,
                                    std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Eigen::ArrayXd v(shape_size(shape));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
    return create(name, shape, v);
}

Tensor ParameterStore::create_zeros(const std::string& name, const Shape& shape) {
    return create(name, shape, Eigen::ArrayXd::Zero(shape_size(shape)));
}

Tensor ParameterStore::create_full(const std::string& name, const Shape& shape, double v) {
    return create(name, shape, Eigen::ArrayXd::Constant(shape_size(shape), v));
}

Tensor ParameterStore::find(const std::string& name) const {
    for (const auto& [n, t] : entries_)
        if (n == name) return t;
    throw std::out_of_range("parameter '" + name + "' not found");
}

bool ParameterStore::contains(const std::string& name) const {
    for (const auto& [n, t] : entries_)
        if (n == name) return true;
    return false;
}

void ParameterStore::zero_grads() {
    for (auto& [n, t] : entries_) t.zero_grad();
}

Eigen::Index ParameterStore::total_size() const {
    Eigen::Index total = 0;
    for (const auto& [n, t] : entries_) total += t.size();
    return total;
}

// ---- LinearLayer ------------------------------------------------------------

LinearLayer LinearLayer::create(ParameterStore& store, const std::string& name, int in, int out,
                                std::mt19937_64& rng, bool with_bias, double stddev) {
    if (stddev < 0.0) stddev = 1.0 / std::sqrt(static_cast<double>(in));
    LinearLayer l;
    l.weight = store.create_randn(name + ".weight", {in, out}, rng, stddev);
    if (with_bias) l.bias = store.create_zeros(name + ".bias", {out});
    return l;
}

LinearLayer LinearLayer::create_zero(ParameterStore& store, const std::string& name, int in,
                                     int out, bool with_bias) {
    LinearLayer l;
    l.weight = store.create_zeros(name + ".weight", {in, out});
    if (with_bias) l.bias = store.create_zeros(name + ".bias", {out});
    return l;
}

Tensor LinearLayer::apply(const Tensor& x) const {
    Tensor h;
    if (x.ndim() == 1) {
        h = reshape(matmul(reshape(x, {1, x.size()}), weight), {weight.shape()[1]});
    } else {
        h = matmul(x, weight);
    }
    if (bias.valid()) h = add(h, bias);
    return h;
}

// ---- normalization ----------------------------------------------------------

Tensor normalize_tokens(const Tensor& x, double eps) {
    Tensor mu = mean_axis(x, -1, true);
    Tensor sd = std_axis(x, -1, true);
    return div(sub(x, mu), add_scalar(sd, eps));
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, int dims, double eps) {
    LayerNorm ln;
    ln.scale = store.create_full(name + ".scale", {dims}, 1.0);
    ln.shift = store.create_zeros(name + ".shift", {dims});
    ln.eps = eps;
    return ln;
}

Tensor LayerNorm::apply(const Tensor& x) const {
    return add(hadamard(normalize_tokens(x, eps), scale), shift);
}

AdaLayerNorm AdaLayerNorm::create(ParameterStore& store, const std::string& name, int feature_dim,
                                  int dims, bool unit_gain, double eps) {
    AdaLayerNorm n;
    // zero-initialized maps: an untrained call behaves like plain
    // normalization with unit scale (unit_gain) and zero shift
    n.to_scale = LinearLayer::create_zero(store, name + ".to_scale", feature_dim, dims);
    n.to_shift = LinearLayer::create_zero(store, name + ".to_shift", feature_dim, dims);
    n.unit_gain = unit_gain;
    n.eps = eps;
    return n;
}

Tensor AdaLayerNorm::apply(const Tensor& x, const Tensor& f) const {
    Tensor fv = f.ndim() == 1 ? f : reshape(f, {f.size()});
    Tensor scale = to_scale.apply(fv);  // [dims]
    if (unit_gain) scale = add_scalar(scale, 1.0);
    Tensor shift = to_shift.apply(fv);
    return add(hadamard(normalize_tokens(x, eps), scale), shift);
}

// ---- MLP block ----------------------------------------------------------------

MlpBlock MlpBlock::create(ParameterStore& store, const std::string& name, int dims, int hidden,
                          std::mt19937_64& rng, Act act) {
    MlpBlock m;
    m.fc1 = LinearLayer::create(store, name + ".fc1", dims, hidden, rng);
    m.fc2 = LinearLayer::create(store, name + ".fc2", hidden, dims, rng);
    m.act = act;
    return m;
}

Tensor MlpBlock::apply(const Tensor& x) const {
    Tensor h = fc1.apply(x);
    h = act == Act::Gelu ? gelu(h) : relu(h);
    return fc2.apply(h);
}

// ---- attention ----------------------------------------------------------------

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    Eigen::Index d = q.shape().back();
    if (k.shape().back() != d || v.shape().back() != k.shape().back())
        throw std::invalid_argument("attention: feature dims differ, q " + shape_str(q.shape()) +
                                    " k " + shape_str(k.shape()) + " v " + shape_str(v.shape()));
    Tensor scores = mul_scalar(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(static_cast<double>(d)));
    return matmul(softmax(scores, -1), v);
}

MultiHeadAttention MultiHeadAttention::create(ParameterStore& store, const std::string& name,
                                              int dims, int heads, std::mt19937_64& rng) {
    if (heads < 1 || dims % heads != 0)
        throw std::invalid_argument("attention: dims " + std::to_string(dims) +
                                    " not divisible by heads " + std::to_string(heads));
    MultiHeadAttention a;
    a.dims = dims;
    a.heads = heads;
    double stddev = 1.0 / std::sqrt(static_cast<double>(dims));
    a.wq = store.create_randn(name + ".wq", {dims, dims}, rng, stddev);
    a.wk = store.create_randn(name + ".wk", {dims, dims}, rng, stddev);
    a.wv = store.create_randn(name + ".wv", {dims, dims}, rng, stddev);
    a.wo = store.create_randn(name + ".wo", {dims, dims}, rng, stddev);
    return a;
}

namespace {

/// [B..,t,d] -> [B..,h,t,d/h]
Tensor split_heads(const Tensor& x, int heads) {
    Shape s = x.shape();
    Eigen::Index t = s[s.size() - 2];
    Eigen::Index d = s[s.size() - 1];
    Shape split(s.begin(), s.end() - 2);
    split.push_back(t);
    split.push_back(heads);
    split.push_back(d / heads);
    Tensor r = reshape(x, split);
    std::vector<int> axes(split.size());
    std::iota(axes.begin(), axes.end(), 0);
    std::swap(axes[axes.size() - 3], axes[axes.size() - 2]);
    return permute(r, axes);
}

Tensor merge_heads(const Tensor& x) {
    Shape s = x.shape();  // [B..,h,t,dh]
    std::vector<int> axes(s.size());
    std::iota(axes.begin(), axes.end(), 0);
    std::swap(axes[axes.size() - 3], axes[axes.size() - 2]);
    Tensor r = permute(x, axes);  // [B..,t,h,dh]
    Shape merged(s.begin(), s.end() - 3);
    merged.push_back(s[s.size() - 2]);
    merged.push_back(s[s.size() - 3] * s[s.size() - 1]);
    return reshape(r, merged);
}

}  // namespace

Tensor MultiHeadAttention::cross_attn(const Tensor& x, const Tensor& y) const {
    if (x.shape().back() != dims || y.shape().back() != dims)
        throw std::invalid_argument("attention: token dim mismatch, expected " +
                                    std::to_string(dims) + ", got x " + shape_str(x.shape()) +
                                    " y " + shape_str(y.shape()));
    Tensor q = split_heads(matmul(x, wq), heads);  // [..,h,n,dh]
    Tensor k = split_heads(matmul(y, wk), heads);
    Tensor v = split_heads(matmul(y, wv), heads);
    Eigen::Index dh = dims / heads;
    Tensor scores = mul_scalar(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor attn = softmax(scores, -1);
    if (attn_capture != nullptr) {
        if (attn.ndim() != 3) throw std::logic_error("attention capture requires 2-D token input");
        Eigen::Index n = attn.shape()[1], m = attn.shape()[2];
        Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(n, m);
        for (int h = 0; h < heads; ++h)
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < m; ++j) avg(i, j) += attn.at({h, i, j});
        *attn_capture = avg / static_cast<double>(heads);
        attn_capture = nullptr;  // one-shot
    }
    Tensor out = merge_heads(matmul(attn, v));
    return matmul(out, wo);
}

// ---- transformer block ---------------------------------------------------------

TransformerBlock TransformerBlock::create(ParameterStore& store, const std::string& name, int dims,
                                          int heads, int hidden, std::mt19937_64& rng, double eps) {
    TransformerBlock b;
    b.ln_attn = LayerNorm::create(store, name + ".ln_attn", dims, eps);
    b.ln_mlp = LayerNorm::create(store, name + ".ln_mlp", dims, eps);
    b.msa = MultiHeadAttention::create(store, name + ".msa", dims, heads, rng);
    b.mlp = MlpBlock::create(store, name + ".mlp", dims, hidden, rng);
    return b;
}

Tensor TransformerBlock::apply(const Tensor& x) const {
    Tensor h = add(x, msa.self_attn(ln_attn.apply(x)));
    return add(h, mlp.apply(ln_mlp.apply(h)));
}

}  // namespace coevo
