#pragma once

#include "coevo/tensor.hpp"

#include <string>
#include <vector>

namespace coevo {

/// Ordered registry of named trainable tensors. Creation order is fixed by
/// construction, which keeps optimizer traversal and checkpoints stable.
class ParameterStore {
  public:
    Tensor create(const std::string& name, const Shape& shape, const Eigen::ArrayXd& init);
    Tensor create_randn(const std::string& name, const Shape& shape, std::mt19937_64& rng,
                        double stddev);
    Tensor create_zeros(const std::string& name, const Shape& shape);
    Tensor create_full(const std::string& name, const Shape& shape, double v);

    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    Tensor find(const std::string& name) const;
    bool contains(const std::string& name) const;
    void zero_grads();
    Eigen::Index total_size() const;

  private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Affine map over the last axis: x [..,in] -> [..,out].
struct LinearLayer {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out]; invalid handle when the layer has no bias

    static LinearLayer create(ParameterStore& store, const std::string& name, int in, int out,
                              std::mt19937_64& rng, bool with_bias = true, double stddev = -1.0);
    static LinearLayer create_zero(ParameterStore& store, const std::string& name, int in, int out,
                                   bool with_bias = true);
    Tensor apply(const Tensor& x) const;
    int in_dim() const { return static_cast<int>(weight.shape()[0]); }
    int out_dim() const { return static_cast<int>(weight.shape()[1]); }
};

/// (x - mean) / (std + eps) over the last axis, biased std.
Tensor normalize_tokens(const Tensor& x, double eps);

struct LayerNorm {
    Tensor scale;  // init ones
    Tensor shift;  // init zeros
    double eps = 1e-6;

    static LayerNorm create(ParameterStore& store, const std::string& name, int dims,
                            double eps = 1e-6);
    Tensor apply(const Tensor& x) const;
};

/// Layer normalization whose scale and shift are produced from a conditioning
/// feature vector. With unit_gain the produced scale acts as a residual gain
/// around 1, so zero-initialized maps reduce to plain normalization.
struct AdaLayerNorm {
    LinearLayer to_scale;  // feature_dim -> dims
    LinearLayer to_shift;
    bool unit_gain = true;
    double eps = 1e-6;

    static AdaLayerNorm create(ParameterStore& store, const std::string& name, int feature_dim,
                               int dims, bool unit_gain = true, double eps = 1e-6);
    /// x: [..,dims], f: [feature_dim] or [1,feature_dim]. One (scale,shift)
    /// pair is shared by every token in the call.
    Tensor apply(const Tensor& x, const Tensor& f) const;
};

struct MlpBlock {
    LinearLayer fc1, fc2;
    enum class Act { Gelu, Relu };
    Act act = Act::Gelu;

    static MlpBlock create(ParameterStore& store, const std::string& name, int dims, int hidden,
                           std::mt19937_64& rng, Act act = Act::Gelu);
    Tensor apply(const Tensor& x) const;
};

/// Softmax(Q K^T / sqrt(d)) V for Q [..,n,d], K,V [..,m,d].
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

struct MultiHeadAttention {
    int dims = 0;
    int heads = 1;
    Tensor wq, wk, wv, wo;  // [d,d] projections, no bias
    /// When non-null, the next forward stores its head-averaged attention
    /// matrix here (2-D token inputs only).
    mutable Eigen::MatrixXd* attn_capture = nullptr;

    static MultiHeadAttention create(ParameterStore& store, const std::string& name, int dims,
                                     int heads, std::mt19937_64& rng);
    Tensor self_attn(const Tensor& x) const { return cross_attn(x, x); }
    /// Queries from x, keys/values from y. x [..,n,d], y [..,m,d] -> [..,n,d].
    Tensor cross_attn(const Tensor& x, const Tensor& y) const;
};

/// Pre-norm transformer block: x += MSA(LN(x)); x += MLP(LN(x)).
struct TransformerBlock {
    LayerNorm ln_attn, ln_mlp;
    MultiHeadAttention msa;
    MlpBlock mlp;

    static TransformerBlock create(ParameterStore& store, const std::string& name, int dims,
                                   int heads, int hidden, std::mt19937_64& rng, double eps = 1e-6);
    Tensor apply(const Tensor& x) const;
};

}  // namespace coevo
