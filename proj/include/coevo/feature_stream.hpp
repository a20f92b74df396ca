#pragma once

#include "coevo/layers.hpp"

namespace coevo {

/// One gated recurrent cell: update gate z, reset gate r, candidate state.
/// h' = (1-z) .* h_prev + z .* tanh(Wh x + Uh (r .* h_prev) + bh).
struct GruCell {
    LinearLayer in_update, state_update;        // Wz (+bias), Uz
    LinearLayer in_reset, state_reset;          // Wr (+bias), Ur
    LinearLayer in_candidate, state_candidate;  // Wh (+bias), Uh

    static GruCell create(ParameterStore& store, const std::string& name, int input_dim,
                          int hidden, std::mt19937_64& rng);
    /// x [1,input_dim], h_prev [1,hidden] -> [1,hidden]
    Tensor step(const Tensor& x, const Tensor& h_prev) const;
};

struct FeatureAggregatorConfig {
    int frames = 8;
    int feature_dim = 32;
    int hidden = 16;  // per direction; projection input is 2*hidden
    /// Read the two directional states at the mid-frame index; when false,
    /// read the end states of both passes instead.
    bool read_midframe = true;
};

/// Bi-directional gated recurrent aggregation of a per-frame image feature
/// sequence into the single mid-frame temporal feature.
class FeatureAggregator {
  public:
    FeatureAggregator() = default;
    static FeatureAggregator create(ParameterStore& store, const FeatureAggregatorConfig& cfg,
                                    std::mt19937_64& rng);

    /// features [T,feature_dim] -> f [feature_dim]
    Tensor aggregate(const Tensor& features) const;

    const FeatureAggregatorConfig& config() const { return cfg_; }
    const GruCell& forward_cell() const { return fwd_; }
    const GruCell& backward_cell() const { return bwd_; }

  private:
    FeatureAggregatorConfig cfg_;
    GruCell fwd_, bwd_;
    LinearLayer out_proj_;  // 2*hidden -> feature_dim
};

}  // namespace coevo
