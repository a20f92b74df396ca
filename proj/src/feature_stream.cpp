#include "coevo/feature_stream.hpp"

#include <stdexcept>

namespace coevo {

GruCell GruCell::create(ParameterStore& store, const std::string& name, int input_dim, int hidden,
                        std::mt19937_64& rng) {
    GruCell c;
    c.in_update = LinearLayer::create(store, name + ".wz", input_dim, hidden, rng);
    c.state_update = LinearLayer::create(store, name + ".uz", hidden, hidden, rng, false);
    c.in_reset = LinearLayer::create(store, name + ".wr", input_dim, hidden, rng);
    c.state_reset = LinearLayer::create(store, name + ".ur", hidden, hidden, rng, false);
    c.in_candidate = LinearLayer::create(store, name + ".wh", input_dim, hidden, rng);
    c.state_candidate = LinearLayer::create(store, name + ".uh", hidden, hidden, rng, false);
    return c;
}

Tensor GruCell::step(const Tensor& x, const Tensor& h_prev) const {
    Tensor z = sigmoid(add(in_update.apply(x), state_update.apply(h_prev)));
    Tensor r = sigmoid(add(in_reset.apply(x), state_reset.apply(h_prev)));
    Tensor cand = tanh_op(add(in_candidate.apply(x), state_candidate.apply(hadamard(r, h_prev))));
    Tensor keep = hadamard(add_scalar(neg(z), 1.0), h_prev);
    return add(keep, hadamard(z, cand));
}

FeatureAggregator FeatureAggregator::create(ParameterStore& store,
                                            const FeatureAggregatorConfig& cfg,
                                            std::mt19937_64& rng) {
    FeatureAggregator a;
    a.cfg_ = cfg;
    a.fwd_ = GruCell::create(store, "feature/gru_fwd", cfg.feature_dim, cfg.hidden, rng);
    a.bwd_ = GruCell::create(store, "feature/gru_bwd", cfg.feature_dim, cfg.hidden, rng);
    a.out_proj_ = LinearLayer::create(store, "feature/out_proj", 2 * cfg.hidden, cfg.feature_dim, rng);
    return a;
}

Tensor FeatureAggregator::aggregate(const Tensor& features) const {
    const Eigen::Index t = cfg_.frames;
    if (features.ndim() != 2 || features.shape()[0] != t ||
        features.shape()[1] != cfg_.feature_dim)
        throw std::invalid_argument("aggregate: feature input " + shape_str(features.shape()) +
                                    ", expected [" + std::to_string(t) + "," +
                                    std::to_string(cfg_.feature_dim) + "]");
    const Eigen::Index mid = t / 2;
    Tensor h_fwd = Tensor::zeros({1, cfg_.hidden});
    Tensor h_bwd = Tensor::zeros({1, cfg_.hidden});
    Tensor read_fwd, read_bwd;
    for (Eigen::Index i = 0; i < t; ++i) {
        h_fwd = fwd_.step(slice(features, 0, i, 1), h_fwd);
        if (cfg_.read_midframe && i == mid) read_fwd = h_fwd;
        h_bwd = bwd_.step(slice(features, 0, t - 1 - i, 1), h_bwd);
        if (cfg_.read_midframe && t - 1 - i == mid) read_bwd = h_bwd;
    }
    if (!cfg_.read_midframe) {
        read_fwd = h_fwd;
        read_bwd = h_bwd;
    }
    Tensor both = concat({read_fwd, read_bwd}, 1);  // [1, 2H]
    return reshape(out_proj_.apply(both), {cfg_.feature_dim});
}

}  // namespace coevo
