#pragma once

#include "coevo/layers.hpp"

namespace coevo {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;  // global gradient norm; <= 0 disables clipping
};

/// Adam with bias correction over a fixed subset of a parameter store.
class AdamOptimizer {
  public:
    AdamOptimizer(std::vector<Tensor> params, const AdamConfig& config);

    /// Applies one update from the gradients currently stored on the
    /// parameters, then clears them. Throws on non-finite gradients, naming
    /// the offending parameter index, without touching any parameter.
    void step();

    long long steps_taken() const { return steps_; }
    const std::vector<Tensor>& params() const { return params_; }
    std::vector<Eigen::ArrayXd>& moment1() { return m_; }
    std::vector<Eigen::ArrayXd>& moment2() { return v_; }
    void set_steps(long long steps) { steps_ = steps; }
    void set_lr(double lr) { config_.lr = lr; }
    const AdamConfig& config() const { return config_; }

  private:
    std::vector<Tensor> params_;
    AdamConfig config_;
    std::vector<Eigen::ArrayXd> m_, v_;
    long long steps_ = 0;
};

}  // namespace coevo
