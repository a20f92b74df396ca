#include "coevo/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace coevo {

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, const AdamConfig& config)
    : params_(std::move(params)), config_(config) {
    if (config_.lr <= 0.0 || config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 ||
        config_.beta2 >= 1.0 || config_.eps <= 0.0)
        throw std::invalid_argument("adam: invalid hyperparameters");
    for (const auto& p : params_) {
        m_.emplace_back(Eigen::ArrayXd::Zero(p.size()));
        v_.emplace_back(Eigen::ArrayXd::Zero(p.size()));
    }
}

void AdamOptimizer::step() {
    std::vector<Eigen::ArrayXd> grads;
    grads.reserve(params_.size());
    double sq_norm = 0.0;
    for (size_t i = 0; i < params_.size(); ++i) {
        Eigen::ArrayXd g = params_[i].node()->has_grad()
                               ? Eigen::ArrayXd(params_[i].grad())
                               : Eigen::ArrayXd(Eigen::ArrayXd::Zero(params_[i].size()));
        if (!g.isFinite().all())
            throw std::runtime_error("adam: non-finite gradient on parameter " +
                                     std::to_string(i) + ", step aborted");
        sq_norm += g.square().sum();
        grads.push_back(std::move(g));
    }
    double norm = std::sqrt(sq_norm);
    double scale = (config_.clip_norm > 0.0 && norm > config_.clip_norm)
                       ? config_.clip_norm / norm
                       : 1.0;

    ++steps_;
    double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Eigen::ArrayXd g = grads[i] * scale;
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.square();
        Eigen::ArrayXd mhat = m_[i] / bc1;
        Eigen::ArrayXd vhat = v_[i] / bc2;
        Eigen::ArrayXd next =
            params_[i].values() - config_.lr * mhat / (vhat.sqrt() + config_.eps);
        params_[i].set_values(next);
        params_[i].zero_grad();
    }
}

}  // namespace coevo
