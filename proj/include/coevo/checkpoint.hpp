#pragma once

#include "coevo/layers.hpp"
#include "coevo/optimizer.hpp"

#include <string>
#include <vector>

namespace coevo {

struct NamedArray {
    std::string name;
    Shape shape;
    Eigen::ArrayXd data;
};

/// Versioned snapshot of every trainable tensor plus optimizer moments for
/// the tensors that were being optimized; round-trips bit-exactly.
struct Checkpoint {
    long long step = 0;
    std::string config_text;  // key=value snapshot of the training setup
    std::vector<NamedArray> params;
    std::vector<NamedArray> moments1, moments2;  // aligned with each other

    static Checkpoint capture(const ParameterStore& store, const AdamOptimizer* opt,
                              const std::vector<std::string>& opt_names,
                              const std::string& config_text);
    /// Copies parameter values into the store by name; every checkpoint
    /// tensor must exist with the same shape.
    void restore_params(ParameterStore& store) const;
    /// Restores moments and step counter into an optimizer built over the
    /// same named subset, in the same order.
    void restore_optimizer(AdamOptimizer& opt, const std::vector<std::string>& opt_names) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// Throws distinct errors for missing file, bad magic, version mismatch,
/// truncation and checksum failure.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace coevo
