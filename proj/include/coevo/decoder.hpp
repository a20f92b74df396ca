#pragma once

#include "coevo/layers.hpp"

#include <vector>

namespace coevo {

struct DecoderConfig {
    int joints = 0;
    int coarse_verts = 0;
    int fine_verts = 0;
    int channels = 32;      // token width of both streams
    int layers = 2;
    int feature_dim = 32;   // conditioning feature width
    int heads = 4;
    int mlp_ratio = 4;
    int residual_hidden = 8;
    double ln_eps = 1e-6;
};

/// Head-averaged attention matrices captured from one block forward.
struct AttnMaps {
    Eigen::MatrixXd pose_to_mesh;  // pose queries over mesh tokens
    Eigen::MatrixXd mesh_to_pose;
    Eigen::MatrixXd pose_to_pose;
    Eigen::MatrixXd mesh_to_mesh;
};

/// One co-evolution layer: both token streams are conditioned-normalized,
/// exchange information through a pair of cross attentions, then each stream
/// runs its own MLP, self attention and second MLP, all pre-norm residual.
struct CoEvoBlock {
    AdaLayerNorm ada_cross_pose, ada_cross_mesh;
    MultiHeadAttention cross_pose, cross_mesh;
    AdaLayerNorm ada_mlp1_pose, ada_mlp1_mesh;
    MlpBlock mlp1_pose, mlp1_mesh;
    AdaLayerNorm ada_self_pose, ada_self_mesh;
    MultiHeadAttention self_pose, self_mesh;
    AdaLayerNorm ada_mlp2_pose, ada_mlp2_mesh;
    MlpBlock mlp2_pose, mlp2_mesh;

    static CoEvoBlock create(ParameterStore& store, const std::string& name,
                             const DecoderConfig& config, std::mt19937_64& rng);
    /// xp: [J, C], xm: [V', C], f: [Df]. Updates both streams in place.
    void apply(Tensor& xp, Tensor& xm, const Tensor& f, AttnMaps* maps = nullptr) const;
};

struct CoEvoDecoder {
    DecoderConfig config;
    LinearLayer pose_embed, mesh_embed;  // 3 -> C
    Tensor pose_pos;                     // [J, C] learned position table
    Tensor mesh_pos;                     // [V', C]
    std::vector<CoEvoBlock> blocks;
    LinearLayer pose_head, mesh_head;    // C -> 3
    Tensor up_weight;                    // [V, V'], initialized from the coarse interpolator
    LinearLayer res_fc1;                 // Df -> 3*k
    Tensor res_w2;                       // [V, k], zero init so the residual starts silent
    Tensor res_b2;                       // [V]

    static CoEvoDecoder create(ParameterStore& store, const std::string& name,
                               const DecoderConfig& config, const Eigen::MatrixXd& up_init,
                               std::mt19937_64& rng);

    struct Output {
        Tensor pose;         // [J, 3] refined joints
        Tensor coarse_mesh;  // [V', 3]
        Tensor fine_mesh;    // [V, 3]
    };
    /// p0: [J,3] initial pose, m0: [V',3] initial coarse mesh, f: [Df].
    /// When maps is non-null it receives one AttnMaps entry per block.
    Output forward(const Tensor& p0, const Tensor& m0, const Tensor& f,
                   std::vector<AttnMaps>* maps = nullptr) const;

    /// Coarse-to-fine mesh recovery: learned linear upsampling plus a
    /// feature-conditioned per-vertex displacement.
    Tensor upsample_with_residual(const Tensor& coarse, const Tensor& f) const;
};

}  // namespace coevo
