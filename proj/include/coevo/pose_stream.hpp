#pragma once

#include "coevo/layers.hpp"

namespace coevo {

/// A detected 2D keypoint sequence in pixel coordinates, frame-major rows.
struct PoseSequence2D {
    Eigen::MatrixXd joints;  // (frames*joints_per_frame) x 2
    int frames = 0;
    int joints_per_frame = 0;
    double image_w = 0.0;
    double image_h = 0.0;
};

/// Full-image normalization: p -> 2 p / w - [1, h/w]. Affine and invertible;
/// out-of-image keypoints pass through unclamped.
Eigen::MatrixXd normalize_2d(const Eigen::MatrixXd& pixels, double image_w, double image_h);
Eigen::MatrixXd normalize_2d(const PoseSequence2D& seq);
Eigen::MatrixXd denormalize_2d(const Eigen::MatrixXd& normalized, double image_w, double image_h);

struct PoseStreamConfig {
    int frames = 8;
    int joints = 12;
    int channels = 64;  // C1
    int layers = 2;     // L1 spatial/temporal pairs
    int feature_dim = 32;
    int heads = 4;
    int mlp_ratio = 4;
    double ln_eps = 1e-6;
};

/// The 3D pose estimation stream: joint embedding, per-frame image-feature
/// injection, learned spatial/temporal embeddings, L1 cascaded spatial and
/// temporal attention layers, then a 3-D head fused over frames.
class PoseStream {
  public:
    PoseStream() = default;
    static PoseStream create(ParameterStore& store, const PoseStreamConfig& cfg,
                             std::mt19937_64& rng);

    /// norm_pose2d: normalized keypoints as a [T,J,2] tensor;
    /// features: per-frame image features [T,feature_dim].
    /// Returns the mid-frame 3D pose estimate [J,3].
    Tensor forward(const Tensor& norm_pose2d, const Tensor& features) const;

    Tensor tokens(const Tensor& norm_pose2d, const Tensor& features) const;  // [T,J,C1]

    const PoseStreamConfig& config() const { return cfg_; }
    const LinearLayer& head() const { return head_; }
    Tensor spatial_embedding() const { return spatial_emb_; }
    Tensor temporal_embedding() const { return temporal_emb_; }

  private:
    PoseStreamConfig cfg_;
    LinearLayer joint_embed_;  // 2 -> C1
    LinearLayer feat_proj_;    // feature_dim -> C1
    Tensor spatial_emb_;       // [J,C1]
    Tensor temporal_emb_;      // [T,C1]
    std::vector<TransformerBlock> spatial_blocks_, temporal_blocks_;
    LinearLayer head_;  // C1 -> 3
    Tensor fuse_w_;     // [T,1]
    Tensor fuse_b_;     // [1]
};

}  // namespace coevo
