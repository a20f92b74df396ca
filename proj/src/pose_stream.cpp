#include "coevo/pose_stream.hpp"

#include <stdexcept>

namespace coevo {

Eigen::MatrixXd normalize_2d(const Eigen::MatrixXd& pixels, double image_w, double image_h) {
    if (image_w <= 0.0 || image_h <= 0.0)
        throw std::invalid_argument("normalize_2d: invalid image size " + std::to_string(image_w) +
                                    "x" + std::to_string(image_h));
    if (pixels.cols() != 2) throw std::invalid_argument("normalize_2d: expected 2 columns");
    Eigen::MatrixXd out = 2.0 * pixels / image_w;
    out.col(0).array() -= 1.0;
    out.col(1).array() -= image_h / image_w;
    return out;
}

Eigen::MatrixXd normalize_2d(const PoseSequence2D& seq) {
    return normalize_2d(seq.joints, seq.image_w, seq.image_h);
}

Eigen::MatrixXd denormalize_2d(const Eigen::MatrixXd& normalized, double image_w, double image_h) {
    Eigen::MatrixXd out = normalized;
    out.col(0).array() += 1.0;
    out.col(1).array() += image_h / image_w;
    return out * (image_w / 2.0);
}

PoseStream PoseStream::create(ParameterStore& store, const PoseStreamConfig& cfg,
                              std::mt19937_64& rng) {
    PoseStream s;
    s.cfg_ = cfg;
    s.joint_embed_ = LinearLayer::create(store, "pose_stream/joint_embed", 2, cfg.channels, rng);
    s.feat_proj_ =
        LinearLayer::create(store, "pose_stream/feat_proj", cfg.feature_dim, cfg.channels, rng);
    s.spatial_emb_ =
        store.create_randn("pose_stream/spatial_emb", {cfg.joints, cfg.channels}, rng, 0.02);
    s.temporal_emb_ =
        store.create_randn("pose_stream/temporal_emb", {cfg.frames, cfg.channels}, rng, 0.02);
    int hidden = cfg.channels * cfg.mlp_ratio;
    for (int l = 0; l < cfg.layers; ++l) {
        s.spatial_blocks_.push_back(
            TransformerBlock::create(store, "pose_stream/spatial" + std::to_string(l),
                                     cfg.channels, cfg.heads, hidden, rng, cfg.ln_eps));
        s.temporal_blocks_.push_back(
            TransformerBlock::create(store, "pose_stream/temporal" + std::to_string(l),
                                     cfg.channels, cfg.heads, hidden, rng, cfg.ln_eps));
    }
    // zero init: the untrained stream predicts the origin, so the first
    // training loss is exactly the mean L1 magnitude of the target pose
    s.head_ = LinearLayer::create_zero(store, "pose_stream/head", cfg.channels, 3);
    // frame fusion initialized to the mean over frames
    s.fuse_w_ = store.create_full("pose_stream/fuse.weight", {cfg.frames, 1},
                                  1.0 / static_cast<double>(cfg.frames));
    s.fuse_b_ = store.create_zeros("pose_stream/fuse.bias", {1});
    return s;
}

Tensor PoseStream::tokens(const Tensor& norm_pose2d, const Tensor& features) const {
    const Eigen::Index t = cfg_.frames, j = cfg_.joints, c = cfg_.channels;
    if (norm_pose2d.ndim() != 3 || norm_pose2d.shape()[0] != t || norm_pose2d.shape()[1] != j ||
        norm_pose2d.shape()[2] != 2)
        throw std::invalid_argument("pose stream: pose input " + shape_str(norm_pose2d.shape()) +
                                    ", expected [" + std::to_string(t) + "," + std::to_string(j) +
                                    ",2]");
    if (features.ndim() != 2 || features.shape()[0] != t ||
        features.shape()[1] != cfg_.feature_dim)
        throw std::invalid_argument("pose stream: feature input " + shape_str(features.shape()) +
                                    ", expected [" + std::to_string(t) + "," +
                                    std::to_string(cfg_.feature_dim) + "]");
    Tensor x = joint_embed_.apply(norm_pose2d);  // [T,J,C1]
    // project per-frame image features and broadcast-add to every joint token
    Tensor finj = reshape(feat_proj_.apply(features), {t, 1, c});
    x = add(x, finj);
    x = add(x, spatial_emb_);                           // broadcast over frames
    x = add(x, reshape(temporal_emb_, {t, 1, c}));      // broadcast over joints
    for (size_t l = 0; l < spatial_blocks_.size(); ++l) {
        x = spatial_blocks_[l].apply(x);                // attention over joints per frame
        x = permute(x, {1, 0, 2});                      // [J,T,C1]
        x = temporal_blocks_[l].apply(x);               // attention over frames per joint
        x = permute(x, {1, 0, 2});                      // back to [T,J,C1]
    }
    return x;
}

Tensor PoseStream::forward(const Tensor& norm_pose2d, const Tensor& features) const {
    const Eigen::Index t = cfg_.frames, j = cfg_.joints;
    Tensor x = tokens(norm_pose2d, features);
    Tensor coords = head_.apply(x);                       // [T,J,3]
    Tensor fused = matmul(permute(coords, {1, 2, 0}), fuse_w_);  // [J,3,1]
    return add(reshape(fused, {j, 3}), fuse_b_);
}

}  // namespace coevo
