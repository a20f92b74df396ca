#pragma once

#include "coevo/checkpoint.hpp"
#include "coevo/data_synth.hpp"
#include "coevo/losses.hpp"
#include "coevo/metrics.hpp"
#include "coevo/model.hpp"
#include "coevo/optimizer.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace coevo {

struct TrainConfig {
    int stage = 1;
    int steps = 3000;
    double lr = 1e-3;
    double clip_norm = 1.0;
    LossWeights weights;
    bool supervise_pose = true;
    /// Train with the per-frame image features replaced by zeros
    /// (pose-only ablation).
    bool zero_features = false;
    unsigned long long seed = 1;
    double fps = 1.0;
    int log_every = 200;
    /// Stop as soon as the batch loss falls below this value; 0 disables.
    double target_loss = 0.0;
    /// Final learning rate as a fraction of lr; the rate follows a cosine
    /// schedule from lr down to lr * lr_final_frac over the configured step
    /// count. 1 keeps the rate constant. The schedule depends only on the
    /// step index, so resumed runs follow the same curve.
    double lr_final_frac = 1.0;
};

struct TrainResult {
    std::vector<double> loss_curve;  // one entry per step
    Checkpoint checkpoint;
};

/// Deterministic full-batch window selection: clip c contributes the window
/// starting at (step + c) mod (frames - T + 1).
Eigen::Index window_start(long long step, size_t clip_index, int clip_frames, int model_frames);

/// Model inputs for one clip window: normalized 2D keypoints and per-frame
/// features (optionally zeroed).
struct ClipWindow {
    Tensor pose2d;    // [T,J,2] normalized
    Tensor features;  // [T,Df]
    Eigen::MatrixXd gt_joints;  // mid-frame J x 3
    Eigen::MatrixXd gt_verts;   // mid-frame V x 3
};
ClipWindow make_window(const MotionClip& clip, Eigen::Index start, const ModelConfig& config,
                       bool zero_features);

/// Stage 1: optimize only the 2D-to-3D pose stream (every parameter named
/// under its prefix) on the intermediate joint loss. Optionally resumes from
/// a checkpoint of the same shape.
TrainResult train_stage1(PoseMeshModel& model, const std::vector<MotionClip>& clips,
                         const TrainConfig& config, const Checkpoint* resume = nullptr,
                         std::ostream* log = nullptr);

/// Stage 2: restore the stage-1 weights, then optimize everything end to end
/// on the weighted mesh/joint/normal/edge objective.
TrainResult train_stage2(PoseMeshModel& model, const std::vector<MotionClip>& clips,
                         const TrainConfig& config, const Checkpoint& stage1,
                         std::ostream* log = nullptr);

/// Slides a length-T window over each clip, predicts the mid-frame pose and
/// mesh, and scores against ground truth. Clips shorter than T are skipped
/// with a warning to the log stream.
EvaluationReport evaluate_model(const PoseMeshModel& model, const std::vector<MotionClip>& clips,
                                double fps = 1.0, bool zero_features = false,
                                std::vector<EvaluationReport>* per_clip = nullptr,
                                std::ostream* log = nullptr);

std::string train_config_text(const TrainConfig& config, const ModelConfig& model);

}  // namespace coevo
