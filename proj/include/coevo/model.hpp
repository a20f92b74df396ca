#pragma once

#include "coevo/body_model.hpp"
#include "coevo/decoder.hpp"
#include "coevo/feature_stream.hpp"
#include "coevo/pose_stream.hpp"

#include <memory>

namespace coevo {

struct ModelConfig {
    int frames = 8;
    int pose_channels = 64;   // C1
    int pose_layers = 2;      // L1
    int decoder_channels = 32;  // C2
    int decoder_layers = 2;   // L2
    int feature_dim = 32;     // Df
    int gru_hidden = 16;      // per direction
    int heads = 4;
    int mlp_ratio = 4;
    int residual_hidden = 8;
    double ln_eps = 1e-6;
    bool read_midframe = true;
    BodyConfig body;

    int midframe() const { return frames / 2; }

    /// Desk-scale configuration used throughout training and evaluation.
    static ModelConfig toy();
    /// Dimensions from the published system (vertex counts approximated by
    /// the procedural body's closest achievable values).
    static ModelConfig paper();
    /// Smallest usable configuration, for exhaustive gradient checking.
    static ModelConfig tiny();
};

/// The full pipeline: 2D keypoint stream to mid-frame 3D pose, recurrent
/// image-feature aggregation, nearest-joint mesh initialization and the
/// pose/mesh co-evolution decoder with coarse-to-fine upsampling.
class PoseMeshModel {
  public:
    explicit PoseMeshModel(const ModelConfig& config, unsigned long long seed = 1);

    struct Output {
        Tensor p0;           // [J,3] intermediate mid-frame pose
        Tensor f;            // [Df] aggregated temporal feature
        Tensor pose;         // [J,3] refined pose
        Tensor coarse_mesh;  // [V',3]
        Tensor fine_mesh;    // [V,3]
    };
    /// norm_pose2d: [T,J,2] normalized keypoints; features: [T,Df].
    Output forward(const Tensor& norm_pose2d, const Tensor& features,
                   std::vector<AttnMaps>* maps = nullptr) const;

    const ModelConfig& config() const { return config_; }
    const BodyModel& body() const { return body_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }
    const PoseStream& pose_stream() const { return pose_stream_; }
    const FeatureAggregator& aggregator() const { return aggregator_; }
    const CoEvoDecoder& decoder() const { return decoder_; }

  private:
    ModelConfig config_;
    ParameterStore params_;
    BodyModel body_;
    PoseStream pose_stream_;
    FeatureAggregator aggregator_;
    CoEvoDecoder decoder_;
};

/// Finite-difference check of the whole model: the scalar probe is the sum of
/// all outputs, taken with respect to every trainable tensor. max_coords < 0
/// probes every coordinate.
GradCheckReport model_grad_check(PoseMeshModel& model, unsigned long long seed,
                                 Eigen::Index max_coords = -1);

}  // namespace coevo
