#pragma once

#include "coevo/body_model.hpp"

#include <random>
#include <string>
#include <vector>

namespace coevo {

struct Camera {
    double focal = 500.0;
    double image_w = 256.0;
    double image_h = 256.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
    Eigen::Vector3d position = Eigen::Vector3d::Zero();      // camera center, world frame

    /// Pinhole projection of N x 3 world points to N x 2 pixels. Throws when
    /// a point is not safely in front of the camera.
    Eigen::MatrixXd project(const Eigen::MatrixXd& points) const;
};

/// Forward-kinematics result: per frame, joint positions and the global
/// rotation of every joint.
struct FkSequence {
    std::vector<Eigen::MatrixXd> joints;                 // T of J x 3
    std::vector<std::vector<Eigen::Matrix3d>> rotations;  // T of J
};

struct MotionClip {
    std::vector<Eigen::MatrixXd> joints;  // T of J x 3
    std::vector<Eigen::MatrixXd> verts;   // T of V x 3
    Eigen::MatrixXd pose2d;               // (T*J) x 2 pixels, frame-major
    Eigen::MatrixXd features;             // T x Df
    Camera camera;
    double body_scale = 1.0;
    unsigned long long seed = 0;

    int frames() const { return static_cast<int>(joints.size()); }
};

struct GenConfig {
    int clips = 4;
    int frames = 8;
    double amplitude = 0.3;
    double noise_std = 2.0;  // 2D keypoint noise in pixels
    double focal = 500.0;
    double image_size = 256.0;
    double camera_distance = 4.0;
    int feature_dim = 32;
    unsigned long long seed = 1;
    /// Consecutive clip pairs share motion, camera and 2D observations but
    /// differ in body scale, so scale is recoverable only from features.
    bool scale_pairs = false;
    double scale_low = 0.85;
    double scale_high = 1.15;
    BodyConfig body;
};

/// Seeded smooth sinusoidal joint rotations over the skeleton tree plus a
/// drifting root; amplitude 0 reproduces the rest pose.
FkSequence animate(const BodyModel& model, unsigned long long seed, int frames, double amplitude);

/// Rigid per-bone skinning of the template by the FK frames.
std::vector<Eigen::MatrixXd> skin(const BodyModel& model, const FkSequence& fk);

/// Pinhole projection of every frame with optional seeded pixel noise.
Eigen::MatrixXd project_2d(const std::vector<Eigen::MatrixXd>& joints, const Camera& camera,
                           double noise_std, std::mt19937_64& noise_rng);

/// Per-frame feature: tanh of a fixed seeded linear map of the ground-truth
/// coarse vertex coordinates and the body-scale scalar. Deliberately
/// informative about shape so the conditioning pathway has signal.
Eigen::MatrixXd synth_features(const std::vector<Eigen::MatrixXd>& verts,
                               const std::vector<int>& coarse_indices, double body_scale,
                               int feature_dim);

MotionClip generate_clip(const GenConfig& config, const BodyModel& model,
                         unsigned long long motion_seed, unsigned long long noise_seed,
                         double body_scale, double camera_angle);

std::vector<MotionClip> generate_dataset(const GenConfig& config);

/// Writes clips plus a human-readable manifest into a directory;
/// byte-reproducible from (config, seed).
void write_dataset(const std::string& dir, const GenConfig& config,
                   const std::vector<MotionClip>& clips);
std::vector<MotionClip> read_dataset(const std::string& dir);

}  // namespace coevo
