#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace coevo {

struct SimilarityTransform {
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    bool translation_only = false;  // set when the point set was rank deficient

    Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const;
};

/// Best-fit similarity transform (scale, proper rotation, translation)
/// minimizing the squared distance from the transformed prediction to the
/// ground truth. Rank-deficient configurations fall back to translation only.
SimilarityTransform procrustes_align(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);

struct EvaluationReport {
    double mpjpe = 0.0;
    double pa_mpjpe = 0.0;
    double pve = 0.0;
    std::optional<double> accel;  // absent for sequences shorter than 3 frames
    int frames = 0;
};

/// Mean Euclidean row distance between two N x 3 point sets.
double mean_point_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);

/// Sequence metrics. Joint and vertex sequences are frame-indexed vectors of
/// J x 3 / V x 3 matrices; fps scales the acceleration error to units/s^2.
EvaluationReport compute_metrics(const std::vector<Eigen::MatrixXd>& pred_joints,
                                 const std::vector<Eigen::MatrixXd>& gt_joints,
                                 const std::vector<Eigen::MatrixXd>& pred_verts,
                                 const std::vector<Eigen::MatrixXd>& gt_verts, double fps = 1.0);

std::string report_text(const EvaluationReport& report);
std::string report_json(const EvaluationReport& report);

}  // namespace coevo
