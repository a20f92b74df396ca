#pragma once

#include "coevo/body_model.hpp"
#include "coevo/tensor.hpp"

namespace coevo {

struct LossWeights {
    double mesh = 1.0;
    double joint = 1.0;
    double normal = 0.1;
    double edge = 20.0;
};

/// Ground truth for one supervised frame.
struct FrameTarget {
    Eigen::MatrixXd joints;    // J x 3
    Eigen::MatrixXd vertices;  // V x 3
};

/// Mean L1 distance per joint: (1/J) sum |gt - pred| over all coordinates.
Tensor loss_joint_int(const Tensor& p0, const Eigen::MatrixXd& p_gt);

/// Mean L1 per vertex, same form as the joint loss.
Tensor loss_mesh(const Tensor& m, const Eigen::MatrixXd& m_gt);

/// Joint loss on regressed joints: (1/J) sum |p_gt - regressor * m|.
Tensor loss_joint(const Tensor& m, const Eigen::MatrixXd& regressor, const Eigen::MatrixXd& p_gt);

/// Mean over faces and vertex pairs within each face of the absolute cosine
/// between the predicted edge direction and the ground-truth face normal.
/// Degenerate predicted edges are stabilized by a small denominator offset
/// and optionally reported.
Tensor loss_normal(const Tensor& m, const Eigen::MatrixXd& m_gt, const MeshTopology& topology,
                   int* degenerate_edges = nullptr);

/// Mean over faces and vertex pairs of |gt edge length - predicted edge length|.
Tensor loss_edge(const Tensor& m, const Eigen::MatrixXd& m_gt, const MeshTopology& topology);

struct TotalLossParts {
    Tensor mesh, joint, pose_joint, normal, edge;
    Tensor total;
};

/// Weighted training objective: w.mesh*L_mesh + w.joint*L_joint(regressed)
/// + w.normal*L_normal + w.edge*L_edge; with supervise_pose the decoder's
/// direct pose output is additionally penalized with the same joint form at
/// the joint weight.
TotalLossParts total_loss(const Tensor& fine_mesh, const Tensor& pose, const FrameTarget& gt,
                          const Eigen::MatrixXd& regressor, const MeshTopology& topology,
                          const LossWeights& weights, bool supervise_pose = true);

/// The pure weighted-sum arithmetic of the objective.
double combine_weighted(const LossWeights& weights, double mesh, double joint, double normal,
                        double edge);

}  // namespace coevo
