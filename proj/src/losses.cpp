#include "coevo/losses.hpp"

#include <stdexcept>

namespace coevo {

namespace {

void check_points(const char* who, const Tensor& pred, const Eigen::MatrixXd& gt) {
    if (pred.ndim() != 2 || pred.shape()[1] != 3)
        throw std::invalid_argument(std::string(who) + ": prediction must be Nx3, got " +
                                    shape_str(pred.shape()));
    if (pred.shape()[0] != gt.rows() || gt.cols() != 3)
        throw std::invalid_argument(std::string(who) + ": prediction " + shape_str(pred.shape()) +
                                    " vs ground truth " + std::to_string(gt.rows()) + "x" +
                                    std::to_string(gt.cols()));
}

Tensor mean_l1(const Tensor& pred, const Eigen::MatrixXd& gt) {
    Tensor diff = Tensor::from_matrix(gt) - pred;
    return sum(abs_op(diff)) * (1.0 / static_cast<double>(gt.rows()));
}

/// Face-pair endpoint index lists: one entry per (face, vertex pair).
void face_pairs(const MeshTopology& topology, std::vector<Eigen::Index>& ia,
                std::vector<Eigen::Index>& ib) {
    for (const auto& f : topology.faces)
        for (auto [u, v] : {std::pair{f[0], f[1]}, std::pair{f[1], f[2]}, std::pair{f[0], f[2]}}) {
            ia.push_back(u);
            ib.push_back(v);
        }
}

Tensor pair_lengths(const Tensor& m, const std::vector<Eigen::Index>& ia,
                    const std::vector<Eigen::Index>& ib, Tensor* edges_out) {
    Tensor e = gather_rows(m, ia) - gather_rows(m, ib);
    if (edges_out) *edges_out = e;
    // sqrt of the stabilized squared length keeps the gradient finite at 0
    return sqrt_op(sum_axis(square(e), 1, true) + 1e-24);
}

}  // namespace

Tensor loss_joint_int(const Tensor& p0, const Eigen::MatrixXd& p_gt) {
    check_points("loss_joint_int", p0, p_gt);
    return mean_l1(p0, p_gt);
}

Tensor loss_mesh(const Tensor& m, const Eigen::MatrixXd& m_gt) {
    check_points("loss_mesh", m, m_gt);
    return mean_l1(m, m_gt);
}

Tensor loss_joint(const Tensor& m, const Eigen::MatrixXd& regressor,
                  const Eigen::MatrixXd& p_gt) {
    if (m.ndim() != 2 || m.shape()[1] != 3 || regressor.cols() != m.shape()[0] ||
        regressor.rows() != p_gt.rows() || p_gt.cols() != 3)
        throw std::invalid_argument("loss_joint: dimension chain mismatch");
    Tensor joints = matmul(Tensor::from_matrix(regressor), m);
    return mean_l1(joints, p_gt);
}

Tensor loss_normal(const Tensor& m, const Eigen::MatrixXd& m_gt, const MeshTopology& topology,
                   int* degenerate_edges) {
    check_points("loss_normal", m, m_gt);
    std::vector<Eigen::Index> ia, ib;
    face_pairs(topology, ia, ib);
    if (ia.empty()) return Tensor::scalar(0.0);
    Tensor edges;
    Tensor len = pair_lengths(m, ia, ib, &edges);
    if (degenerate_edges) {
        *degenerate_edges = 0;
        const Eigen::ArrayXd& l = len.values();
        for (Eigen::Index i = 0; i < l.size(); ++i)
            if (l[i] < 1e-10) ++*degenerate_edges;
    }
    Tensor dirs = edges / (len + 1e-8);

    Eigen::MatrixXd normals = face_normals(m_gt, topology);
    Eigen::MatrixXd n_rep(static_cast<Eigen::Index>(ia.size()), 3);
    for (Eigen::Index p = 0; p < n_rep.rows(); ++p) n_rep.row(p) = normals.row(p / 3);
    Tensor dots = sum_axis(dirs * Tensor::from_matrix(n_rep), 1);
    // Mean over (face, pair) terms keeps the magnitude independent of mesh
    // resolution and commensurate with the per-point losses.
    return sum(abs_op(dots)) * (1.0 / static_cast<double>(ia.size()));
}

Tensor loss_edge(const Tensor& m, const Eigen::MatrixXd& m_gt, const MeshTopology& topology) {
    check_points("loss_edge", m, m_gt);
    std::vector<Eigen::Index> ia, ib;
    face_pairs(topology, ia, ib);
    if (ia.empty()) return Tensor::scalar(0.0);
    Tensor pred_len = pair_lengths(m, ia, ib, nullptr);
    Eigen::ArrayXd gt_len(static_cast<Eigen::Index>(ia.size()));
    for (size_t p = 0; p < ia.size(); ++p)
        gt_len[static_cast<Eigen::Index>(p)] = (m_gt.row(ia[p]) - m_gt.row(ib[p])).norm();
    Tensor gt =
        Tensor::from(Shape{static_cast<Eigen::Index>(ia.size()), 1}, gt_len);
    return sum(abs_op(gt - pred_len)) * (1.0 / static_cast<double>(ia.size()));
}

TotalLossParts total_loss(const Tensor& fine_mesh, const Tensor& pose, const FrameTarget& gt,
                          const Eigen::MatrixXd& regressor, const MeshTopology& topology,
                          const LossWeights& weights, bool supervise_pose) {
    TotalLossParts parts;
    parts.mesh = loss_mesh(fine_mesh, gt.vertices);
    parts.joint = loss_joint(fine_mesh, regressor, gt.joints);
    parts.normal = loss_normal(fine_mesh, gt.vertices, topology);
    parts.edge = loss_edge(fine_mesh, gt.vertices, topology);
    parts.total = weights.mesh * parts.mesh + weights.joint * parts.joint +
                  weights.normal * parts.normal + weights.edge * parts.edge;
    if (supervise_pose) {
        parts.pose_joint = loss_joint_int(pose, gt.joints);
        parts.total = parts.total + weights.joint * parts.pose_joint;
    } else {
        parts.pose_joint = Tensor::scalar(0.0);
    }
    return parts;
}

double combine_weighted(const LossWeights& weights, double mesh, double joint, double normal,
                        double edge) {
    return weights.mesh * mesh + weights.joint * joint + weights.normal * normal +
           weights.edge * edge;
}

}  // namespace coevo
