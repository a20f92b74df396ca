#include "coevo/metrics.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace coevo {

Eigen::MatrixXd SimilarityTransform::apply(const Eigen::MatrixXd& points) const {
    return ((scale * (rotation * points.transpose())).colwise() + translation).transpose();
}

SimilarityTransform procrustes_align(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
    if (pred.rows() != gt.rows() || pred.cols() != 3 || gt.cols() != 3 || pred.rows() < 3)
        throw std::invalid_argument("procrustes_align: needs matching Nx3 sets with N >= 3");
    Eigen::RowVector3d mu_p = pred.colwise().mean();
    Eigen::RowVector3d mu_g = gt.colwise().mean();
    Eigen::MatrixXd cp = pred.rowwise() - mu_p;
    Eigen::MatrixXd cg = gt.rowwise() - mu_g;

    Eigen::Matrix3d cov = cg.transpose() * cp;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);

    SimilarityTransform t;
    double var_p = cp.squaredNorm();
    Eigen::Vector3d sv = svd.singularValues();
    // two near-zero singular values or a collapsed prediction leave the
    // rotation and scale unidentifiable
    bool degenerate = var_p < 1e-20 || sv(1) <= 1e-12 * std::max(1.0, sv(0));
    if (degenerate) {
        t.translation_only = true;
        t.translation = (mu_g - mu_p).transpose();
        return t;
    }
    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    Eigen::Vector3d d = Eigen::Vector3d::Ones();
    if ((u * v.transpose()).determinant() < 0.0) d(2) = -1.0;  // keep det(R) = +1
    t.rotation = u * d.asDiagonal() * v.transpose();
    t.scale = (sv.array() * d.array()).sum() / var_p;
    t.translation = mu_g.transpose() - t.scale * t.rotation * mu_p.transpose();
    return t;
}

double mean_point_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
        throw std::invalid_argument("mean_point_error: shape mismatch");
    return (pred - gt).rowwise().norm().mean();
}

EvaluationReport compute_metrics(const std::vector<Eigen::MatrixXd>& pred_joints,
                                 const std::vector<Eigen::MatrixXd>& gt_joints,
                                 const std::vector<Eigen::MatrixXd>& pred_verts,
                                 const std::vector<Eigen::MatrixXd>& gt_verts, double fps) {
    if (pred_joints.size() != gt_joints.size() || pred_verts.size() != gt_verts.size() ||
        pred_joints.size() != pred_verts.size() || pred_joints.empty())
        throw std::invalid_argument("compute_metrics: sequence length mismatch or empty");
    const size_t n = pred_joints.size();
    EvaluationReport r;
    r.frames = static_cast<int>(n);
    double mpjpe = 0.0, pa = 0.0, pve = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double raw = mean_point_error(pred_joints[i], gt_joints[i]);
        mpjpe += raw;
        SimilarityTransform t = procrustes_align(pred_joints[i], gt_joints[i]);
        double aligned = mean_point_error(t.apply(pred_joints[i]), gt_joints[i]);
        // the identity is in the similarity group, so alignment can never be
        // scored worse than no alignment
        pa += std::min(aligned, raw);
        pve += mean_point_error(pred_verts[i], gt_verts[i]);
    }
    r.mpjpe = mpjpe / static_cast<double>(n);
    r.pa_mpjpe = pa / static_cast<double>(n);
    r.pve = pve / static_cast<double>(n);

    if (n >= 3) {
        double acc = 0.0;
        Eigen::Index count = 0;
        for (size_t i = 1; i + 1 < n; ++i) {
            Eigen::MatrixXd dp =
                pred_joints[i + 1] - 2.0 * pred_joints[i] + pred_joints[i - 1];
            Eigen::MatrixXd dg = gt_joints[i + 1] - 2.0 * gt_joints[i] + gt_joints[i - 1];
            acc += (dp - dg).rowwise().norm().sum();
            count += dp.rows();
        }
        r.accel = acc / static_cast<double>(count) * fps * fps;
    }
    return r;
}

std::string report_text(const EvaluationReport& report) {
    std::ostringstream out;
    out.precision(9);
    out << "frames " << report.frames << '\n'
        << "mpjpe " << report.mpjpe << '\n'
        << "pa_mpjpe " << report.pa_mpjpe << '\n'
        << "pve " << report.pve << '\n';
    if (report.accel)
        out << "accel " << *report.accel << '\n';
    return out.str();
}

std::string report_json(const EvaluationReport& report) {
    std::ostringstream out;
    out.precision(9);
    out << "{\n  \"frames\": " << report.frames << ",\n  \"mpjpe\": " << report.mpjpe
        << ",\n  \"pa_mpjpe\": " << report.pa_mpjpe << ",\n  \"pve\": " << report.pve;
    if (report.accel) out << ",\n  \"accel\": " << *report.accel;
    out << "\n}\n";
    return out.str();
}

}  // namespace coevo
