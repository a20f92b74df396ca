#include "coevo/body_model.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace coevo {

namespace {

constexpr double kPi = 3.141592653589793;

struct JointDef {
    const char* name;
    int parent;
    double x, y, z;
};

// torso, head, two arms, two legs; root carries the rest position
const JointDef kJoints24[] = {
    {"pelvis", 0, 0.0, 1.00, 0.0},     {"spine", 0, 0.0, 0.25, 0.0},
    {"neck", 1, 0.0, 0.25, 0.0},       {"head", 2, 0.0, 0.18, 0.0},
    {"l_shoulder", 2, 0.22, -0.02, 0.0},  {"l_elbow", 4, 0.26, 0.0, 0.0},
    {"r_shoulder", 2, -0.22, -0.02, 0.0}, {"r_elbow", 6, -0.26, 0.0, 0.0},
    {"l_hip", 0, 0.12, -0.08, 0.0},    {"l_knee", 8, 0.0, -0.45, 0.0},
    {"r_hip", 0, -0.12, -0.08, 0.0},   {"r_knee", 10, 0.0, -0.45, 0.0},
    {"l_wrist", 5, 0.24, 0.0, 0.0},    {"r_wrist", 7, -0.24, 0.0, 0.0},
    {"l_hand", 12, 0.10, 0.0, 0.0},    {"r_hand", 13, -0.10, 0.0, 0.0},
    {"l_ankle", 9, 0.0, -0.42, 0.0},   {"r_ankle", 11, 0.0, -0.42, 0.0},
    {"l_foot", 16, 0.0, -0.06, 0.12},  {"r_foot", 17, 0.0, -0.06, 0.12},
    {"chest", 1, 0.0, 0.12, 0.05},     {"jaw", 3, 0.0, 0.08, 0.04},
    {"l_toe", 18, 0.0, 0.0, 0.06},     {"r_toe", 19, 0.0, 0.0, 0.06},
};

Eigen::Vector3d ring_point(const Eigen::Vector3d& center, const Eigen::Vector3d& axis,
                           double radius, double angle) {
    Eigen::Vector3d ref =
        std::abs(axis.y()) < 0.9 ? Eigen::Vector3d(0, 1, 0) : Eigen::Vector3d(1, 0, 0);
    Eigen::Vector3d u = axis.cross(ref).normalized();
    Eigen::Vector3d v = axis.cross(u).normalized();
    return center + radius * (std::cos(angle) * u + std::sin(angle) * v);
}

}  // namespace

double BodyModel::height() const {
    return template_vertices.col(1).maxCoeff() - template_vertices.col(1).minCoeff();
}

SkeletonTopology humanoid_skeleton(int joint_count, double scale) {
    if (joint_count != 12 && joint_count != 24)
        throw std::invalid_argument("humanoid_skeleton: joint count must be 12 or 24, got " +
                                    std::to_string(joint_count));
    SkeletonTopology s;
    s.joint_count = joint_count;
    s.parent.resize(static_cast<size_t>(joint_count));
    s.offsets.resize(joint_count, 3);
    for (int j = 0; j < joint_count; ++j) {
        s.parent[static_cast<size_t>(j)] = kJoints24[j].parent;
        s.offsets.row(j) << kJoints24[j].x * scale, kJoints24[j].y * scale, kJoints24[j].z * scale;
    }
    return s;
}

Eigen::MatrixXd rest_joint_positions(const SkeletonTopology& skeleton) {
    Eigen::MatrixXd pos(skeleton.joint_count, 3);
    for (int j = 0; j < skeleton.joint_count; ++j) {
        // parents precede children in the tree tables
        if (skeleton.parent[static_cast<size_t>(j)] == j)
            pos.row(j) = skeleton.offsets.row(j);
        else
            pos.row(j) = pos.row(skeleton.parent[static_cast<size_t>(j)]) + skeleton.offsets.row(j);
    }
    return pos;
}

BodyModel build_body(const BodyConfig& config) {
    const int rings = config.rings_per_bone;
    const int vpr = config.verts_per_ring;
    const int stride = config.coarse_stride;
    if (rings < 1 || vpr < 3 || stride < 1 || stride > vpr || config.ring_radius <= 0.0 ||
        config.scale <= 0.0)
        throw std::invalid_argument("build_body: degenerate config");

    BodyModel m;
    m.config = config;
    m.skeleton = humanoid_skeleton(config.joint_count, config.scale);
    m.rest_joints = rest_joint_positions(m.skeleton);
    const int nj = m.skeleton.joint_count;
    const double radius = config.ring_radius * config.scale;

    const Eigen::Index nv = static_cast<Eigen::Index>(nj) * rings * vpr;
    if (nv < 4) throw std::invalid_argument("build_body: too few vertices");
    m.template_vertices.resize(nv, 3);
    m.vertex_bone.resize(static_cast<size_t>(nv));

    for (int j = 0; j < nj; ++j) {
        Eigen::Vector3d end = m.rest_joints.row(j);
        Eigen::Vector3d start;
        if (m.skeleton.parent[static_cast<size_t>(j)] == j)
            start = end - Eigen::Vector3d(0, 0.1 * config.scale, 0);  // root stub
        else
            start = m.rest_joints.row(m.skeleton.parent[static_cast<size_t>(j)]);
        Eigen::Vector3d axis = (end - start).normalized();
        for (int i = 0; i < rings; ++i) {
            // last ring is centered exactly on the joint
            double t = static_cast<double>(i + 1) / static_cast<double>(rings);
            Eigen::Vector3d center = start + t * (end - start);
            for (int q = 0; q < vpr; ++q) {
                Eigen::Index vi = (static_cast<Eigen::Index>(j) * rings + i) * vpr + q;
                m.template_vertices.row(vi) =
                    ring_point(center, axis, radius, 2.0 * kPi * q / vpr);
                m.vertex_bone[static_cast<size_t>(vi)] = j;
            }
        }
    }

    // triangulated tube bands between consecutive rings of the same bone
    m.topology.vertex_count = nv;
    for (int j = 0; j < nj; ++j)
        for (int i = 0; i + 1 < rings; ++i)
            for (int q = 0; q < vpr; ++q) {
                int a = static_cast<int>((static_cast<Eigen::Index>(j) * rings + i) * vpr) + q;
                int b = static_cast<int>((static_cast<Eigen::Index>(j) * rings + i) * vpr) +
                        (q + 1) % vpr;
                int c = static_cast<int>((static_cast<Eigen::Index>(j) * rings + i + 1) * vpr) + q;
                int d = static_cast<int>((static_cast<Eigen::Index>(j) * rings + i + 1) * vpr) +
                        (q + 1) % vpr;
                m.topology.faces.push_back({a, c, d});
                m.topology.faces.push_back({a, d, b});
            }
    std::set<std::pair<int, int>> seen;
    for (const auto& f : m.topology.faces)
        for (auto [u, v] : {std::pair{f[0], f[1]}, std::pair{f[1], f[2]}, std::pair{f[0], f[2]}}) {
            auto e = std::minmax(u, v);
            if (seen.insert({e.first, e.second}).second)
                m.topology.edges.emplace_back(e.first, e.second);
        }

    // coarse subset: every stride-th vertex of every ring
    for (Eigen::Index ring = 0; ring < static_cast<Eigen::Index>(nj) * rings; ++ring)
        for (int q = 0; q < vpr; q += stride)
            m.coarse.coarse_indices.push_back(static_cast<int>(ring * vpr) + q);
    const Eigen::Index nc = static_cast<Eigen::Index>(m.coarse.coarse_indices.size());
    if (nc < nj) throw std::invalid_argument("build_body: fewer coarse vertices than joints");

    std::vector<char> is_coarse(static_cast<size_t>(nv), 0);
    std::vector<Eigen::Index> coarse_slot(static_cast<size_t>(nv), -1);
    for (Eigen::Index c = 0; c < nc; ++c) {
        is_coarse[static_cast<size_t>(m.coarse.coarse_indices[static_cast<size_t>(c)])] = 1;
        coarse_slot[static_cast<size_t>(m.coarse.coarse_indices[static_cast<size_t>(c)])] = c;
    }

    // interpolation weights: inverse distance to the 3 nearest coarse vertices
    m.coarse.interp = Eigen::MatrixXd::Zero(nv, nc);
    for (Eigen::Index v = 0; v < nv; ++v) {
        if (is_coarse[static_cast<size_t>(v)]) {
            m.coarse.interp(v, coarse_slot[static_cast<size_t>(v)]) = 1.0;
            continue;
        }
        std::vector<std::pair<double, Eigen::Index>> dist;
        dist.reserve(static_cast<size_t>(nc));
        for (Eigen::Index c = 0; c < nc; ++c)
            dist.emplace_back((m.template_vertices.row(v) -
                               m.template_vertices.row(m.coarse.coarse_indices[static_cast<size_t>(c)]))
                                  .norm(),
                              c);
        std::partial_sort(dist.begin(), dist.begin() + 3, dist.end());
        if (dist[0].first < 1e-12) {
            m.coarse.interp(v, dist[0].second) = 1.0;
            continue;
        }
        double total = 0.0;
        for (int k = 0; k < 3; ++k) total += 1.0 / dist[static_cast<size_t>(k)].first;
        for (int k = 0; k < 3; ++k)
            m.coarse.interp(v, dist[static_cast<size_t>(k)].second) =
                1.0 / dist[static_cast<size_t>(k)].first / total;
    }

    // joint regressor: uniform weights over the ring centered on each joint
    m.regressor = Eigen::MatrixXd::Zero(nj, nv);
    for (int j = 0; j < nj; ++j)
        for (int q = 0; q < vpr; ++q)
            m.regressor(j, (static_cast<Eigen::Index>(j) * rings + rings - 1) * vpr + q) =
                1.0 / static_cast<double>(vpr);

    m.nearest_joint.resize(static_cast<size_t>(nc));
    for (Eigen::Index c = 0; c < nc; ++c) {
        Eigen::Index v = m.coarse.coarse_indices[static_cast<size_t>(c)];
        int best = 0;
        double best_d = (m.template_vertices.row(v) - m.rest_joints.row(0)).norm();
        for (int j = 1; j < nj; ++j) {
            double d = (m.template_vertices.row(v) - m.rest_joints.row(j)).norm();
            if (d < best_d) {  // strict: ties keep the lowest joint index
                best_d = d;
                best = j;
            }
        }
        m.nearest_joint[static_cast<size_t>(c)] = best;
    }
    return m;
}

Tensor nearest_joint_init(const BodyModel& model, const Tensor& p0) {
    if (p0.ndim() != 2 || p0.shape()[0] != model.joints() || p0.shape()[1] != 3)
        throw std::invalid_argument("nearest_joint_init: pose " + shape_str(p0.shape()) +
                                    ", expected [" + std::to_string(model.joints()) + ",3]");
    std::vector<Eigen::Index> rows(model.nearest_joint.begin(), model.nearest_joint.end());
    return gather_rows(p0, rows);
}

Eigen::MatrixXd face_normals(const Eigen::MatrixXd& verts, const MeshTopology& topology,
                             std::vector<int>* degenerate_faces) {
    Eigen::MatrixXd normals(static_cast<Eigen::Index>(topology.faces.size()), 3);
    for (size_t fi = 0; fi < topology.faces.size(); ++fi) {
        const auto& f = topology.faces[fi];
        for (int v : f)
            if (v < 0 || v >= verts.rows())
                throw std::invalid_argument("face_normals: face index out of range");
        Eigen::Vector3d e1 = verts.row(f[1]) - verts.row(f[0]);
        Eigen::Vector3d e2 = verts.row(f[2]) - verts.row(f[0]);
        Eigen::Vector3d n = e1.cross(e2);
        double len = n.norm();
        if (len < 1e-12) {
            normals.row(static_cast<Eigen::Index>(fi)).setZero();
            if (degenerate_faces) degenerate_faces->push_back(static_cast<int>(fi));
        } else {
            normals.row(static_cast<Eigen::Index>(fi)) = n / len;
        }
    }
    return normals;
}

Eigen::MatrixXd regress_joints(const Eigen::MatrixXd& verts, const Eigen::MatrixXd& regressor) {
    if (regressor.cols() != verts.rows())
        throw std::invalid_argument("regress_joints: regressor is " +
                                    std::to_string(regressor.rows()) + "x" +
                                    std::to_string(regressor.cols()) + " but mesh has " +
                                    std::to_string(verts.rows()) + " vertices");
    return regressor * verts;
}

void write_obj(const std::string& path, const Eigen::MatrixXd& verts,
               const MeshTopology& topology) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_obj: cannot open " + path);
    out.precision(9);
    for (Eigen::Index v = 0; v < verts.rows(); ++v)
        out << "v " << verts(v, 0) << ' ' << verts(v, 1) << ' ' << verts(v, 2) << '\n';
    for (const auto& f : topology.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out) throw std::runtime_error("write_obj: write failed for " + path);
}

}  // namespace coevo
