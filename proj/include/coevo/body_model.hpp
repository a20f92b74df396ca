#pragma once

#include "coevo/tensor.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace coevo {

struct SkeletonTopology {
    int joint_count = 0;
    std::vector<int> parent;                            // root points at itself
    Eigen::Matrix<double, Eigen::Dynamic, 3> offsets;   // rest offset from parent (root: position)
};

struct MeshTopology {
    Eigen::Index vertex_count = 0;
    std::vector<std::array<int, 3>> faces;
    std::vector<std::pair<int, int>> edges;  // deduplicated, (lo,hi), first-seen order
};

struct CoarseMapping {
    std::vector<int> coarse_indices;  // chosen template vertex indices
    Eigen::MatrixXd interp;           // V x V', row-stochastic; coarse rows one-hot
};

struct BodyConfig {
    int joint_count = 12;  // 12 or 24
    int rings_per_bone = 2;
    int verts_per_ring = 6;
    int coarse_stride = 3;
    // Limb radius of the same order as the ring spacing along a bone; much
    // thinner tubes make sliver triangles whose normal/edge gradients scale
    // like 1/edge-length and swamp the point losses during training.
    double ring_radius = 0.05;
    double scale = 1.0;
};

/// Procedural synthetic humanoid: a fixed joint tree with every bone wrapped
/// in triangulated rings of vertices. Immutable after construction.
struct BodyModel {
    BodyConfig config;
    SkeletonTopology skeleton;
    Eigen::MatrixXd rest_joints;        // J x 3
    Eigen::MatrixXd template_vertices;  // V x 3
    MeshTopology topology;
    CoarseMapping coarse;
    Eigen::MatrixXd regressor;          // J x V, nonnegative rows summing to 1
    std::vector<int> nearest_joint;     // per coarse vertex, ties -> lowest joint
    std::vector<int> vertex_bone;       // owning joint of each fine vertex

    int joints() const { return skeleton.joint_count; }
    Eigen::Index vertices() const { return template_vertices.rows(); }
    Eigen::Index coarse_vertices() const { return static_cast<Eigen::Index>(coarse.coarse_indices.size()); }
    double height() const;  // template bounding-box height
};

SkeletonTopology humanoid_skeleton(int joint_count, double scale);
Eigen::MatrixXd rest_joint_positions(const SkeletonTopology& skeleton);
BodyModel build_body(const BodyConfig& config);

/// Reinitialize each coarse vertex to its precomputed nearest joint of p0.
/// Differentiable in p0 (row gather).
Tensor nearest_joint_init(const BodyModel& model, const Tensor& p0);

/// Unit face normals; degenerate faces produce a zero row and are reported
/// through the optional flag list instead of failing.
Eigen::MatrixXd face_normals(const Eigen::MatrixXd& verts, const MeshTopology& topology,
                             std::vector<int>* degenerate_faces = nullptr);

Eigen::MatrixXd regress_joints(const Eigen::MatrixXd& verts, const Eigen::MatrixXd& regressor);

/// ASCII OBJ with 1-based face indices.
void write_obj(const std::string& path, const Eigen::MatrixXd& verts, const MeshTopology& topology);

}  // namespace coevo
