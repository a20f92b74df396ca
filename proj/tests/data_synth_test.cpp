#include <coevo/data_synth.hpp>

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace coevo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("camera projection hand oracles") {
    Camera cam;
    cam.focal = 500;
    cam.image_w = 256;
    cam.image_h = 256;
    cam.position = Eigen::Vector3d(0, 0, -4);  // looking along +z

    // a point on the optical axis lands on the principal point
    Eigen::MatrixXd p(1, 3);
    p << 0, 0, 0;
    Eigen::MatrixXd px = cam.project(p);
    CHECK(px(0, 0) == doctest::Approx(128.0).epsilon(1e-12));
    CHECK(px(0, 1) == doctest::Approx(128.0).epsilon(1e-12));

    // doubling the depth halves the pixel offset from the principal point
    Eigen::MatrixXd q(2, 3);
    q << 0.5, 0.25, 0, 0.5, 0.25, 4;  // depths 4 and 8
    Eigen::MatrixXd qp = cam.project(q);
    CHECK(qp(0, 0) - 128.0 == doctest::Approx(2.0 * (qp(1, 0) - 128.0)).epsilon(1e-12));
    CHECK(qp(0, 1) - 128.0 == doctest::Approx(2.0 * (qp(1, 1) - 128.0)).epsilon(1e-12));

    // points behind the camera are rejected
    Eigen::MatrixXd behind(1, 3);
    behind << 0, 0, -8;
    CHECK_THROWS(cam.project(behind));
}

TEST_CASE("animation with zero amplitude reproduces the rest pose") {
    BodyModel body = build_body(BodyConfig{});
    FkSequence fk = animate(body, 3, 5, 0.0);
    REQUIRE(fk.joints.size() == 5);
    for (const Eigen::MatrixXd& j : fk.joints)
        CHECK((j - body.rest_joints).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("animation preserves bone lengths") {
    BodyModel body = build_body(BodyConfig{});
    FkSequence fk = animate(body, 7, 6, 0.4);
    for (const Eigen::MatrixXd& j : fk.joints)
        for (int b = 1; b < body.joints(); ++b) {
            double rest = body.skeleton.offsets.row(b).norm();
            double now = (j.row(b) - j.row(body.skeleton.parent[b])).norm();
            CHECK(std::abs(now - rest) < 1e-9);
        }
    // motion actually happens
    CHECK((fk.joints[1] - fk.joints[0]).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("skinning the rest pose returns the template") {
    BodyModel body = build_body(BodyConfig{});
    FkSequence fk = animate(body, 1, 2, 0.0);
    std::vector<Eigen::MatrixXd> verts = skin(body, fk);
    REQUIRE(verts.size() == 2);
    CHECK((verts[0] - body.template_vertices).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("skinned vertices follow their bones rigidly") {
    BodyModel body = build_body(BodyConfig{});
    FkSequence fk = animate(body, 11, 4, 0.5);
    std::vector<Eigen::MatrixXd> verts = skin(body, fk);
    // the offset of a vertex from its owning joint keeps its length
    for (int t = 0; t < 4; ++t)
        for (Eigen::Index v = 0; v < body.vertices(); ++v) {
            int b = body.vertex_bone[static_cast<size_t>(v)];
            double rest = (body.template_vertices.row(v) - body.rest_joints.row(b)).norm();
            double now = (verts[static_cast<size_t>(t)].row(v) - fk.joints[static_cast<size_t>(t)].row(b)).norm();
            CHECK(std::abs(now - rest) < 1e-9);
        }
}

TEST_CASE("synthesized features are bounded and scale-sensitive") {
    BodyModel body = build_body(BodyConfig{});
    FkSequence fk = animate(body, 13, 3, 0.3);
    std::vector<Eigen::MatrixXd> verts = skin(body, fk);
    Eigen::MatrixXd f1 = synth_features(verts, body.coarse.coarse_indices, 1.0, 16);
    REQUIRE(f1.rows() == 3);
    REQUIRE(f1.cols() == 16);
    CHECK(f1.cwiseAbs().maxCoeff() < 1.0);  // tanh range
    Eigen::MatrixXd f2 = synth_features(verts, body.coarse.coarse_indices, 1.1, 16);
    CHECK((f1 - f2).cwiseAbs().maxCoeff() > 1e-6);
    // deterministic in all inputs
    Eigen::MatrixXd f3 = synth_features(verts, body.coarse.coarse_indices, 1.0, 16);
    CHECK((f1 - f3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generated datasets are reproducible from the seed") {
    GenConfig c;
    c.clips = 2;
    c.frames = 4;
    c.feature_dim = 8;
    c.seed = 42;
    std::vector<MotionClip> a = generate_dataset(c);
    std::vector<MotionClip> b = generate_dataset(c);
    REQUIRE(a.size() == 2);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK((a[i].pose2d - b[i].pose2d).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a[i].features - b[i].features).cwiseAbs().maxCoeff() == 0.0);
        for (int t = 0; t < a[i].frames(); ++t)
            CHECK((a[i].verts[static_cast<size_t>(t)] - b[i].verts[static_cast<size_t>(t)]).cwiseAbs().maxCoeff() == 0.0);
    }
    // different seeds generate different motion
    c.seed = 43;
    std::vector<MotionClip> d = generate_dataset(c);
    CHECK((a[0].pose2d - d[0].pose2d).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("scale-paired clips share 2D observations but differ in 3D scale") {
    GenConfig c;
    c.clips = 2;
    c.frames = 4;
    c.feature_dim = 8;
    c.seed = 11;
    c.scale_pairs = true;
    std::vector<MotionClip> clips = generate_dataset(c);
    REQUIRE(clips.size() == 2);
    CHECK(clips[0].body_scale != clips[1].body_scale);
    // identical projected keypoints: scale is invisible in 2D
    CHECK((clips[0].pose2d - clips[1].pose2d).cwiseAbs().maxCoeff() < 1e-9);
    // but the 3D ground truth differs and the features reveal it
    CHECK((clips[0].joints[0] - clips[1].joints[0]).cwiseAbs().maxCoeff() > 1e-3);
    CHECK((clips[0].features - clips[1].features).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("dataset round trip: write, read, rewrite byte-identically") {
    GenConfig c;
    c.clips = 2;
    c.frames = 4;
    c.feature_dim = 8;
    c.seed = 5;
    std::vector<MotionClip> clips = generate_dataset(c);
    TempDir d1("coevo_ds_a"), d2("coevo_ds_b");
    write_dataset(d1.path.string(), c, clips);
    std::vector<MotionClip> loaded = read_dataset(d1.path.string());
    REQUIRE(loaded.size() == clips.size());
    for (size_t i = 0; i < clips.size(); ++i) {
        CHECK((loaded[i].pose2d - clips[i].pose2d).cwiseAbs().maxCoeff() == 0.0);
        CHECK((loaded[i].features - clips[i].features).cwiseAbs().maxCoeff() == 0.0);
        CHECK(loaded[i].body_scale == clips[i].body_scale);
        CHECK(loaded[i].camera.focal == clips[i].camera.focal);
        for (int t = 0; t < clips[i].frames(); ++t) {
            CHECK((loaded[i].joints[static_cast<size_t>(t)] - clips[i].joints[static_cast<size_t>(t)]).cwiseAbs().maxCoeff() == 0.0);
            CHECK((loaded[i].verts[static_cast<size_t>(t)] - clips[i].verts[static_cast<size_t>(t)]).cwiseAbs().maxCoeff() == 0.0);
        }
    }
    // writing the loaded clips reproduces the files byte for byte
    write_dataset(d2.path.string(), c, loaded);
    for (const auto& entry : fs::directory_iterator(d1.path)) {
        fs::path other = d2.path / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(slurp(entry.path()) == slurp(other));
    }
}

TEST_CASE("a corrupted clip file fails its checksum and names the file") {
    GenConfig c;
    c.clips = 1;
    c.frames = 4;
    c.feature_dim = 8;
    std::vector<MotionClip> clips = generate_dataset(c);
    TempDir d("coevo_ds_corrupt");
    write_dataset(d.path.string(), c, clips);
    // flip one payload byte in the clip file
    fs::path clip_file;
    for (const auto& entry : fs::directory_iterator(d.path))
        if (entry.path().extension() == ".bin") clip_file = entry.path();
    REQUIRE(!clip_file.empty());
    std::fstream f(clip_file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(64);
    char byte;
    f.seekg(64);
    f.get(byte);
    f.seekp(64);
    f.put(static_cast<char>(byte ^ 0x01));
    f.close();
    std::string fname = clip_file.filename().string();
    CHECK_THROWS_WITH_AS(read_dataset(d.path.string()), doctest::Contains(fname.c_str()),
                         std::runtime_error);
}

TEST_CASE("an empty dataset is valid") {
    GenConfig c;
    c.clips = 0;
    TempDir d("coevo_ds_empty");
    write_dataset(d.path.string(), c, {});
    CHECK(read_dataset(d.path.string()).empty());
}
