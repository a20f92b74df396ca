#include "coevo/data_synth.hpp"

#include "coevo/serialize.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coevo {

namespace {

constexpr char kClipMagic[8] = {'C', 'E', 'V', 'O', 'C', 'L', 'I', 'P'};
constexpr std::uint32_t kClipVersion = 1;
// one fixed stream for the feature projection so features are comparable
// across clips and datasets
constexpr unsigned long long kFeatureSeed = 0xC0FFEEull;

void append_matrix(std::string& buf, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) bin::append<double>(buf, m(r, c));
}

Eigen::MatrixXd read_matrix(bin::Reader& r, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r.read<double>();
    return m;
}

}  // namespace

Eigen::MatrixXd Camera::project(const Eigen::MatrixXd& points) const {
    Eigen::MatrixXd out(points.rows(), 2);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        Eigen::Vector3d pc = rotation * (points.row(i).transpose() - position);
        if (pc.z() < 0.1)
            throw std::runtime_error("project: point " + std::to_string(i) +
                                     " behind or too close to camera (z=" +
                                     std::to_string(pc.z()) + "); re-seed the clip");
        out(i, 0) = focal * pc.x() / pc.z() + image_w / 2.0;
        out(i, 1) = focal * pc.y() / pc.z() + image_h / 2.0;
    }
    return out;
}

FkSequence animate(const BodyModel& model, unsigned long long seed, int frames,
                   double amplitude) {
    if (frames < 1) throw std::invalid_argument("animate: frames must be >= 1");
    const int nj = model.joints();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> freq(0.2, 0.6);
    std::uniform_real_distribution<double> amp(0.5, 1.0);

    std::vector<Eigen::Vector3d> axis(static_cast<size_t>(nj));
    std::vector<double> a(static_cast<size_t>(nj)), w(static_cast<size_t>(nj)),
        phi(static_cast<size_t>(nj));
    for (int j = 0; j < nj; ++j) {
        Eigen::Vector3d ax(unit(rng), unit(rng), unit(rng));
        axis[static_cast<size_t>(j)] = ax.norm() < 1e-9 ? Eigen::Vector3d::UnitX() : ax.normalized();
        a[static_cast<size_t>(j)] = amp(rng);
        w[static_cast<size_t>(j)] = freq(rng);
        phi[static_cast<size_t>(j)] = unit(rng) * 3.141592653589793;
    }
    Eigen::Vector3d drift_dir(unit(rng), unit(rng), unit(rng));

    FkSequence fk;
    for (int t = 0; t < frames; ++t) {
        Eigen::MatrixXd pos(nj, 3);
        std::vector<Eigen::Matrix3d> rot(static_cast<size_t>(nj));
        for (int j = 0; j < nj; ++j) {
            double angle = amplitude * a[static_cast<size_t>(j)] *
                           std::sin(w[static_cast<size_t>(j)] * t + phi[static_cast<size_t>(j)]);
            Eigen::Matrix3d local =
                Eigen::AngleAxisd(angle, axis[static_cast<size_t>(j)]).toRotationMatrix();
            int p = model.skeleton.parent[static_cast<size_t>(j)];
            if (p == j) {
                rot[static_cast<size_t>(j)] = local;
                // Scaled like the skeleton so the whole scene is a pure scaling
                // of the unit-scale motion about the origin.
                Eigen::Vector3d drift =
                    model.config.scale * amplitude * 0.1 * std::sin(0.3 * t) * drift_dir;
                pos.row(j) = (model.skeleton.offsets.row(j).transpose() + drift).transpose();
            } else {
                rot[static_cast<size_t>(j)] = rot[static_cast<size_t>(p)] * local;
                pos.row(j) = pos.row(p) + (rot[static_cast<size_t>(p)] *
                                           model.skeleton.offsets.row(j).transpose())
                                              .transpose();
            }
        }
        fk.joints.push_back(std::move(pos));
        fk.rotations.push_back(std::move(rot));
    }
    return fk;
}

std::vector<Eigen::MatrixXd> skin(const BodyModel& model, const FkSequence& fk) {
    std::vector<Eigen::MatrixXd> out;
    const Eigen::Index nv = model.vertices();
    for (size_t t = 0; t < fk.joints.size(); ++t) {
        Eigen::MatrixXd verts(nv, 3);
        for (Eigen::Index v = 0; v < nv; ++v) {
            int j = model.vertex_bone[static_cast<size_t>(v)];
            Eigen::Vector3d local =
                model.template_vertices.row(v) - model.rest_joints.row(j);
            verts.row(v) = fk.joints[t].row(j) +
                           (fk.rotations[t][static_cast<size_t>(j)] * local).transpose();
        }
        out.push_back(std::move(verts));
    }
    return out;
}

Eigen::MatrixXd project_2d(const std::vector<Eigen::MatrixXd>& joints, const Camera& camera,
                           double noise_std, std::mt19937_64& noise_rng) {
    if (joints.empty()) throw std::invalid_argument("project_2d: empty sequence");
    const Eigen::Index nj = joints[0].rows();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(joints.size()) * nj, 2);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (size_t t = 0; t < joints.size(); ++t) {
        Eigen::MatrixXd px = camera.project(joints[t]);
        if (noise_std > 0.0)
            for (Eigen::Index i = 0; i < px.size(); ++i)
                px(i / 2, i % 2) += noise_std * noise(noise_rng);
        out.block(static_cast<Eigen::Index>(t) * nj, 0, nj, 2) = px;
    }
    return out;
}

Eigen::MatrixXd synth_features(const std::vector<Eigen::MatrixXd>& verts,
                               const std::vector<int>& coarse_indices, double body_scale,
                               int feature_dim) {
    const Eigen::Index in_dim = 3 * static_cast<Eigen::Index>(coarse_indices.size()) + 1;
    std::mt19937_64 rng(kFeatureSeed + static_cast<unsigned long long>(feature_dim) * 31 +
                        static_cast<unsigned long long>(coarse_indices.size()));
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd w(feature_dim, in_dim);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            w(r, c) = 2.0 * g(rng) / std::sqrt(static_cast<double>(in_dim));

    Eigen::MatrixXd out(static_cast<Eigen::Index>(verts.size()), feature_dim);
    for (size_t t = 0; t < verts.size(); ++t) {
        Eigen::VectorXd in(in_dim);
        for (size_t c = 0; c < coarse_indices.size(); ++c)
            in.segment(static_cast<Eigen::Index>(3 * c), 3) =
                verts[t].row(coarse_indices[c]).transpose();
        in(in_dim - 1) = body_scale;
        out.row(static_cast<Eigen::Index>(t)) = (w * in).array().tanh().transpose();
    }
    return out;
}

MotionClip generate_clip(const GenConfig& config, const BodyModel& model,
                         unsigned long long motion_seed, unsigned long long noise_seed,
                         double body_scale, double camera_angle) {
    MotionClip clip;
    clip.seed = motion_seed;
    clip.body_scale = body_scale;

    FkSequence fk = animate(model, motion_seed, config.frames, config.amplitude);
    clip.joints = fk.joints;
    clip.verts = skin(model, fk);

    // camera position scales with the body so scale pairs project identically
    Eigen::Vector3d base(config.camera_distance * std::sin(camera_angle), 1.0,
                         config.camera_distance * std::cos(camera_angle));
    Eigen::Vector3d target(0.0, 1.0, 0.0);
    Eigen::Vector3d fwd = (target - base).normalized();  // camera +z looks at the body
    Eigen::Vector3d right = fwd.cross(Eigen::Vector3d::UnitY()).normalized();
    Eigen::Vector3d down = fwd.cross(right).normalized();
    clip.camera.focal = config.focal;
    clip.camera.image_w = config.image_size;
    clip.camera.image_h = config.image_size;
    clip.camera.rotation.row(0) = right.transpose();
    clip.camera.rotation.row(1) = down.transpose();
    clip.camera.rotation.row(2) = fwd.transpose();
    clip.camera.position = body_scale * base;

    std::mt19937_64 noise_rng(noise_seed);
    clip.pose2d = project_2d(clip.joints, clip.camera, config.noise_std, noise_rng);

    clip.features =
        synth_features(clip.verts, model.coarse.coarse_indices, body_scale, config.feature_dim);
    return clip;
}

std::vector<MotionClip> generate_dataset(const GenConfig& config) {
    std::vector<MotionClip> clips;
    for (int i = 0; i < config.clips; ++i) {
        unsigned long long group = config.scale_pairs ? static_cast<unsigned long long>(i / 2)
                                                      : static_cast<unsigned long long>(i);
        unsigned long long motion_seed = config.seed * 1000003ull + group * 7919ull + 1;
        unsigned long long noise_seed = config.seed * 999983ull + group * 104729ull + 2;
        double scale = 1.0;
        if (config.scale_pairs) scale = (i % 2 == 0) ? config.scale_low : config.scale_high;
        double cam_angle = 0.7 * static_cast<double>(group);
        BodyConfig bc = config.body;
        bc.scale = scale;
        BodyModel body = build_body(bc);
        clips.push_back(generate_clip(config, body, motion_seed, noise_seed, scale, cam_angle));
    }
    return clips;
}

namespace {

std::string clip_bytes(const MotionClip& clip, int feature_dim) {
    std::string body;
    bin::append<std::uint32_t>(body, kClipVersion);
    const Eigen::Index t = clip.frames();
    const Eigen::Index j = clip.joints.empty() ? 0 : clip.joints[0].rows();
    const Eigen::Index v = clip.verts.empty() ? 0 : clip.verts[0].rows();
    bin::append<std::int64_t>(body, t);
    bin::append<std::int64_t>(body, j);
    bin::append<std::int64_t>(body, v);
    bin::append<std::int64_t>(body, feature_dim);
    bin::append<double>(body, clip.camera.focal);
    bin::append<double>(body, clip.camera.image_w);
    bin::append<double>(body, clip.camera.image_h);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) bin::append<double>(body, clip.camera.rotation(r, c));
    for (int r = 0; r < 3; ++r) bin::append<double>(body, clip.camera.position(r));
    bin::append<double>(body, clip.body_scale);
    bin::append<std::uint64_t>(body, clip.seed);
    for (Eigen::Index f = 0; f < t; ++f) append_matrix(body, clip.joints[static_cast<size_t>(f)]);
    for (Eigen::Index f = 0; f < t; ++f) append_matrix(body, clip.verts[static_cast<size_t>(f)]);
    append_matrix(body, clip.pose2d);
    append_matrix(body, clip.features);
    return body;
}

MotionClip parse_clip(const std::string& raw, const std::string& name) {
    if (raw.size() < sizeof(kClipMagic) + 8)
        throw std::runtime_error("dataset: truncated clip file " + name);
    if (raw.compare(0, sizeof(kClipMagic), kClipMagic, sizeof(kClipMagic)) != 0)
        throw std::runtime_error("dataset: bad magic in clip " + name);
    std::string body = raw.substr(sizeof(kClipMagic), raw.size() - sizeof(kClipMagic) - 4);
    std::uint32_t stored;
    std::memcpy(&stored, raw.data() + raw.size() - 4, 4);
    if (bin::crc32(body) != stored)
        throw std::runtime_error("dataset: checksum failure in clip " + name);
    bin::Reader r{body};
    auto version = r.read<std::uint32_t>();
    if (version != kClipVersion)
        throw std::runtime_error("dataset: version mismatch in clip " + name + ": file has " +
                                 std::to_string(version));
    MotionClip clip;
    auto t = r.read<std::int64_t>();
    auto j = r.read<std::int64_t>();
    auto v = r.read<std::int64_t>();
    auto df = r.read<std::int64_t>();
    clip.camera.focal = r.read<double>();
    clip.camera.image_w = r.read<double>();
    clip.camera.image_h = r.read<double>();
    for (int rr = 0; rr < 3; ++rr)
        for (int c = 0; c < 3; ++c) clip.camera.rotation(rr, c) = r.read<double>();
    for (int rr = 0; rr < 3; ++rr) clip.camera.position(rr) = r.read<double>();
    clip.body_scale = r.read<double>();
    clip.seed = r.read<std::uint64_t>();
    for (std::int64_t f = 0; f < t; ++f) clip.joints.push_back(read_matrix(r, j, 3));
    for (std::int64_t f = 0; f < t; ++f) clip.verts.push_back(read_matrix(r, v, 3));
    clip.pose2d = read_matrix(r, t * j, 2);
    clip.features = read_matrix(r, t, df);
    return clip;
}

}  // namespace

void write_dataset(const std::string& dir, const GenConfig& config,
                   const std::vector<MotionClip>& clips) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ostringstream manifest;
    manifest << "# synthetic motion dataset\n";
    manifest << "version " << kClipVersion << '\n';
    manifest << "clips " << clips.size() << '\n';
    manifest << "gen.seed " << config.seed << '\n';
    manifest << "gen.frames " << config.frames << '\n';
    manifest << "gen.amplitude " << config.amplitude << '\n';
    manifest << "gen.noise_std " << config.noise_std << '\n';
    manifest << "gen.feature_dim " << config.feature_dim << '\n';
    manifest << "gen.scale_pairs " << (config.scale_pairs ? 1 : 0) << '\n';
    for (size_t i = 0; i < clips.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "clip_%04zu.bin", i);
        manifest << "clip_file " << name << '\n';
        std::string body = clip_bytes(clips[i], static_cast<int>(clips[i].features.cols()));
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        if (!out) throw std::runtime_error("dataset: cannot write clip " + std::string(name));
        out.write(kClipMagic, sizeof(kClipMagic));
        out.write(body.data(), static_cast<std::streamsize>(body.size()));
        std::uint32_t crc = bin::crc32(body);
        out.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
        if (!out) throw std::runtime_error("dataset: write failed for clip " + std::string(name));
    }
    std::ofstream mout(fs::path(dir) / "manifest.txt");
    if (!mout) throw std::runtime_error("dataset: cannot write manifest in " + dir);
    mout << manifest.str();
}

std::vector<MotionClip> read_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream min(fs::path(dir) / "manifest.txt");
    if (!min) throw std::runtime_error("dataset: no manifest in " + dir);
    std::vector<MotionClip> clips;
    std::string line;
    while (std::getline(min, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key != "clip_file") continue;
        std::string name;
        ls >> name;
        std::ifstream in(fs::path(dir) / name, std::ios::binary);
        if (!in) throw std::runtime_error("dataset: manifest references missing clip " + name);
        std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        clips.push_back(parse_clip(raw, name));
    }
    return clips;
}

}  // namespace coevo
