#include "coevo/model.hpp"

#include <stdexcept>

namespace coevo {

ModelConfig ModelConfig::toy() {
    ModelConfig c;
    c.frames = 8;
    c.pose_channels = 64;
    c.pose_layers = 2;
    c.decoder_channels = 32;
    c.decoder_layers = 2;
    c.feature_dim = 32;
    c.gru_hidden = 16;
    c.heads = 4;
    c.mlp_ratio = 4;
    c.residual_hidden = 48;
    c.body.joint_count = 12;
    c.body.rings_per_bone = 2;
    c.body.verts_per_ring = 6;
    c.body.coarse_stride = 3;  // V = 144, V' = 48
    return c;
}

ModelConfig ModelConfig::paper() {
    ModelConfig c;
    c.frames = 16;
    c.pose_channels = 256;
    c.pose_layers = 3;
    c.decoder_channels = 64;
    c.decoder_layers = 3;
    c.feature_dim = 2048;
    c.gru_hidden = 1024;
    c.heads = 8;
    c.body.joint_count = 24;
    c.body.rings_per_bone = 2;
    c.body.verts_per_ring = 144;
    c.body.coarse_stride = 16;  // V = 6912, V' = 432
    return c;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.frames = 3;
    c.pose_channels = 8;
    c.pose_layers = 1;
    c.decoder_channels = 8;
    c.decoder_layers = 1;
    c.feature_dim = 8;
    c.gru_hidden = 4;
    c.heads = 2;
    c.mlp_ratio = 2;
    c.residual_hidden = 2;
    c.body.joint_count = 12;
    c.body.rings_per_bone = 2;
    c.body.verts_per_ring = 3;
    c.body.coarse_stride = 3;  // V = 72, V' = 24
    return c;
}

PoseMeshModel::PoseMeshModel(const ModelConfig& config, unsigned long long seed)
    : config_(config), body_(build_body(config.body)) {
    std::mt19937_64 rng(seed);
    PoseStreamConfig pc;
    pc.frames = config.frames;
    pc.joints = body_.joints();
    pc.channels = config.pose_channels;
    pc.layers = config.pose_layers;
    pc.feature_dim = config.feature_dim;
    pc.heads = config.heads;
    pc.mlp_ratio = config.mlp_ratio;
    pc.ln_eps = config.ln_eps;
    pose_stream_ = PoseStream::create(params_, pc, rng);

    FeatureAggregatorConfig fc;
    fc.frames = config.frames;
    fc.feature_dim = config.feature_dim;
    fc.hidden = config.gru_hidden;
    fc.read_midframe = config.read_midframe;
    aggregator_ = FeatureAggregator::create(params_, fc, rng);

    DecoderConfig dc;
    dc.joints = body_.joints();
    dc.coarse_verts = static_cast<int>(body_.coarse_vertices());
    dc.fine_verts = static_cast<int>(body_.vertices());
    dc.channels = config.decoder_channels;
    dc.layers = config.decoder_layers;
    dc.feature_dim = config.feature_dim;
    dc.heads = config.heads;
    dc.mlp_ratio = config.mlp_ratio;
    dc.residual_hidden = config.residual_hidden;
    dc.ln_eps = config.ln_eps;
    decoder_ = CoEvoDecoder::create(params_, "decoder", dc, body_.coarse.interp, rng);
}

PoseMeshModel::Output PoseMeshModel::forward(const Tensor& norm_pose2d, const Tensor& features,
                                             std::vector<AttnMaps>* maps) const {
    Output out;
    out.p0 = pose_stream_.forward(norm_pose2d, features);
    out.f = aggregator_.aggregate(features);
    Tensor m0 = nearest_joint_init(body_, out.p0);
    CoEvoDecoder::Output dec = decoder_.forward(out.p0, m0, out.f, maps);
    out.pose = dec.pose;
    out.coarse_mesh = dec.coarse_mesh;
    out.fine_mesh = dec.fine_mesh;
    return out;
}

GradCheckReport model_grad_check(PoseMeshModel& model, unsigned long long seed,
                                 Eigen::Index max_coords) {
    std::mt19937_64 rng(seed);
    // jitter every parameter so zero-initialized conditioning paths carry
    // gradient instead of vanishing identically
    std::normal_distribution<double> jitter(0.0, 0.05);
    std::vector<Tensor> inputs;
    for (const auto& [name, p] : model.params().entries()) {
        Eigen::ArrayXd v = p.values();
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += jitter(rng);
        Tensor t = p;
        t.set_values(v);
        inputs.push_back(t);
    }
    const ModelConfig& cfg = model.config();
    Tensor pose2d = Tensor::randn({cfg.frames, model.body().joints(), 2}, rng, 0.5);
    Tensor feats = Tensor::randn({cfg.frames, cfg.feature_dim}, rng, 0.5);
    auto probe = [&model, &pose2d, &feats](const std::vector<Tensor>&) {
        PoseMeshModel::Output out = model.forward(pose2d, feats);
        return sum(out.p0) + sum(out.f) + sum(out.pose) + sum(out.coarse_mesh) +
               sum(out.fine_mesh);
    };
    return grad_check(probe, inputs, 1e-5, max_coords, &rng);
}

}  // namespace coevo
