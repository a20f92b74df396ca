#include "coevo/decoder.hpp"

#include <stdexcept>

namespace coevo {

CoEvoBlock CoEvoBlock::create(ParameterStore& store, const std::string& name,
                              const DecoderConfig& config, std::mt19937_64& rng) {
    const int c = config.channels;
    const int df = config.feature_dim;
    const int hidden = c * config.mlp_ratio;
    CoEvoBlock b;
    b.ada_cross_pose = AdaLayerNorm::create(store, name + "/ada_cross_pose", df, c, true, config.ln_eps);
    b.ada_cross_mesh = AdaLayerNorm::create(store, name + "/ada_cross_mesh", df, c, true, config.ln_eps);
    b.cross_pose = MultiHeadAttention::create(store, name + "/cross_pose", c, config.heads, rng);
    b.cross_mesh = MultiHeadAttention::create(store, name + "/cross_mesh", c, config.heads, rng);
    b.ada_mlp1_pose = AdaLayerNorm::create(store, name + "/ada_mlp1_pose", df, c, true, config.ln_eps);
    b.ada_mlp1_mesh = AdaLayerNorm::create(store, name + "/ada_mlp1_mesh", df, c, true, config.ln_eps);
    b.mlp1_pose = MlpBlock::create(store, name + "/mlp1_pose", c, hidden, rng);
    b.mlp1_mesh = MlpBlock::create(store, name + "/mlp1_mesh", c, hidden, rng);
    b.ada_self_pose = AdaLayerNorm::create(store, name + "/ada_self_pose", df, c, true, config.ln_eps);
    b.ada_self_mesh = AdaLayerNorm::create(store, name + "/ada_self_mesh", df, c, true, config.ln_eps);
    b.self_pose = MultiHeadAttention::create(store, name + "/self_pose", c, config.heads, rng);
    b.self_mesh = MultiHeadAttention::create(store, name + "/self_mesh", c, config.heads, rng);
    b.ada_mlp2_pose = AdaLayerNorm::create(store, name + "/ada_mlp2_pose", df, c, true, config.ln_eps);
    b.ada_mlp2_mesh = AdaLayerNorm::create(store, name + "/ada_mlp2_mesh", df, c, true, config.ln_eps);
    b.mlp2_pose = MlpBlock::create(store, name + "/mlp2_pose", c, hidden, rng);
    b.mlp2_mesh = MlpBlock::create(store, name + "/mlp2_mesh", c, hidden, rng);
    return b;
}

void CoEvoBlock::apply(Tensor& xp, Tensor& xm, const Tensor& f, AttnMaps* maps) const {
    // both cross attentions read the same pre-update normalized streams
    Tensor np = ada_cross_pose.apply(xp, f);
    Tensor nm = ada_cross_mesh.apply(xm, f);
    if (maps) {
        cross_pose.attn_capture = &maps->pose_to_mesh;
        cross_mesh.attn_capture = &maps->mesh_to_pose;
    }
    Tensor dp = cross_pose.cross_attn(np, nm);
    Tensor dm = cross_mesh.cross_attn(nm, np);
    xp = xp + dp;
    xm = xm + dm;

    xp = xp + mlp1_pose.apply(ada_mlp1_pose.apply(xp, f));
    xm = xm + mlp1_mesh.apply(ada_mlp1_mesh.apply(xm, f));

    if (maps) {
        self_pose.attn_capture = &maps->pose_to_pose;
        self_mesh.attn_capture = &maps->mesh_to_mesh;
    }
    xp = xp + self_pose.self_attn(ada_self_pose.apply(xp, f));
    xm = xm + self_mesh.self_attn(ada_self_mesh.apply(xm, f));

    xp = xp + mlp2_pose.apply(ada_mlp2_pose.apply(xp, f));
    xm = xm + mlp2_mesh.apply(ada_mlp2_mesh.apply(xm, f));
}

CoEvoDecoder CoEvoDecoder::create(ParameterStore& store, const std::string& name,
                                  const DecoderConfig& config, const Eigen::MatrixXd& up_init,
                                  std::mt19937_64& rng) {
    if (up_init.rows() != config.fine_verts || up_init.cols() != config.coarse_verts)
        throw std::invalid_argument("decoder: upsample init is " + std::to_string(up_init.rows()) +
                                    "x" + std::to_string(up_init.cols()) + ", config wants " +
                                    std::to_string(config.fine_verts) + "x" +
                                    std::to_string(config.coarse_verts));
    if (config.channels % config.heads != 0)
        throw std::invalid_argument("decoder: channels not divisible by heads");
    CoEvoDecoder d;
    d.config = config;
    const int c = config.channels;
    d.pose_embed = LinearLayer::create(store, name + "/pose_embed", 3, c, rng);
    d.mesh_embed = LinearLayer::create(store, name + "/mesh_embed", 3, c, rng);
    d.pose_pos = store.create_randn(name + "/pose_pos", {config.joints, c}, rng, 0.02);
    d.mesh_pos = store.create_randn(name + "/mesh_pos", {config.coarse_verts, c}, rng, 0.02);
    for (int l = 0; l < config.layers; ++l)
        d.blocks.push_back(
            CoEvoBlock::create(store, name + "/block" + std::to_string(l), config, rng));
    // Zero init: the untrained decoder passes its inputs through unchanged, so
    // end-to-end training starts from the pose stream's estimate instead of noise.
    d.pose_head = LinearLayer::create_zero(store, name + "/pose_head", c, 3);
    d.mesh_head = LinearLayer::create_zero(store, name + "/mesh_head", c, 3);

    Eigen::ArrayXd up(up_init.size());
    for (Eigen::Index r = 0; r < up_init.rows(); ++r)
        for (Eigen::Index col = 0; col < up_init.cols(); ++col)
            up[r * up_init.cols() + col] = up_init(r, col);
    // Fixed, not trained: rows sum to one, so a coarse-mesh translation passes
    // through to the fine mesh exactly and the shape losses stay
    // translation-neutral. Learned detail comes from the residual path.
    d.up_weight = Tensor::from({config.fine_verts, config.coarse_verts}, up);
    d.res_fc1 = LinearLayer::create(store, name + "/res_fc1", config.feature_dim,
                                    3 * config.residual_hidden, rng);
    d.res_w2 = store.create_zeros(name + "/res_w2", {config.fine_verts, config.residual_hidden});
    d.res_b2 = store.create_zeros(name + "/res_b2", {config.fine_verts});
    return d;
}

Tensor CoEvoDecoder::upsample_with_residual(const Tensor& coarse, const Tensor& f) const {
    Tensor lifted = matmul(up_weight, coarse);
    Tensor h = gelu(res_fc1.apply(f));                              // [3k]
    Tensor basis = transpose_last2(reshape(h, {3, config.residual_hidden}));  // [k,3]
    Tensor residual = matmul(res_w2, basis) + reshape(res_b2, {config.fine_verts, 1});
    return lifted + residual;
}

CoEvoDecoder::Output CoEvoDecoder::forward(const Tensor& p0, const Tensor& m0, const Tensor& f,
                                           std::vector<AttnMaps>* maps) const {
    if (p0.ndim() != 2 || p0.shape()[0] != config.joints || p0.shape()[1] != 3)
        throw std::invalid_argument("decoder: pose input " + shape_str(p0.shape()));
    if (m0.ndim() != 2 || m0.shape()[0] != config.coarse_verts || m0.shape()[1] != 3)
        throw std::invalid_argument("decoder: mesh input " + shape_str(m0.shape()));
    Tensor xp = pose_embed.apply(p0) + pose_pos;
    Tensor xm = mesh_embed.apply(m0) + mesh_pos;
    if (maps) maps->assign(blocks.size(), AttnMaps{});
    for (size_t l = 0; l < blocks.size(); ++l)
        blocks[l].apply(xp, xm, f, maps ? &(*maps)[l] : nullptr);
    Output out;
    // heads refine the initial estimates rather than replacing them
    out.pose = p0 + pose_head.apply(xp);
    out.coarse_mesh = m0 + mesh_head.apply(xm);
    out.fine_mesh = upsample_with_residual(out.coarse_mesh, f);
    return out;
}

}  // namespace coevo
