// Acceptance gate: one pass/fail line per criterion. Exits nonzero when any
// criterion fails. The trained criteria (9-11) run real optimizations and
// dominate the runtime (roughly fifteen minutes total).

#include <coevo/checkpoint.hpp>
#include <coevo/data_synth.hpp>
#include <coevo/losses.hpp>
#include <coevo/metrics.hpp>
#include <coevo/model.hpp>
#include <coevo/trainer.hpp>

#include <Eigen/Geometry>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace coevo;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& what) {
    std::printf("criterion %2d: %s - %s\n", criterion, ok ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

void run(int criterion, const std::string& what, const std::function<bool()>& body) {
    bool ok = false;
    std::string note = what;
    try {
        ok = body();
    } catch (const std::exception& e) {
        note += std::string(" (exception: ") + e.what() + ")";
    }
    report(criterion, ok, note);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor leaf(const Shape& shape, std::mt19937_64& rng, double stddev = 1.0) {
    Tensor t = Tensor::randn(shape, rng, stddev);
    t.set_requires_grad(true);
    return t;
}

bool grad_ok(const GradCheckReport& rep) { return rep.max_rel_error < 1e-4; }

Eigen::Matrix3d rotation_zyx(double a, double b, double c) {
    return (Eigen::AngleAxis<double>(a, Eigen::Vector3d::UnitZ()) *
            Eigen::AngleAxis<double>(b, Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxis<double>(c, Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

Tensor tensor_of(const Eigen::MatrixXd& m) {
    Eigen::ArrayXd v(m.size());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) v[r * m.cols() + c] = m(r, c);
    return Tensor::from({m.rows(), m.cols()}, v);
}

Eigen::MatrixXd random_points(int n, std::mt19937_64& rng, double spread = 1.0) {
    std::normal_distribution<double> d(0.0, spread);
    Eigen::MatrixXd m(n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = d(rng);
    return m;
}

Eigen::ArrayXd flat_params(const PoseMeshModel& model) {
    Eigen::ArrayXd out(model.params().total_size());
    Eigen::Index at = 0;
    for (auto& [name, p] : model.params().entries()) {
        out.segment(at, p.size()) = p.values();
        at += p.size();
    }
    return out;
}

// ---------------------------------------------------------------------------

bool criterion1_gradients() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    bool ok = true;

    {  // linear
        ParameterStore s;
        LinearLayer lin = LinearLayer::create(s, "lin", 4, 3, rng);
        Tensor x = leaf({5, 4}, rng);
        std::vector<Tensor> in{x, lin.weight, lin.bias};
        ok &= grad_ok(grad_check(
            [&](const std::vector<Tensor>& v) { return sum(square(lin.apply(v[0]))); }, in));
    }
    {  // layer norm
        ParameterStore s;
        LayerNorm ln = LayerNorm::create(s, "ln", 6);
        Tensor x = leaf({4, 6}, rng);
        ok &= grad_ok(grad_check(
            [&](const std::vector<Tensor>& v) { return sum(square(ln.apply(v[0]))); },
            {x, ln.scale, ln.shift}));
    }
    {  // adaptive layer norm (conditioned)
        ParameterStore s;
        AdaLayerNorm ada = AdaLayerNorm::create(s, "ada", 5, 6);
        Tensor w1 = ada.to_scale.weight, w2 = ada.to_shift.weight;
        w1.set_values(0.3 * Eigen::ArrayXd::Random(w1.size()));
        w2.set_values(0.3 * Eigen::ArrayXd::Random(w2.size()));
        Tensor x = leaf({3, 6}, rng);
        Tensor f = leaf({1, 5}, rng);
        std::vector<Tensor> in{x, f};
        for (auto& [n, p] : s.entries()) in.push_back(p);
        ok &= grad_ok(grad_check(
            [&](const std::vector<Tensor>& v) { return sum(square(ada.apply(v[0], v[1]))); }, in));
    }
    {  // mlp block
        ParameterStore s;
        MlpBlock mlp = MlpBlock::create(s, "mlp", 5, 8, rng);
        Tensor x = leaf({3, 5}, rng);
        std::vector<Tensor> in{x};
        for (auto& [n, p] : s.entries()) in.push_back(p);
        ok &= grad_ok(grad_check(
            [&](const std::vector<Tensor>& v) { return sum(square(mlp.apply(v[0]))); }, in));
    }
    {  // multi-head attention, self and cross
        ParameterStore s;
        MultiHeadAttention mha = MultiHeadAttention::create(s, "mha", 8, 2, rng);
        Tensor x = leaf({4, 8}, rng, 0.5);
        Tensor y = leaf({3, 8}, rng, 0.5);
        std::vector<Tensor> in{x, y, mha.wq, mha.wk, mha.wv, mha.wo};
        ok &= grad_ok(grad_check(
            [&](const std::vector<Tensor>& v) {
                return sum(square(mha.self_attn(v[0]))) + sum(square(mha.cross_attn(v[0], v[1])));
            },
            in));
    }
    {  // transformer block
        ParameterStore s;
        TransformerBlock blk = TransformerBlock::create(s, "blk", 8, 2, 16, rng);
        Tensor x = leaf({4, 8}, rng, 0.5);
        std::vector<Tensor> in{x};
        for (auto& [n, p] : s.entries()) in.push_back(p);
        ok &= grad_ok(grad_check(
            [&](const std::vector<Tensor>& v) { return sum(square(blk.apply(v[0]))); }, in));
    }
    {  // recurrent cell
        ParameterStore s;
        GruCell cell = GruCell::create(s, "gru", 3, 4, rng);
        Tensor x = leaf({1, 3}, rng);
        Tensor h = leaf({1, 4}, rng);
        std::vector<Tensor> in{x, h};
        for (auto& [n, p] : s.entries()) in.push_back(p);
        ok &= grad_ok(grad_check(
            [&](const std::vector<Tensor>& v) { return sum(square(cell.step(v[0], v[1]))); }, in));
    }
    {  // full model, exhaustive on the smallest configuration
        PoseMeshModel tiny(ModelConfig::tiny(), 5);
        ok &= grad_ok(model_grad_check(tiny, 21));
    }
    {  // full model, sampled coordinates on the training configuration
        PoseMeshModel toy(ModelConfig::toy(), 6);
        ok &= grad_ok(model_grad_check(toy, 22, 2));
    }
    double dt = seconds_since(t0);
    std::printf("  [criterion 1 took %.1f s]\n", dt);
    return ok && dt < 60.0;
}

bool criterion2_attention() {
    std::mt19937_64 rng(102);
    bool ok = true;

    // softmax rows sum to one within 1e-12
    Tensor s = softmax(Tensor::randn({7, 9}, rng, 3.0), 1);
    for (Eigen::Index r = 0; r < 7; ++r) {
        double row = 0;
        for (Eigen::Index c = 0; c < 9; ++c) row += s.at({r, c});
        ok &= std::abs(row - 1.0) < 1e-12;
    }

    // attention outputs stay in the convex hull of the value rows
    Tensor q = Tensor::randn({5, 8}, rng, 2.0);
    Tensor k = Tensor::randn({6, 8}, rng, 2.0);
    Tensor v = Tensor::randn({6, 8}, rng);
    Tensor out = scaled_dot_attention(q, k, v);
    Eigen::MatrixXd vm = v.as_matrix();
    for (Eigen::Index c = 0; c < 8; ++c) {
        double lo = vm.col(c).minCoeff(), hi = vm.col(c).maxCoeff();
        for (Eigen::Index r = 0; r < 5; ++r) {
            ok &= out.at({r, c}) >= lo - 1e-12;
            ok &= out.at({r, c}) <= hi + 1e-12;
        }
    }

    // cross attention on identical inputs is bit-exactly self attention
    ParameterStore store;
    MultiHeadAttention mha = MultiHeadAttention::create(store, "mha", 16, 4, rng);
    Tensor x = Tensor::randn({5, 16}, rng);
    ok &= (mha.cross_attn(x, x).values() == mha.self_attn(x).values()).all();
    return ok;
}

bool criterion3_adaln_degeneracy() {
    std::mt19937_64 rng(103);
    ParameterStore sa;
    AdaLayerNorm ada = AdaLayerNorm::create(sa, "ada", 4, 6, /*unit_gain=*/false);
    Eigen::ArrayXd a = Eigen::ArrayXd::Random(6) + 1.5;
    Eigen::ArrayXd b = Eigen::ArrayXd::Random(6);
    Tensor bs = ada.to_scale.bias, bh = ada.to_shift.bias;
    bs.set_values(a);
    bh.set_values(b);

    ParameterStore sl;
    LayerNorm ln = LayerNorm::create(sl, "ln", 6);
    Tensor ls = ln.scale, lh = ln.shift;
    ls.set_values(a);
    lh.set_values(b);

    for (int trial = 0; trial < 100; ++trial) {
        Tensor x = Tensor::randn({3, 6}, rng, 2.0);
        Tensor f = Tensor::randn({1, 4}, rng, 2.0);
        if ((ada.apply(x, f).values() - ln.apply(x).values()).abs().maxCoeff() >= 1e-12)
            return false;
    }
    return true;
}

bool criterion4_normalization() {
    bool ok = true;
    for (auto [w, h] : std::vector<std::pair<int, int>>{{1920, 1080}, {256, 256}, {640, 480}}) {
        Eigen::MatrixXd corners(2, 2);
        corners << 0, 0, w, h;
        Eigen::MatrixXd n = normalize_2d(corners, w, h);
        double a = static_cast<double>(h) / w;
        ok &= n(0, 0) == -1.0 && n(0, 1) == -a;
        ok &= n(1, 0) == 1.0 && n(1, 1) == a;
    }
    std::mt19937_64 rng(104);
    std::uniform_real_distribution<double> ux(0, 1920), uy(0, 1080);
    Eigen::MatrixXd px(100, 2);
    for (int i = 0; i < 100; ++i) {
        px(i, 0) = ux(rng);
        px(i, 1) = uy(rng);
    }
    ok &= (denormalize_2d(normalize_2d(px, 1920, 1080), 1920, 1080) - px).cwiseAbs().maxCoeff() <
          1e-9;
    return ok;
}

bool criterion5_losses() {
    BodyModel body = build_body(BodyConfig{});
    bool ok = true;

    // all five losses vanish on perfect predictions (up to roundoff)
    Tensor tv = tensor_of(body.template_vertices);
    Tensor tj = tensor_of(body.rest_joints);
    ok &= loss_mesh(tv, body.template_vertices).item() < 1e-12;
    ok &= loss_joint_int(tj, body.rest_joints).item() < 1e-12;
    ok &= loss_joint(tv, body.regressor, regress_joints(body.template_vertices, body.regressor))
              .item() < 1e-12;
    ok &= loss_normal(tv, body.template_vertices, body.topology).item() < 1e-12;
    ok &= loss_edge(tv, body.template_vertices, body.topology).item() < 1e-12;

    // edge loss is rigid-invariant
    Eigen::Matrix3d r = rotation_zyx(0.7, -0.4, 1.1);
    Eigen::MatrixXd moved =
        (body.template_vertices * r.transpose()).rowwise() + Eigen::RowVector3d(3, -2, 0.5);
    ok &= loss_edge(tensor_of(moved), body.template_vertices, body.topology).item() < 1e-10;

    // normal loss is positive under a generic rotation
    Eigen::MatrixXd rotated = body.template_vertices * rotation_zyx(0.9, 0.5, -0.3).transpose();
    ok &= loss_normal(tensor_of(rotated), body.template_vertices, body.topology).item() > 1e-4;

    // weighted combination with weights (1, 1, 0.1, 20) and component values
    // (2, 1, 3, 0.1): 1*2 + 1*1 + 0.1*3 + 20*0.1 = 5.3 exactly
    LossWeights w;
    w.mesh = 1;
    w.joint = 1;
    w.normal = 0.1;
    w.edge = 20;
    ok &= combine_weighted(w, 2.0, 1.0, 3.0, 0.1) == 5.3;
    return ok;
}

bool criterion6_metrics() {
    std::mt19937_64 rng(106);
    bool ok = true;

    // PA-MPJPE never exceeds MPJPE
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Eigen::MatrixXd> pj, gj;
        for (int f = 0; f < 3; ++f) {
            Eigen::MatrixXd gt = random_points(12, rng);
            pj.push_back(gt + 0.3 * random_points(12, rng));
            gj.push_back(gt);
        }
        EvaluationReport rep = compute_metrics(pj, gj, pj, gj);
        ok &= rep.pa_mpjpe <= rep.mpjpe + 1e-12;
    }

    // PA-MPJPE below 1e-8 when prediction is a similarity transform of GT
    {
        Eigen::Matrix3d r = rotation_zyx(-0.6, 0.2, 0.9);
        std::vector<Eigen::MatrixXd> pj, gj;
        for (int f = 0; f < 4; ++f) {
            Eigen::MatrixXd gt = random_points(12, rng);
            pj.push_back(Eigen::MatrixXd(
                (0.8 * (gt * r.transpose())).rowwise() + Eigen::RowVector3d(1, 2, 3)));
            gj.push_back(gt);
        }
        ok &= compute_metrics(pj, gj, pj, gj).pa_mpjpe < 1e-8;
    }

    // acceleration error is zero for a constant offset
    {
        std::vector<Eigen::MatrixXd> pj, gj;
        for (int f = 0; f < 6; ++f) {
            Eigen::MatrixXd gt = random_points(12, rng);
            gj.push_back(gt);
            pj.push_back(gt.rowwise() + Eigen::RowVector3d(0.4, -0.1, 0.25));
        }
        EvaluationReport rep = compute_metrics(pj, gj, pj, gj);
        ok &= rep.accel.has_value() && *rep.accel < 1e-12;
    }

    // everything vanishes on exact predictions
    {
        std::vector<Eigen::MatrixXd> j, v;
        for (int f = 0; f < 4; ++f) {
            j.push_back(random_points(12, rng));
            v.push_back(random_points(48, rng));
        }
        EvaluationReport rep = compute_metrics(j, j, v, v);
        ok &= rep.mpjpe == 0.0 && rep.pve == 0.0 && rep.pa_mpjpe < 1e-12;
        ok &= rep.accel.has_value() && *rep.accel == 0.0;
    }
    return ok;
}

bool criterion7_mesh_init() {
    BodyModel body = build_body(BodyConfig{});
    std::mt19937_64 rng(107);
    Tensor p0 = Tensor::randn({body.joints(), 3}, rng);
    Tensor m0 = nearest_joint_init(body, p0);
    bool ok = m0.shape() == Shape{body.coarse_vertices(), 3};

    // every coarse vertex coincides with a joint; at most J distinct rows
    std::set<std::array<double, 3>> rows;
    std::set<std::array<double, 3>> joints;
    for (int j = 0; j < body.joints(); ++j)
        joints.insert({p0.at({j, 0}), p0.at({j, 1}), p0.at({j, 2})});
    for (Eigen::Index v = 0; v < body.coarse_vertices(); ++v) {
        std::array<double, 3> row{m0.at({v, 0}), m0.at({v, 1}), m0.at({v, 2})};
        ok &= joints.count(row) == 1;
        rows.insert(row);
    }
    ok &= static_cast<int>(rows.size()) <= body.joints();

    // translation equivariance
    Eigen::RowVector3d t(1.0, 2.0, -3.0);
    Eigen::ArrayXd shifted = p0.values();
    for (Eigen::Index j = 0; j < body.joints(); ++j)
        for (int d = 0; d < 3; ++d) shifted[j * 3 + d] += t(d);
    Tensor m1 = nearest_joint_init(body, Tensor::from(p0.shape(), shifted));
    for (Eigen::Index v = 0; v < body.coarse_vertices(); ++v)
        for (int d = 0; d < 3; ++d)
            ok &= std::abs(m1.at({v, d}) - m0.at({v, d}) - t(d)) < 1e-12;
    return ok;
}

bool criterion8_cross_attention_ablation() {
    BodyModel body = build_body(BodyConfig{});
    DecoderConfig cfg;
    cfg.joints = body.joints();
    cfg.coarse_verts = static_cast<int>(body.coarse_vertices());
    cfg.fine_verts = static_cast<int>(body.vertices());
    cfg.channels = 16;
    cfg.layers = 2;
    cfg.feature_dim = 8;
    cfg.heads = 2;
    cfg.residual_hidden = 4;

    auto build = [&](const std::string& zero_needle) {
        ParameterStore store;
        std::mt19937_64 rng(108);
        CoEvoDecoder dec = CoEvoDecoder::create(store, "dec", cfg, body.coarse.interp, rng);
        std::mt19937_64 wr(5);
        for (auto& [name, p] : store.entries()) {
            Tensor t = p;
            if (name.find("pose_head") != std::string::npos ||
                name.find("mesh_head") != std::string::npos)
                t.set_values(0.1 * Eigen::ArrayXd::Random(t.size()));
            if (!zero_needle.empty() && name.find(zero_needle) != std::string::npos)
                t.set_values(Eigen::ArrayXd::Zero(t.size()));
        }
        return std::make_pair(std::move(store), dec);
    };

    std::mt19937_64 rng(109);
    Tensor p0 = Tensor::randn({cfg.joints, 3}, rng, 0.3);
    Tensor m0 = Tensor::randn({cfg.coarse_verts, 3}, rng, 0.3);
    Tensor f = Tensor::randn({cfg.feature_dim}, rng);
    Tensor m0_pert = Tensor::from(m0.shape(), Eigen::ArrayXd(m0.values() + 0.1));
    Tensor p0_pert = Tensor::from(p0.shape(), Eigen::ArrayXd(p0.values() + 0.1));

    bool ok = true;
    {  // severing mesh-to-pose: P ignores M0, M' still follows P0
        auto [store, dec] = build("cross_pose");
        CoEvoDecoder::Output base = dec.forward(p0, m0, f);
        CoEvoDecoder::Output mp = dec.forward(p0, m0_pert, f);
        ok &= (mp.pose.values() - base.pose.values()).abs().maxCoeff() < 1e-12;
        CoEvoDecoder::Output pp = dec.forward(p0_pert, m0, f);
        ok &= (pp.coarse_mesh.values() - base.coarse_mesh.values()).abs().maxCoeff() > 1e-8;
    }
    {  // severing pose-to-mesh: M' ignores P0, P still follows M0
        auto [store, dec] = build("cross_mesh");
        CoEvoDecoder::Output base = dec.forward(p0, m0, f);
        CoEvoDecoder::Output pp = dec.forward(p0_pert, m0, f);
        ok &= (pp.coarse_mesh.values() - base.coarse_mesh.values()).abs().maxCoeff() < 1e-12;
        CoEvoDecoder::Output mp = dec.forward(p0, m0_pert, f);
        ok &= (mp.pose.values() - base.pose.values()).abs().maxCoeff() > 1e-8;
    }
    {  // intact decoder: both sensitivities present
        auto [store, dec] = build("");
        CoEvoDecoder::Output base = dec.forward(p0, m0, f);
        CoEvoDecoder::Output mp = dec.forward(p0, m0_pert, f);
        ok &= (mp.pose.values() - base.pose.values()).abs().maxCoeff() > 1e-8;
        CoEvoDecoder::Output pp = dec.forward(p0_pert, m0, f);
        ok &= (pp.coarse_mesh.values() - base.coarse_mesh.values()).abs().maxCoeff() > 1e-8;
    }
    return ok;
}

// shared across criteria 9 and 10
std::vector<MotionClip> train_clips;
Checkpoint stage1_ckpt;
bool stage1_done = false;

bool criterion9_stage1() {
    auto t0 = std::chrono::steady_clock::now();
    GenConfig g;
    g.clips = 4;
    g.frames = 8;
    g.feature_dim = 32;
    g.seed = 7;
    train_clips = generate_dataset(g);

    PoseMeshModel model(ModelConfig::toy(), 1);
    TrainConfig tc;
    tc.stage = 1;
    tc.steps = 3000;
    tc.lr = 3e-4;
    tc.target_loss = 0.009;
    TrainResult r = train_stage1(model, train_clips, tc);
    stage1_ckpt = r.checkpoint;
    stage1_done = true;

    double final_loss = r.loss_curve.back();
    double dt = seconds_since(t0);
    std::printf("  [stage 1: %zu steps, final joint loss %.5f, %.0f s]\n", r.loss_curve.size(),
                final_loss, dt);
    return final_loss < 1e-2 && static_cast<int>(r.loss_curve.size()) <= 3000 && dt < 300.0;
}

bool criterion10_stage2() {
    if (!stage1_done) return false;
    auto t0 = std::chrono::steady_clock::now();
    PoseMeshModel model(ModelConfig::toy(), 1);
    TrainConfig tc;
    tc.stage = 2;
    tc.steps = 3000;
    tc.lr = 1e-3;
    tc.lr_final_frac = 0.01;
    TrainResult r = train_stage2(model, train_clips, tc, stage1_ckpt);

    double drop = 1.0 - r.loss_curve.back() / r.loss_curve.front();
    EvaluationReport rep = evaluate_model(model, train_clips);
    double height = model.body().height();
    double dt = seconds_since(t0);
    std::printf("  [stage 2: loss %.4f -> %.4f (%.1f%% drop), MPJPE %.5f (height %.3f), %.0f s]\n",
                r.loss_curve.front(), r.loss_curve.back(), 100.0 * drop, rep.mpjpe, height, dt);
    return drop >= 0.9 && rep.mpjpe < 0.05 * height && dt < 900.0;
}

bool criterion11_feature_ablation() {
    auto t0 = std::chrono::steady_clock::now();
    GenConfig g;
    g.clips = 2;
    g.frames = 8;
    g.feature_dim = 32;
    g.seed = 11;
    g.scale_pairs = true;
    std::vector<MotionClip> clips = generate_dataset(g);

    bool ok = true;
    for (unsigned long long seed : {1ull, 2ull, 3ull}) {
        double pve[2];  // [0] with features, [1] zeroed features
        for (int arm = 0; arm < 2; ++arm) {
            bool zero = arm == 1;
            PoseMeshModel model(ModelConfig::toy(), seed);
            TrainConfig s1;
            s1.stage = 1;
            s1.steps = 500;
            s1.lr = 3e-4;
            s1.zero_features = zero;
            TrainResult r1 = train_stage1(model, clips, s1);
            TrainConfig s2;
            s2.stage = 2;
            s2.steps = 800;
            s2.lr = 1e-3;
            s2.lr_final_frac = 0.02;
            s2.zero_features = zero;
            train_stage2(model, clips, s2, r1.checkpoint);
            pve[arm] = evaluate_model(model, clips, 1.0, zero).pve;
        }
        std::printf("  [seed %llu: PVE with features %.4f, zeroed %.4f]\n", seed, pve[0], pve[1]);
        ok &= pve[1] > pve[0];
    }
    std::printf("  [criterion 11 took %.0f s]\n", seconds_since(t0));
    return ok;
}

bool criterion12_determinism() {
    bool ok = true;

    {  // identical short trainings are bit-identical
        ModelConfig mc = ModelConfig::tiny();
        GenConfig g;
        g.clips = 2;
        g.frames = mc.frames;
        g.feature_dim = mc.feature_dim;
        g.body = mc.body;
        g.seed = 3;
        std::vector<MotionClip> clips = generate_dataset(g);
        TrainConfig tc;
        tc.steps = 8;
        tc.lr = 1e-3;
        PoseMeshModel a(mc, 1), b(mc, 1);
        TrainResult ra = train_stage1(a, clips, tc);
        TrainResult rb = train_stage1(b, clips, tc);
        ok &= ra.loss_curve == rb.loss_curve;
        ok &= (flat_params(a) == flat_params(b)).all();
    }

    {  // checkpoint round trip restores the forward pass bit-exactly
        ModelConfig mc = ModelConfig::tiny();
        PoseMeshModel model(mc, 3);
        std::mt19937_64 rng(112);
        Tensor pose2d = Tensor::randn({mc.frames, mc.body.joint_count, 2}, rng, 0.3);
        Tensor feats = Tensor::randn({mc.frames, mc.feature_dim}, rng, 0.3);
        Checkpoint ck = Checkpoint::capture(model.params(), nullptr, {}, "acceptance");
        fs::path p = fs::temp_directory_path() / "coevo_accept_ckpt.bin";
        save_checkpoint(p.string(), ck);
        Checkpoint back = load_checkpoint(p.string());
        PoseMeshModel fresh(mc, 99);
        back.restore_params(fresh.params());
        ok &= (fresh.forward(pose2d, feats).fine_mesh.values() ==
               model.forward(pose2d, feats).fine_mesh.values())
                  .all();
        fs::remove(p);
    }

    {  // dataset files are byte-reproducible from (config, seed)
        GenConfig g;
        g.clips = 2;
        g.frames = 6;
        g.feature_dim = 8;
        g.seed = 9;
        fs::path d1 = fs::temp_directory_path() / "coevo_accept_ds1";
        fs::path d2 = fs::temp_directory_path() / "coevo_accept_ds2";
        fs::remove_all(d1);
        fs::remove_all(d2);
        fs::create_directories(d1);
        fs::create_directories(d2);
        write_dataset(d1.string(), g, generate_dataset(g));
        write_dataset(d2.string(), g, generate_dataset(g));
        auto slurp = [](const fs::path& p) {
            std::ifstream in(p, std::ios::binary);
            return std::vector<char>{std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>()};
        };
        size_t files = 0;
        for (const auto& entry : fs::directory_iterator(d1)) {
            fs::path other = d2 / entry.path().filename();
            ok &= fs::exists(other) && slurp(entry.path()) == slurp(other);
            ++files;
        }
        ok &= files > 0;
        fs::remove_all(d1);
        fs::remove_all(d2);
    }
    return ok;
}

}  // namespace

int main() {
    run(1, "finite-difference gradient check of every layer type and the full model", criterion1_gradients);
    run(2, "attention: row-stochastic softmax, convex-hull outputs, cross==self on equal inputs", criterion2_attention);
    run(3, "adaptive normalization with zero conditioning weights equals plain layer norm", criterion3_adaln_degeneracy);
    run(4, "keypoint normalization: exact corners and sub-1e-9 round trip", criterion4_normalization);
    run(5, "losses: zero at optimum, rigid/rotation behavior, exact weighted combination", criterion5_losses);
    run(6, "metrics: PA<=MPJPE, similarity invariance, zero acceleration for constant offset", criterion6_metrics);
    run(7, "nearest-joint mesh initialization coincides with joints and is translation-equivariant", criterion7_mesh_init);
    run(8, "severing each cross-attention direction decouples exactly that stream", criterion8_cross_attention_ablation);
    run(9, "stage-1 training reaches joint loss < 1e-2 within 3000 steps and 5 minutes", criterion9_stage1);
    run(10, "stage-2 training drops the objective >= 90% with MPJPE under 5% of body height", criterion10_stage2);
    run(11, "zeroed-feature ablation yields strictly higher PVE on three seeds", criterion11_feature_ablation);
    run(12, "bit-identical reruns, exact checkpoint round trip, byte-reproducible datasets", criterion12_determinism);

    if (failures == 0) {
        std::printf("acceptance: all 12 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria FAILED\n", failures);
    return 1;
}
