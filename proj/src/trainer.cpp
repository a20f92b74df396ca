#include "coevo/trainer.hpp"

#include "coevo/pose_stream.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace coevo {

namespace {

/// Parameters whose names start with the given prefix, with their names.
std::pair<std::vector<Tensor>, std::vector<std::string>> select_params(
    const ParameterStore& store, const std::string& prefix) {
    std::vector<Tensor> params;
    std::vector<std::string> names;
    for (const auto& [name, p] : store.entries())
        if (name.rfind(prefix, 0) == 0) {
            params.push_back(p);
            names.push_back(name);
        }
    return {params, names};
}

void check_clips(const std::vector<MotionClip>& clips, const ModelConfig& config,
                 const BodyModel& body) {
    if (clips.empty()) throw std::invalid_argument("train: empty dataset");
    for (const auto& c : clips) {
        if (c.frames() < config.frames)
            throw std::invalid_argument("train: clip shorter than the model window");
        if (c.joints[0].rows() != body.joints() || c.verts[0].rows() != body.vertices() ||
            c.features.cols() != config.feature_dim)
            throw std::invalid_argument("train: clip shapes do not match the model");
    }
}

}  // namespace

Eigen::Index window_start(long long step, size_t clip_index, int clip_frames, int model_frames) {
    Eigen::Index span = clip_frames - model_frames + 1;
    if (span <= 0) throw std::invalid_argument("window_start: clip shorter than window");
    return static_cast<Eigen::Index>((step + static_cast<long long>(clip_index)) % span);
}

ClipWindow make_window(const MotionClip& clip, Eigen::Index start, const ModelConfig& config,
                       bool zero_features) {
    const int t = config.frames;
    const Eigen::Index j = clip.joints[0].rows();
    if (start < 0 || start + t > clip.frames())
        throw std::out_of_range("make_window: window [" + std::to_string(start) + "," +
                                std::to_string(start + t) + ") exceeds clip of " +
                                std::to_string(clip.frames()) + " frames");
    ClipWindow w;
    Eigen::MatrixXd px = clip.pose2d.block(start * j, 0, static_cast<Eigen::Index>(t) * j, 2);
    Eigen::MatrixXd norm = normalize_2d(px, clip.camera.image_w, clip.camera.image_h);
    Eigen::ArrayXd flat(norm.size());
    for (Eigen::Index r = 0; r < norm.rows(); ++r)
        for (Eigen::Index c = 0; c < 2; ++c) flat[r * 2 + c] = norm(r, c);
    w.pose2d = Tensor::from({t, j, 2}, flat);

    Eigen::ArrayXd feat = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(t) * config.feature_dim);
    if (!zero_features)
        for (Eigen::Index r = 0; r < t; ++r)
            for (Eigen::Index c = 0; c < config.feature_dim; ++c)
                feat[r * config.feature_dim + c] = clip.features(start + r, c);
    w.features = Tensor::from({t, config.feature_dim}, feat);

    Eigen::Index mid = start + config.midframe();
    w.gt_joints = clip.joints[static_cast<size_t>(mid)];
    w.gt_verts = clip.verts[static_cast<size_t>(mid)];
    return w;
}

double scheduled_lr(const TrainConfig& config, long long step) {
    if (config.lr_final_frac >= 1.0 || config.steps <= 1) return config.lr;
    double t = static_cast<double>(step) / static_cast<double>(config.steps - 1);
    double lo = config.lr * config.lr_final_frac;
    return lo + 0.5 * (config.lr - lo) * (1.0 + std::cos(M_PI * t));
}

std::string train_config_text(const TrainConfig& config, const ModelConfig& model) {
    std::ostringstream out;
    out << "stage = " << config.stage << "\nsteps = " << config.steps << "\nlr = " << config.lr
        << "\nclip_norm = " << config.clip_norm << "\nseed = " << config.seed
        << "\nframes = " << model.frames << "\njoints = " << model.body.joint_count
        << "\npose_channels = " << model.pose_channels << "\npose_layers = " << model.pose_layers
        << "\ndecoder_channels = " << model.decoder_channels
        << "\ndecoder_layers = " << model.decoder_layers
        << "\nfeature_dim = " << model.feature_dim << "\nw_mesh = " << config.weights.mesh
        << "\nw_joint = " << config.weights.joint << "\nw_normal = " << config.weights.normal
        << "\nw_edge = " << config.weights.edge << "\n";
    return out.str();
}

TrainResult train_stage1(PoseMeshModel& model, const std::vector<MotionClip>& clips,
                         const TrainConfig& config, const Checkpoint* resume, std::ostream* log) {
    check_clips(clips, model.config(), model.body());
    auto [params, names] = select_params(model.params(), "pose_stream/");
    AdamConfig ac;
    ac.lr = config.lr;
    ac.clip_norm = config.clip_norm;
    AdamOptimizer opt(params, ac);
    if (resume) {
        resume->restore_params(model.params());
        resume->restore_optimizer(opt, names);
    }

    TrainResult result;
    for (long long step = opt.steps_taken(); step < config.steps; ++step) {
        Tensor batch_loss = Tensor::scalar(0.0);
        for (size_t c = 0; c < clips.size(); ++c) {
            ClipWindow w = make_window(
                clips[c], window_start(step, c, clips[c].frames(), model.config().frames),
                model.config(), config.zero_features);
            Tensor p0 = model.pose_stream().forward(w.pose2d, w.features);
            batch_loss = batch_loss + loss_joint_int(p0, w.gt_joints);
        }
        batch_loss = batch_loss * (1.0 / static_cast<double>(clips.size()));
        result.loss_curve.push_back(batch_loss.item());
        if (log && (step % config.log_every == 0 || step + 1 == config.steps))
            *log << "stage1 step " << step << " loss " << batch_loss.item() << '\n';
        // stop before stepping so the checkpoint is the weights that met the
        // target
        if (config.target_loss > 0.0 && batch_loss.item() < config.target_loss) break;
        model.params().zero_grads();
        backward(batch_loss);
        opt.set_lr(scheduled_lr(config, step));
        opt.step();
    }
    result.checkpoint = Checkpoint::capture(model.params(), &opt, names,
                                            train_config_text(config, model.config()));
    return result;
}

TrainResult train_stage2(PoseMeshModel& model, const std::vector<MotionClip>& clips,
                         const TrainConfig& config, const Checkpoint& stage1, std::ostream* log) {
    check_clips(clips, model.config(), model.body());
    stage1.restore_params(model.params());
    auto [params, names] = select_params(model.params(), "");  // everything
    AdamConfig ac;
    ac.lr = config.lr;
    ac.clip_norm = config.clip_norm;
    AdamOptimizer opt(params, ac);

    TrainResult result;
    for (long long step = 0; step < config.steps; ++step) {
        Tensor batch_loss = Tensor::scalar(0.0);
        for (size_t c = 0; c < clips.size(); ++c) {
            ClipWindow w = make_window(
                clips[c], window_start(step, c, clips[c].frames(), model.config().frames),
                model.config(), config.zero_features);
            PoseMeshModel::Output out = model.forward(w.pose2d, w.features);
            FrameTarget gt{w.gt_joints, w.gt_verts};
            TotalLossParts parts =
                total_loss(out.fine_mesh, out.pose, gt, model.body().regressor,
                           model.body().topology, config.weights, config.supervise_pose);
            batch_loss = batch_loss + parts.total;
        }
        batch_loss = batch_loss * (1.0 / static_cast<double>(clips.size()));
        result.loss_curve.push_back(batch_loss.item());
        if (log && (step % config.log_every == 0 || step + 1 == config.steps))
            *log << "stage2 step " << step << " loss " << batch_loss.item() << '\n';
        if (config.target_loss > 0.0 && batch_loss.item() < config.target_loss) break;
        bool all_zero = config.weights.mesh == 0.0 && config.weights.joint == 0.0 &&
                        config.weights.normal == 0.0 && config.weights.edge == 0.0;
        model.params().zero_grads();
        if (!all_zero) {
            backward(batch_loss);
            opt.set_lr(scheduled_lr(config, step));
            opt.step();
        }
    }
    result.checkpoint = Checkpoint::capture(model.params(), &opt, names,
                                            train_config_text(config, model.config()));
    return result;
}

EvaluationReport evaluate_model(const PoseMeshModel& model, const std::vector<MotionClip>& clips,
                                double fps, bool zero_features,
                                std::vector<EvaluationReport>* per_clip, std::ostream* log) {
    std::vector<EvaluationReport> reports;
    for (const auto& clip : clips) {
        if (clip.frames() < model.config().frames) {
            if (log) *log << "warning: skipping clip shorter than the model window\n";
            continue;
        }
        std::vector<Eigen::MatrixXd> pj, gj, pv, gv;
        for (Eigen::Index start = 0; start + model.config().frames <= clip.frames(); ++start) {
            ClipWindow w = make_window(clip, start, model.config(), zero_features);
            PoseMeshModel::Output out = model.forward(w.pose2d, w.features);
            Eigen::MatrixXd mesh(model.body().vertices(), 3);
            const Eigen::ArrayXd& mv = out.fine_mesh.values();
            for (Eigen::Index r = 0; r < mesh.rows(); ++r)
                for (Eigen::Index c = 0; c < 3; ++c) mesh(r, c) = mv[r * 3 + c];
            pj.push_back(regress_joints(mesh, model.body().regressor));
            pv.push_back(mesh);
            gj.push_back(w.gt_joints);
            gv.push_back(w.gt_verts);
        }
        reports.push_back(compute_metrics(pj, gj, pv, gv, fps));
    }
    if (reports.empty()) throw std::runtime_error("evaluate: no clip long enough for the window");
    if (per_clip) *per_clip = reports;

    // frame-weighted aggregate; acceleration averages only over clips that
    // were long enough to define it
    EvaluationReport agg;
    double fr = 0.0, acc_frames = 0.0, acc_sum = 0.0;
    for (const auto& r : reports) {
        double n = static_cast<double>(r.frames);
        agg.frames += r.frames;
        agg.mpjpe += r.mpjpe * n;
        agg.pa_mpjpe += r.pa_mpjpe * n;
        agg.pve += r.pve * n;
        fr += n;
        if (r.accel) {
            acc_sum += *r.accel * (n - 2.0);
            acc_frames += n - 2.0;
        }
    }
    agg.mpjpe /= fr;
    agg.pa_mpjpe /= fr;
    agg.pve /= fr;
    if (acc_frames > 0.0) agg.accel = acc_sum / acc_frames;
    return agg;
}

}  // namespace coevo
