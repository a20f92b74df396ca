#include "coevo/trainer.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace coevo;

ModelConfig preset_config(const std::string& name) {
    if (name == "toy") return ModelConfig::toy();
    if (name == "paper") return ModelConfig::paper();
    if (name == "tiny") return ModelConfig::tiny();
    throw CLI::ValidationError("--preset", "unknown preset '" + name + "'");
}

void add_preset(CLI::App* cmd, std::string& preset) {
    cmd->add_option("--preset", preset, "model preset: toy, paper or tiny")
        ->check(CLI::IsMember({"toy", "paper", "tiny"}));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void write_csv(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(12);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
        out << '\n';
    }
}

int run(int argc, char** argv) {
    CLI::App app{"pose-and-mesh co-evolution toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; flags override it");
    app.allow_config_extras(CLI::config_extras_mode::error);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic motion dataset");
    std::string gen_preset = "toy", gen_out;
    GenConfig gc;
    add_preset(gen, gen_preset);
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gc.seed);
    gen->add_option("--clips", gc.clips);
    gen->add_option("--frames", gc.frames, "clip length; 0 means the preset window length");
    gen->add_option("--amplitude", gc.amplitude);
    gen->add_option("--noise-std", gc.noise_std, "2D keypoint noise in pixels");
    gen->add_flag("--scale-pairs", gc.scale_pairs,
                  "pair clips sharing motion and 2D but differing in body scale");

    // train
    auto* train = app.add_subcommand("train", "run one training stage");
    std::string tr_preset = "toy", tr_dataset, tr_in, tr_out = "checkpoint.bin";
    TrainConfig tc;
    add_preset(train, tr_preset);
    train->add_option("--stage", tc.stage, "1 or 2")->check(CLI::IsMember({1, 2}))->required();
    train->add_option("--dataset", tr_dataset)->required();
    train->add_option("--in", tr_in, "stage-1 checkpoint (stage 2) or resume point (stage 1)");
    train->add_option("--out", tr_out, "checkpoint output path");
    train->add_option("--steps", tc.steps);
    train->add_option("--lr", tc.lr);
    train->add_option("--clip-norm", tc.clip_norm);
    train->add_option("--seed", tc.seed);
    train->add_option("--w-mesh", tc.weights.mesh);
    train->add_option("--w-joint", tc.weights.joint);
    train->add_option("--w-normal", tc.weights.normal);
    train->add_option("--w-edge", tc.weights.edge);
    train->add_flag("--zero-features", tc.zero_features, "train with zeroed image features");
    train->add_option("--log-every", tc.log_every);
    train->add_option("--target-loss", tc.target_loss, "stop early once the batch loss falls below this");
    train->add_option("--lr-final-frac", tc.lr_final_frac, "cosine-decay the rate to this fraction of --lr");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string ev_preset = "toy", ev_dataset, ev_ckpt, ev_out;
    double ev_fps = 1.0;
    bool ev_zero = false;
    add_preset(ev, ev_preset);
    ev->add_option("--dataset", ev_dataset)->required();
    ev->add_option("--checkpoint", ev_ckpt);
    ev->add_option("--fps", ev_fps);
    ev->add_option("--out", ev_out, "report path stem; writes <stem>.txt and <stem>.json");
    ev->add_flag("--zero-features", ev_zero);

    // export-obj
    auto* obj = app.add_subcommand("export-obj", "write the template or a predicted mesh as OBJ");
    std::string obj_preset = "toy", obj_ckpt, obj_dataset, obj_out;
    int obj_clip = 0;
    add_preset(obj, obj_preset);
    obj->add_option("--out", obj_out)->required();
    obj->add_option("--checkpoint", obj_ckpt, "predict instead of exporting the template");
    obj->add_option("--dataset", obj_dataset, "dataset for prediction input");
    obj->add_option("--clip", obj_clip, "clip index to predict");

    // export-attn
    auto* attn = app.add_subcommand("export-attn", "dump decoder attention maps as CSV");
    std::string at_preset = "toy", at_ckpt, at_dataset, at_out = "attn";
    int at_clip = 0;
    add_preset(attn, at_preset);
    attn->add_option("--checkpoint", at_ckpt)->required();
    attn->add_option("--dataset", at_dataset)->required();
    attn->add_option("--clip", at_clip);
    attn->add_option("--out", at_out, "output file prefix");

    // grad-check
    auto* gchk = app.add_subcommand("grad-check", "finite-difference gradient verification");
    std::string gk_preset = "tiny";
    long long gk_coords = -1;
    unsigned long long gk_seed = 1;
    add_preset(gchk, gk_preset);
    gchk->add_option("--max-coords", gk_coords, "probe at most this many coordinates per tensor");
    gchk->add_option("--seed", gk_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the one-line error plus usage hint
        return 2;
    }

    if (gen->parsed()) {
        ModelConfig mc = preset_config(gen_preset);
        gc.feature_dim = mc.feature_dim;
        gc.body = mc.body;
        if (gc.frames <= 0) gc.frames = mc.frames;
        std::vector<MotionClip> clips = generate_dataset(gc);
        write_dataset(gen_out, gc, clips);
        std::cout << "wrote " << clips.size() << " clips to " << gen_out << '\n';
        return 0;
    }

    if (train->parsed()) {
        ModelConfig mc = preset_config(tr_preset);
        PoseMeshModel model(mc, tc.seed);
        std::vector<MotionClip> clips = read_dataset(tr_dataset);
        TrainResult result;
        if (tc.stage == 1) {
            std::optional<Checkpoint> resume;
            if (!tr_in.empty()) resume = load_checkpoint(tr_in);
            result = train_stage1(model, clips, tc, resume ? &*resume : nullptr, &std::cout);
        } else {
            if (tr_in.empty()) throw std::runtime_error("missing checkpoint: stage 2 needs --in");
            Checkpoint stage1 = load_checkpoint(tr_in);
            result = train_stage2(model, clips, tc, stage1, &std::cout);
        }
        save_checkpoint(tr_out, result.checkpoint);
        std::cout << "final loss " << result.loss_curve.back() << ", checkpoint " << tr_out
                  << '\n';
        return 0;
    }

    if (ev->parsed()) {
        if (ev_ckpt.empty()) throw std::runtime_error("missing checkpoint: eval needs --checkpoint");
        ModelConfig mc = preset_config(ev_preset);
        PoseMeshModel model(mc, 1);
        load_checkpoint(ev_ckpt).restore_params(model.params());
        std::vector<MotionClip> clips = read_dataset(ev_dataset);
        std::vector<EvaluationReport> per_clip;
        EvaluationReport agg = evaluate_model(model, clips, ev_fps, ev_zero, &per_clip, &std::cerr);
        std::cout << report_text(agg);
        if (!ev_out.empty()) {
            write_text(ev_out + ".txt", report_text(agg));
            write_text(ev_out + ".json", report_json(agg));
        }
        return 0;
    }

    if (obj->parsed()) {
        ModelConfig mc = preset_config(obj_preset);
        PoseMeshModel model(mc, 1);
        if (obj_ckpt.empty()) {
            write_obj(obj_out, model.body().template_vertices, model.body().topology);
        } else {
            if (obj_dataset.empty())
                throw std::runtime_error("missing dataset: prediction export needs --dataset");
            load_checkpoint(obj_ckpt).restore_params(model.params());
            std::vector<MotionClip> clips = read_dataset(obj_dataset);
            if (obj_clip < 0 || obj_clip >= static_cast<int>(clips.size()))
                throw std::runtime_error("clip index out of range");
            ClipWindow w = make_window(clips[static_cast<size_t>(obj_clip)], 0, mc, false);
            PoseMeshModel::Output out = model.forward(w.pose2d, w.features);
            Eigen::MatrixXd mesh(model.body().vertices(), 3);
            const Eigen::ArrayXd& mv = out.fine_mesh.values();
            for (Eigen::Index r = 0; r < mesh.rows(); ++r)
                for (Eigen::Index c = 0; c < 3; ++c) mesh(r, c) = mv[r * 3 + c];
            write_obj(obj_out, mesh, model.body().topology);
        }
        std::cout << "wrote " << obj_out << '\n';
        return 0;
    }

    if (attn->parsed()) {
        ModelConfig mc = preset_config(at_preset);
        PoseMeshModel model(mc, 1);
        load_checkpoint(at_ckpt).restore_params(model.params());
        std::vector<MotionClip> clips = read_dataset(at_dataset);
        if (at_clip < 0 || at_clip >= static_cast<int>(clips.size()))
            throw std::runtime_error("clip index out of range");
        ClipWindow w = make_window(clips[static_cast<size_t>(at_clip)], 0, mc, false);
        std::vector<AttnMaps> maps;
        model.forward(w.pose2d, w.features, &maps);
        for (size_t b = 0; b < maps.size(); ++b) {
            std::string stem = at_out + "_block" + std::to_string(b);
            write_csv(stem + "_pose_to_mesh.csv", maps[b].pose_to_mesh);
            write_csv(stem + "_mesh_to_pose.csv", maps[b].mesh_to_pose);
            write_csv(stem + "_pose_to_pose.csv", maps[b].pose_to_pose);
            write_csv(stem + "_mesh_to_mesh.csv", maps[b].mesh_to_mesh);
        }
        std::cout << "wrote " << maps.size() * 4 << " attention maps with prefix " << at_out
                  << '\n';
        return 0;
    }

    if (gchk->parsed()) {
        ModelConfig mc = preset_config(gk_preset);
        PoseMeshModel model(mc, gk_seed);
        GradCheckReport report = model_grad_check(model, gk_seed, gk_coords);
        std::cout << "max relative error " << report.max_rel_error << '\n';
        if (report.max_rel_error >= 1e-4) {
            std::cerr << "error: gradient check failed (>= 1e-4)\n";
            return 1;
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
