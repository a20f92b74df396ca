#include <coevo/checkpoint.hpp>
#include <coevo/model.hpp>
#include <coevo/serialize.hpp>

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace coevo;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    fs::path path;
    explicit TempFile(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove(path);
    }
    ~TempFile() { fs::remove(path); }
};

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("adam leaves parameters alone under zero gradients") {
    ParameterStore store;
    std::mt19937_64 rng(1);
    Tensor p = store.create_randn("p", {4}, rng, 1.0);
    Eigen::ArrayXd before = p.values();
    AdamOptimizer opt({p}, AdamConfig{});
    backward(sum(p * 0.0));
    opt.step();
    CHECK((p.values() == before).all());
}

TEST_CASE("adam first step under constant gradient moves by about lr") {
    ParameterStore store;
    std::mt19937_64 rng(2);
    Tensor p = store.create_randn("p", {6}, rng, 1.0);
    Eigen::ArrayXd before = p.values();
    AdamConfig c;
    c.lr = 1e-3;
    c.clip_norm = 0.0;  // keep the raw gradient
    AdamOptimizer opt({p}, c);
    backward(sum(p));  // gradient of ones
    opt.step();
    // bias-corrected Adam with g=1: delta = lr * 1 / (1 + eps) ~ lr
    CHECK(((before - p.values()) - c.lr).abs().maxCoeff() < 1e-6);
}

TEST_CASE("adam matches a scalar reference over two steps") {
    // hand-rolled scalar Adam oracle
    double theta = 0.7;
    double m = 0, v = 0;
    double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    auto grad = [](double x) { return 2.0 * x; };  // d/dx x^2
    double theta_ref = theta;
    for (int t = 1; t <= 2; ++t) {
        double g = grad(theta_ref);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        double mhat = m / (1 - std::pow(b1, t));
        double vhat = v / (1 - std::pow(b2, t));
        theta_ref -= lr * mhat / (std::sqrt(vhat) + eps);
    }

    ParameterStore store;
    Tensor p = store.create_full("p", {1}, theta);
    AdamConfig c;
    c.lr = lr;
    c.clip_norm = 0.0;
    AdamOptimizer opt({p}, c);
    for (int t = 0; t < 2; ++t) {
        backward(sum(square(p)));
        opt.step();
    }
    CHECK(p.values()[0] == doctest::Approx(theta_ref).epsilon(1e-12));
}

TEST_CASE("adam rejects non-finite gradients without touching parameters") {
    ParameterStore store;
    Tensor p = store.create_full("p", {2}, 1.0);
    Eigen::ArrayXd before = p.values();
    AdamOptimizer opt({p}, AdamConfig{});
    backward(sum(p));
    // forge a corrupt gradient directly on the node; the graph's own backward
    // pass would have refused to produce one
    p.node()->grad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(opt.step());
    CHECK((p.values() == before).all());
}

TEST_CASE("binary helpers round-trip and checksum") {
    std::string buf;
    bin::append(buf, static_cast<std::uint64_t>(123456789ull));
    bin::append(buf, 3.14159);
    bin::append_str(buf, "hello");
    std::uint32_t crc = bin::crc32(buf);

    bin::Reader r{buf};
    CHECK(r.read<std::uint64_t>() == 123456789ull);
    CHECK(r.read<double>() == 3.14159);
    CHECK(r.read_str() == "hello");
    CHECK_THROWS(r.read<double>());  // past the end

    // crc32 of "123456789" is the published check value 0xCBF43926
    const char* probe = "123456789";
    CHECK(bin::crc32(probe, 9) == 0xCBF43926u);
    CHECK(crc == bin::crc32(buf));  // stable
}

TEST_CASE("checkpoint round trip is bit-exact") {
    ModelConfig mc = ModelConfig::tiny();
    PoseMeshModel model(mc, 3);
    std::vector<Tensor> opt_params;
    std::vector<std::string> opt_names;
    for (auto& [name, p] : model.params().entries()) {
        opt_params.push_back(p);
        opt_names.push_back(name);
    }
    AdamOptimizer opt(opt_params, AdamConfig{});

    // take a few steps so the moments are nontrivial
    std::mt19937_64 rng(4);
    Tensor pose2d = Tensor::randn({mc.frames, mc.body.joint_count, 2}, rng, 0.3);
    Tensor feats = Tensor::randn({mc.frames, mc.feature_dim}, rng, 0.3);
    for (int i = 0; i < 3; ++i) {
        model.params().zero_grads();
        backward(sum(square(model.forward(pose2d, feats).fine_mesh)));
        opt.step();
    }

    Checkpoint ck = Checkpoint::capture(model.params(), &opt, opt_names, "stage=1\nlr=0.001\n");
    ck.step = 3;
    TempFile f("coevo_ckpt_test.bin");
    save_checkpoint(f.path.string(), ck);
    Checkpoint back = load_checkpoint(f.path.string());
    CHECK(back.step == 3);
    CHECK(back.config_text == ck.config_text);
    REQUIRE(back.params.size() == ck.params.size());
    for (size_t i = 0; i < ck.params.size(); ++i) {
        CHECK(back.params[i].name == ck.params[i].name);
        CHECK((back.params[i].data == ck.params[i].data).all());
    }
    REQUIRE(back.moments1.size() == ck.moments1.size());
    for (size_t i = 0; i < ck.moments1.size(); ++i) {
        CHECK((back.moments1[i].data == ck.moments1[i].data).all());
        CHECK((back.moments2[i].data == ck.moments2[i].data).all());
    }

    // restoring into a freshly seeded model reproduces the forward bit-exactly
    PoseMeshModel fresh(mc, 99);
    back.restore_params(fresh.params());
    CHECK((fresh.forward(pose2d, feats).fine_mesh.values() ==
           model.forward(pose2d, feats).fine_mesh.values())
              .all());

    // and re-saving the loaded checkpoint is byte-identical
    TempFile f2("coevo_ckpt_test2.bin");
    save_checkpoint(f2.path.string(), back);
    CHECK(slurp(f.path) == slurp(f2.path));
}

TEST_CASE("checkpoint loader errors are distinct and informative") {
    TempFile f("coevo_ckpt_err.bin");

    SUBCASE("missing file") {
        CHECK_THROWS_WITH_AS(load_checkpoint(f.path.string()), doctest::Contains("open"),
                             std::runtime_error);
    }

    SUBCASE("bad magic") {
        std::ofstream(f.path, std::ios::binary) << "NOTACKPTxxxxxxxxxxxxxxxx";
        CHECK_THROWS_WITH_AS(load_checkpoint(f.path.string()), doctest::Contains("magic"),
                             std::runtime_error);
    }

    SUBCASE("corrupted payload fails the checksum") {
        ParameterStore store;
        Tensor p = store.create_full("p", {3}, 1.5);
        Checkpoint ck = Checkpoint::capture(store, nullptr, {}, "");
        save_checkpoint(f.path.string(), ck);
        auto bytes = slurp(f.path);
        bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x10);
        std::ofstream(f.path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS(load_checkpoint(f.path.string()));
    }

    SUBCASE("truncation") {
        ParameterStore store;
        store.create_full("p", {32}, 1.5);
        Checkpoint ck = Checkpoint::capture(store, nullptr, {}, "");
        save_checkpoint(f.path.string(), ck);
        auto bytes = slurp(f.path);
        std::ofstream(f.path, std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        CHECK_THROWS(load_checkpoint(f.path.string()));
    }
}

TEST_CASE("restore rejects mismatched names and shapes") {
    ParameterStore a;
    a.create_full("x", {3}, 1.0);
    Checkpoint ck = Checkpoint::capture(a, nullptr, {}, "");

    ParameterStore missing;
    missing.create_full("y", {3}, 1.0);
    CHECK_THROWS(ck.restore_params(missing));

    ParameterStore wrong_shape;
    wrong_shape.create_full("x", {4}, 1.0);
    CHECK_THROWS(ck.restore_params(wrong_shape));
}

TEST_CASE("optimizer moments restore to the exact training trajectory") {
    // two optimizers over identical parameters: one runs straight through,
    // the other is snapshotted and restored mid-run; trajectories must match
    auto make = [](ParameterStore& store) {
        return store.create_full("p", {4}, 2.0);
    };
    ParameterStore sa, sb;
    Tensor pa = make(sa), pb = make(sb);
    AdamConfig c;
    c.lr = 0.05;
    AdamOptimizer oa({pa}, c), ob({pb}, c);
    auto step = [](Tensor& p, AdamOptimizer& o) {
        backward(sum(square(p)));
        o.step();
    };
    step(pa, oa);
    step(pb, ob);

    Checkpoint ck = Checkpoint::capture(sb, &ob, {"p"}, "");
    TempFile f("coevo_opt_restore.bin");
    save_checkpoint(f.path.string(), ck);

    ParameterStore sc;
    Tensor pc = sc.create_full("p", {4}, 0.0);
    AdamOptimizer oc({pc}, c);
    Checkpoint loaded = load_checkpoint(f.path.string());
    loaded.restore_params(sc);
    loaded.restore_optimizer(oc, {"p"});
    CHECK(oc.steps_taken() == ob.steps_taken());

    step(pa, oa);
    step(pc, oc);
    CHECK((pa.values() == pc.values()).all());
}
