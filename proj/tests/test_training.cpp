#include <gtest/gtest.h>

#include <filesystem>

#include "semcom/experiment.hpp"
#include "semcom/synthetic.hpp"

using namespace semcom;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("semcom_test_training_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

TrainConfig tiny_config(double alpha = 0.75, double beta = 0.25) {
    TrainConfig t;
    t.weights = {alpha, beta};
    t.epochs_phase1 = 1;
    t.epochs_phase2 = 1;
    t.batch_size = 16;
    t.seed = 11;
    return t;
}

std::string hash_of(const nn::ParamRefs<float>& refs) { return hash_parameters(refs); }

bool all_zero(const nn::ParamRefs<float>& refs) {
    for (const auto* p : refs.params)
        for (float g : p->grad.vec())
            if (g != 0.0f) return false;
    return true;
}

}  // namespace

TEST(Training, SmokeRunReducesLoss) {
    const auto data = make_synthetic_set(512, 1);
    TrainConfig cfg = tiny_config(0.5, 0.0);
    cfg.epochs_phase1 = 2;
    cfg.epochs_phase2 = 0;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-3;
    Trainer<float> trainer(cfg);
    std::vector<EpochLog> logs;
    trainer.on_epoch = [&](const EpochLog& l) { logs.push_back(l); };
    trainer.train(data);
    ASSERT_EQ(logs.size(), 2u);
    EXPECT_LT(logs[1].loss, logs[0].loss);
    for (const auto& l : logs) EXPECT_TRUE(std::isfinite(l.loss));
}

TEST(Training, SameSeedGivesIdenticalRuns) {
    const auto data = make_synthetic_set(48, 2);
    auto run = [&] {
        Trainer<float> t(tiny_config());
        std::vector<double> losses;
        t.on_epoch = [&](const EpochLog& l) { losses.push_back(l.loss); };
        t.train(data);
        return std::pair{losses, hash_of(t.system().all_refs())};
    };
    EXPECT_EQ(run(), run());
}

TEST(Training, AlphaEndpointsLeaveOneDecoderWithoutGradient) {
    const auto batch = make_synthetic_set(8, 3).all<float>();
    {
        Trainer<float> t(tiny_config(0.0, 0.5));
        t.step_phase1(batch, 1);
        EXPECT_TRUE(all_zero(t.system().recon_refs()));
        EXPECT_FALSE(all_zero(t.system().class_refs()));
        EXPECT_FALSE(all_zero(t.system().encoder_refs(0)));
        // Adam with identically zero gradient leaves weights untouched; BN
        // running statistics still move in training mode, so compare params.
        nn::ParamRefs<float> weights_only;
        weights_only.params = t.system().recon_refs().params;
        Trainer<float> fresh(tiny_config(0.0, 0.5));
        nn::ParamRefs<float> fresh_weights;
        fresh_weights.params = fresh.system().recon_refs().params;
        EXPECT_EQ(hash_of(weights_only), hash_of(fresh_weights));
    }
    {
        Trainer<float> t(tiny_config(1.0, 0.5));
        t.step_phase1(batch, 1);
        EXPECT_TRUE(all_zero(t.system().class_refs()));
        EXPECT_FALSE(all_zero(t.system().recon_refs()));
    }
}

TEST(Training, PhaseTwoFreezesEncodersAndSeparatesLosses) {
    const auto data = make_synthetic_set(32, 4);
    TrainConfig cfg = tiny_config(1.0, 0.25);
    cfg.epochs_phase2 = 0;
    Trainer<float> t(cfg);
    t.train_phase1(data);
    std::vector<std::string> enc;
    for (std::size_t u = 0; u < 4; ++u) enc.push_back(hash_of(t.system().encoder_refs(u)));
    const auto batch = data.all<float>();
    t.system().all_refs().zero_grad();
    t.step_phase2(batch, 5);
    for (std::size_t u = 0; u < 4; ++u) {
        EXPECT_EQ(hash_of(t.system().encoder_refs(u)), enc[u]);
        EXPECT_TRUE(all_zero(t.system().encoder_refs(u)));
    }
    EXPECT_FALSE(all_zero(t.system().class_refs()));
    EXPECT_FALSE(all_zero(t.system().recon_refs()));

    // Each decoder's gradient is that of its own loss alone: backward with
    // both branches equals backward with either one, each after a fresh pass.
    auto grads = [](const nn::ParamRefs<float>& r) {
        std::vector<Tensor<float>> g;
        for (const auto* p : r.params) g.push_back(p->grad);
        return g;
    };
    auto& sys = t.system();
    Tensor<float> gv, gp;
    auto pass = [&] {
        Rng r(9);
        auto fp = sys.forward(batch.pixels, Mode::inference, r);
        reconstruction_loss(batch.pixels, fp.reconstruction, 0.25, t.kernel(), &gv);
        classification_cross_entropy(fp.probs, batch.labels, &gp);
        sys.all_refs().zero_grad();
    };
    pass();
    sys.backward(gv, gp, false);
    const auto both_recon = grads(sys.recon_refs()), both_class = grads(sys.class_refs());
    pass();
    sys.backward(gv, Tensor<float>{}, false);
    EXPECT_EQ(grads(sys.recon_refs()), both_recon);
    EXPECT_TRUE(all_zero(sys.class_refs()));
    pass();
    sys.backward(Tensor<float>{}, gp, false);
    EXPECT_EQ(grads(sys.class_refs()), both_class);
    EXPECT_TRUE(all_zero(sys.recon_refs()));
}

TEST(Training, PhaseTwoRequiresPhaseOne) {
    Trainer<float> t(tiny_config());
    EXPECT_THROW(t.train_phase2(make_synthetic_set(8, 1)), ArgumentError);
}

TEST(Training, ResumeFromCheckpointIsBitIdentical) {
    const auto dir = scratch_dir("resume");
    const auto data = make_synthetic_set(40, 5);
    TrainConfig cfg = tiny_config(0.5, 0.5);
    cfg.epochs_phase1 = 2;
    cfg.epochs_phase2 = 2;

    Trainer<float> straight(cfg);
    straight.train(data);

    Trainer<float> first(cfg);
    first.on_epoch = [&](const EpochLog& l) {
        if (l.phase == 2 && l.epoch == 1) first.save(dir / "mid.bin");
    };
    first.train_phase1(data);
    first.run_epoch(data, 2);
    auto resumed = Trainer<float>::load(dir / "mid.bin", cfg);
    EXPECT_EQ(resumed.phase1_epochs_done(), 2);
    EXPECT_EQ(resumed.phase2_epochs_done(), 1);
    resumed.train(data);
    EXPECT_TRUE(resumed.finished());
    EXPECT_EQ(hash_of(resumed.system().all_refs()), hash_of(straight.system().all_refs()));
}

TEST(Training, CheckpointRejectsDifferentConfiguration) {
    const auto dir = scratch_dir("mismatch");
    Trainer<float> t(tiny_config());
    t.save(dir / "c.bin", false);
    EXPECT_NO_THROW(Trainer<float>::load(dir / "c.bin", tiny_config()));
    EXPECT_THROW(Trainer<float>::load(dir / "c.bin", tiny_config(0.5)), CheckpointError);
    EXPECT_THROW(Trainer<double>::load(dir / "c.bin"), CheckpointError);
    std::ofstream(dir / "junk.bin") << "not a checkpoint";
    EXPECT_THROW(Trainer<float>::load(dir / "junk.bin"), CheckpointError);
}

TEST(Training, NonFiniteLossAbortsWithDiagnostic) {
    Trainer<float> t(tiny_config());
    t.system().class_refs().params.back()->value.fill(std::numeric_limits<float>::quiet_NaN());
    try {
        t.step_phase1(make_synthetic_set(4, 1).all<float>(), 1);
        FAIL() << "expected TrainingDiverged";
    } catch (const TrainingDiverged& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("batch"), std::string::npos);
        EXPECT_NE(msg.find("cross_entropy"), std::string::npos);
    }
}

TEST(Training, HeldoutLossIsLoggedAndFinite) {
    const auto data = make_synthetic_set(32, 6);
    Trainer<float> t(tiny_config());
    t.set_heldout_batch(make_synthetic_set(16, 7).all<float>());
    std::vector<EpochLog> logs;
    t.on_epoch = [&](const EpochLog& l) { logs.push_back(l); };
    t.train(data);
    ASSERT_EQ(logs.size(), 2u);
    for (const auto& l : logs) {
        ASSERT_TRUE(l.heldout_loss.has_value());
        EXPECT_TRUE(std::isfinite(*l.heldout_loss));
    }
}

TEST(Sweep, ResumesWithoutRecomputingFinishedPairs) {
    const auto dir = scratch_dir("sweep");
    const auto train = make_synthetic_set(16, 8), test = make_synthetic_set(20, 9);
    ExperimentConfig cfg;
    cfg.train = tiny_config();
    cfg.train.epochs_phase2 = 0;
    cfg.output_dir = dir.string();
    cfg.betas = {0.0};
    cfg.alphas = {0.0, 0.5, 1.0};

    auto first = sweep(cfg, train, test);
    EXPECT_EQ(first.trained, 3u);
    EXPECT_TRUE(first.failures.empty());
    EXPECT_EQ(first.records.size(), 6u);  // noisy + noiseless per pair

    cfg.alphas = {0.0, 0.5, 1.0, 0.25, 0.75};
    cfg.jobs = 2;
    auto second = sweep(cfg, train, test);
    EXPECT_EQ(second.reused, 3u);
    EXPECT_EQ(second.trained, 2u);
    EXPECT_EQ(load_records(dir / "results.jsonl").size(), 10u);

    auto third = sweep(cfg, train, test);
    EXPECT_EQ(third.trained, 0u);
    EXPECT_EQ(third.reused, 5u);
    EXPECT_EQ(load_records(dir / "results.jsonl").size(), 10u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(third.records[i], first.records[i]);
}

TEST(Sweep, FailuresAreRecordedAndTheSweepContinues) {
    const auto dir = scratch_dir("failures");
    const auto train = make_synthetic_set(16, 8), test = make_synthetic_set(8, 9);
    ExperimentConfig cfg;
    cfg.train = tiny_config();
    cfg.train.epochs_phase2 = 0;
    cfg.output_dir = dir.string();
    cfg.betas = {0.0};
    cfg.alphas = {0.5, 1.0};
    // a file where a run directory must go makes the first pair fail
    fs::create_directories(dir / "runs");
    TrainConfig blocked = cfg.train;
    blocked.weights = {0.5, 0.0};
    std::ofstream(run_directory(dir, blocked)) << "in the way";
    const auto r = sweep(cfg, train, test);
    ASSERT_EQ(r.failures.size(), 1u);
    EXPECT_EQ(r.failures[0].alpha, 0.5);
    EXPECT_EQ(r.trained, 1u);
    EXPECT_TRUE(fs::exists(dir / "failures.jsonl"));
}
