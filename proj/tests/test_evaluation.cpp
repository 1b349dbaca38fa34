#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "semcom/evaluation.hpp"
#include "semcom/synthetic.hpp"

using namespace semcom;
namespace fs = std::filesystem;

namespace {

fs::path scratch_file(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "semcom_test_evaluation";
    fs::create_directories(dir);
    fs::remove(dir / name);
    return dir / name;
}

MetricsRecord random_record(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    MetricsRecord r;
    r.alpha = u(rng);
    r.beta = u(rng);
    r.snr_db = 10 * u(rng) - 5;
    r.seed = rng();
    r.accuracy = u(rng);
    r.psnr_db = 40 * u(rng);
    r.ssim = 2 * u(rng) - 1;
    r.epochs_phase1 = static_cast<int>(rng() % 300);
    r.epochs_phase2 = static_cast<int>(rng() % 300);
    r.wall_time_s = 1000 * u(rng);
    r.noiseless = rng() % 2;
    r.eval_seed = rng();
    r.test_images = rng() % 10000;
    r.config_hash = "0123456789abcdef";
    r.ssim_tag = ssim_tag(SsimConfig{});
    return r;
}

}  // namespace

TEST(Psnr, Examples) {
    Tensor<double> s({1, 2, 2, 1}), v({1, 2, 2, 1});
    s.fill(1);
    EXPECT_NEAR(psnr(s, v), 0.0, 1e-12);
    EXPECT_EQ(psnr(s, s), 100.0);
    v.fill(0.9);  // MSE 0.01
    EXPECT_NEAR(psnr(s, v), 20.0, 1e-9);
    EXPECT_THROW(psnr(s, Tensor<double>({1, 4})), ArgumentError);
}

TEST(Psnr, ConsistentWithMse) {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 100; ++k) {
        const auto a = semcom::testing::random_tensor({1, 8, 8, 3}, rng, 0, 1);
        const auto b = semcom::testing::random_tensor({1, 8, 8, 3}, rng, 0, 1);
        const double m = mse(a, b);
        ASSERT_GT(m, 1e-10);
        EXPECT_LT(std::abs(psnr(a, b) - 10 * std::log10(1 / m)), 1e-9);
    }
}

TEST(Accuracy, ExamplesAndTieBreak) {
    Tensor<double> p({2, 10});
    p[0 * 10 + 3] = 0.9;
    p[1 * 10 + 7] = 0.9;
    EXPECT_EQ(accuracy(p, {3, 7}), 1.0);
    EXPECT_EQ(accuracy(p, {3, 1}), 0.5);
    EXPECT_EQ(accuracy(p, {0, 0}), 0.0);
    Tensor<double> tie({1, 10});
    tie.fill(0.1);
    EXPECT_EQ(accuracy(tie, {0}), 1.0);
    EXPECT_EQ(accuracy(tie, {5}), 0.0);
}

TEST(Records, RoundTripAppendAndCount) {
    std::mt19937_64 rng(2);
    const auto path = scratch_file("records.jsonl");
    std::vector<MetricsRecord> written;
    for (int k = 0; k < 55; ++k) {
        written.push_back(random_record(rng));
        persist_record(written.back(), path);
        if (k == 1) EXPECT_EQ(load_records(path).size(), 2u);
    }
    EXPECT_EQ(load_records(path), written);
}

TEST(Records, MalformedLineReportsLineNumber) {
    std::mt19937_64 rng(3);
    const auto path = scratch_file("bad.jsonl");
    persist_record(random_record(rng), path);
    std::ofstream(path, std::ios::app) << "{\"alpha\": oops\n";
    try {
        load_records(path);
        FAIL() << "expected RecordParseError";
    } catch (const RecordParseError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
    const auto range = scratch_file("range.jsonl");
    auto r = random_record(rng);
    auto j = nlohmann::json(r);
    j["accuracy"] = 1.5;
    std::ofstream(range) << j.dump() << "\n";
    EXPECT_THROW(load_records(range), RecordParseError);
}

TEST(Evaluate, UntrainedModelIsNearChanceAndDeterministic) {
    const auto test = make_synthetic_set(1000, 4);
    SemcomSystem<float> sys(ChannelConfig{}, 5);
    const EvalConfig cfg;
    const auto a = evaluate_system(sys, test, cfg, SsimConfig{}, false);
    const auto b = evaluate_system(sys, test, cfg, SsimConfig{}, false);
    EXPECT_EQ(a.accuracy, b.accuracy);
    EXPECT_EQ(a.psnr_db, b.psnr_db);
    EXPECT_EQ(a.ssim, b.ssim);
    EXPECT_EQ(a.images, 1000u);
    EXPECT_NEAR(a.accuracy, 0.1, 0.05);
    EXPECT_GE(a.ssim, -1);
    EXPECT_LE(a.ssim, 1);
}

TEST(Evaluate, AveragingModes) {
    const auto test = make_synthetic_set(30, 6);
    SemcomSystem<float> sys(ChannelConfig{}, 7);
    EvalConfig per, agg;
    agg.psnr_averaging = PsnrAveraging::aggregate;
    const auto a = evaluate_system(sys, test, per, SsimConfig{}, true);
    const auto b = evaluate_system(sys, test, agg, SsimConfig{}, true);
    EXPECT_EQ(a.accuracy, b.accuracy);
    // Jensen: mean of -log(mse) >= -log(mean mse)
    EXPECT_GE(a.psnr_db, b.psnr_db - 1e-9);
}

TEST(Evaluate, SsimMetricMatchesLossTerm) {
    std::mt19937_64 rng(8);
    const auto s = semcom::testing::random_tensor({3, 32, 32, 3}, rng, 0, 1);
    const auto v = semcom::testing::random_tensor({3, 32, 32, 3}, rng, 0, 1);
    const SsimKernel kernel;
    double metric = 0;
    for (double x : ssim_per_image(s, v, kernel.window())) metric += x / 3;
    EXPECT_NEAR(1 - metric, reconstruction_loss(s, v, 1.0, kernel).loss, 1e-9);
}
