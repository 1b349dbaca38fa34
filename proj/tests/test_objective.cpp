#include <gtest/gtest.h>

#include "oracles.hpp"
#include "semcom/objective.hpp"

using namespace semcom;
using semcom::testing::finite_difference;
using semcom::testing::naive_ssim_gray;
using semcom::testing::random_tensor;
using semcom::testing::relative_error;

namespace {

Tensor<double> constant(Shape s, double v) {
    Tensor<double> t(std::move(s));
    t.fill(v);
    return t;
}

}  // namespace

TEST(Mse, Examples) {
    const auto s = constant({1, 2, 2, 1}, 1), z = constant({1, 2, 2, 1}, 0);
    EXPECT_EQ(mse(s, s), 0.0);
    EXPECT_EQ(mse(s, z), 1.0);
    EXPECT_DOUBLE_EQ(mse(Tensor<double>({1, 2}, std::vector<double>{1, 0}), Tensor<double>({1, 2}, std::vector<double>{0.5, 0.5})),
                     0.25);
    EXPECT_THROW(mse(s, constant({1, 2, 1, 1}, 0)), ArgumentError);
}

TEST(Ssim, SelfSimilarityAndBoundsOnRandomPairs) {
    std::mt19937_64 rng(1);
    const SsimConfig cfg;
    const auto win = gaussian_window(cfg);
    double worst_self = 0, worst_abs = 0;
    for (int k = 0; k < 1000; ++k) {
        const auto a = random_tensor({1, 16, 16, 3}, rng, 0, 1);
        const auto b = random_tensor({1, 16, 16, 3}, rng, 0, 1);
        worst_self = std::max(worst_self, std::abs(ssim_batch(a, a, win) - 1));
        worst_abs = std::max(worst_abs, std::abs(ssim_batch(a, b, win)));
    }
    EXPECT_LT(worst_self, 1e-9);
    EXPECT_LE(worst_abs, 1.0);
}

TEST(Ssim, ConstantImagesClosedForm) {
    const auto s = constant({1, 32, 32, 3}, 1), v = constant({1, 32, 32, 3}, 0);
    EXPECT_NEAR(ssim(s, v, SsimConfig{}), 1e-4 / (1 + 1e-4), 1e-15);
}

TEST(Ssim, SymmetricAndMatchesTextbookFormula) {
    std::mt19937_64 rng(2);
    const SsimConfig cfg;
    const auto win = gaussian_window(cfg);
    for (int k = 0; k < 5; ++k) {
        const auto a = random_tensor({1, 20, 18, 1}, rng, 0, 1);
        const auto b = random_tensor({1, 20, 18, 1}, rng, 0, 1);
        EXPECT_NEAR(ssim_batch(a, b, win), ssim_batch(b, a, win), 1e-14);
        EXPECT_NEAR(ssim_batch(a, b, win), naive_ssim_gray(a.vec(), b.vec(), 20, 18, win.weights, 11, 11, cfg.c1(), cfg.c2()),
                    1e-12);
    }
}

TEST(Ssim, GaussianWindowWeights) {
    const auto w = gaussian_window(SsimConfig{});
    double sum = 0;
    for (double x : w.weights) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-14);
    // centre / edge-midpoint ratio = exp(5^2 / (2 * 1.5^2))
    EXPECT_NEAR(w.weights[5 * 11 + 5] / w.weights[5 * 11 + 0], std::exp(25 / 4.5), 1e-9);
}

TEST(Ssim, RejectsImagesSmallerThanWindow) {
    const auto a = constant({1, 10, 10, 1}, 0.5);
    EXPECT_THROW(ssim(a, a, SsimConfig{}), ArgumentError);
    SsimConfig even;
    even.window_size = 10;
    EXPECT_THROW(even.validate(), ArgumentError);
}

TEST(Ssim, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    const auto win = gaussian_window(SsimConfig{});
    const auto s = random_tensor({2, 16, 16, 1}, rng, 0, 1);
    const auto v = random_tensor({2, 16, 16, 1}, rng, 0, 1);
    Tensor<double> g;
    ssim_batch(s, v, win, &g);
    const auto fd = finite_difference([&](const Tensor<double>& x) { return ssim_batch(s, x, win); }, v);
    EXPECT_LT(relative_error(g, fd), 1e-4);
}

TEST(CrossEntropy, Examples) {
    Tensor<double> uniform({2, 10});
    uniform.fill(0.1);
    EXPECT_NEAR(classification_cross_entropy(uniform, {3, 7}), std::log(10.0), 1e-12);
    Tensor<double> p({1, 10});
    p[4] = 1;
    EXPECT_EQ(classification_cross_entropy(p, {4}), 0.0);
    p[4] = 0.5;
    p[5] = 0.5;
    EXPECT_NEAR(classification_cross_entropy(p, {4}), std::log(2.0), 1e-12);
    // zero probability is clamped, not infinite
    EXPECT_NEAR(classification_cross_entropy(p, {0}), -std::log(1e-12), 1e-9);
}

TEST(ReconstructionLoss, EndpointsAndZeroAtIdentity) {
    std::mt19937_64 rng(4);
    const auto s = random_tensor({2, 12, 12, 3}, rng, 0, 1);
    const auto v = random_tensor({2, 12, 12, 3}, rng, 0, 1);
    const SsimConfig cfg;
    EXPECT_NEAR(reconstruction_loss_value(s, v, 0.0, cfg), mse(s, v), 1e-15);
    EXPECT_NEAR(reconstruction_loss_value(s, v, 1.0, cfg), 1 - ssim(s, v, cfg), 1e-15);
    for (double beta : {0.0, 0.3, 1.0}) EXPECT_NEAR(reconstruction_loss_value(s, s, beta, cfg), 0.0, 1e-12);
}

TEST(ReconstructionLoss, UniqueMinimizerOnTwoPixelGrid) {
    // L = 2, one rectangular window over both pixels.
    const auto win = rectangular_window(1, 2);
    const double s[2] = {0.3, 0.71};
    for (double beta : {0.0, 0.5, 1.0}) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1, ties = 0;
        for (int i = 0; i <= 100; ++i)
            for (int j = 0; j <= 100; ++j) {
                const double v[2] = {i / 100.0, j / 100.0};
                const double m = ((s[0] - v[0]) * (s[0] - v[0]) + (s[1] - v[1]) * (s[1] - v[1])) / 2;
                const double l = (1 - beta) * m + beta * (1 - ssim_single(s, v, 1, 2, 1, win));
                if (l < best - 1e-15) {
                    best = l;
                    bi = i;
                    bj = j;
                    ties = 0;
                } else if (std::abs(l - best) <= 1e-15) {
                    ++ties;
                }
            }
        EXPECT_EQ(bi, 30) << "beta " << beta;
        EXPECT_EQ(bj, 71) << "beta " << beta;
        EXPECT_EQ(ties, 0);
        EXPECT_NEAR(best, 0.0, 1e-12);
    }
}

TEST(TotalLoss, WeightedCombinationAndEndpoints) {
    std::mt19937_64 rng(5);
    const auto s = random_tensor({3, 12, 12, 3}, rng, 0, 1);
    const auto v = random_tensor({3, 12, 12, 3}, rng, 0, 1);
    auto probs = random_tensor({3, 10}, rng, 0.1, 1);
    for (std::size_t b = 0; b < 3; ++b) {
        double z = 0;
        for (double x : probs.sample(b)) z += x;
        for (double& x : probs.sample(b)) x /= z;
    }
    const std::vector<int> labels{1, 4, 8};
    const SsimKernel kernel;
    const double rec = reconstruction_loss(s, v, 0.25, kernel).loss;
    const double ce = classification_cross_entropy(probs, labels);
    EXPECT_NEAR(total_loss(s, v, probs, labels, {0.75, 0.25}, kernel).total, 0.75 * rec + 0.25 * ce, 1e-14);
    EXPECT_NEAR(total_loss(s, v, probs, labels, {0.0, 0.25}, kernel).total, ce, 1e-14);
    EXPECT_NEAR(total_loss(s, v, probs, labels, {1.0, 0.25}, kernel).total, rec, 1e-14);
    // affine in alpha with slope rec - ce
    for (double a : {0.1, 0.5, 0.9})
        EXPECT_NEAR(total_loss(s, v, probs, labels, {a, 0.25}, kernel).total, ce + a * (rec - ce), 1e-13);
    // endpoint gradients vanish exactly
    const auto at0 = total_loss(s, v, probs, labels, {0.0, 0.25}, kernel);
    for (double g : at0.grad_v.vec()) ASSERT_EQ(g, 0.0);
    const auto at1 = total_loss(s, v, probs, labels, {1.0, 0.25}, kernel);
    for (double g : at1.grad_probs.vec()) ASSERT_EQ(g, 0.0);
    EXPECT_THROW(total_loss(s, v, probs, labels, {1.5, 0.25}, kernel), ArgumentError);
}

TEST(TotalLoss, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(6);
    const auto s = random_tensor({2, 16, 16, 1}, rng, 0, 1);
    const auto v = random_tensor({2, 16, 16, 1}, rng, 0.05, 0.95);
    auto probs = random_tensor({2, 10}, rng, 0.1, 1);
    const std::vector<int> labels{2, 6};
    const SsimKernel kernel;
    const LossWeights w{0.6, 0.4};
    const auto out = total_loss(s, v, probs, labels, w, kernel);
    const auto fd_v = finite_difference(
        [&](const Tensor<double>& x) { return total_loss(s, x, probs, labels, w, kernel, false).total; }, v);
    const auto fd_p = finite_difference(
        [&](const Tensor<double>& x) { return total_loss(s, v, x, labels, w, kernel, false).total; }, probs);
    EXPECT_LT(relative_error(out.grad_v, fd_v), 1e-4);
    EXPECT_LT(relative_error(out.grad_probs, fd_p), 1e-4);
}
