#include <gtest/gtest.h>

#include "oracles.hpp"
#include "semcom/objective.hpp"
#include "semcom/prob_semantics.hpp"

using namespace semcom;

namespace {

std::vector<double> uniform_vector(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST(GaussianNll, ClosedForms) {
    const GaussianDecoderDensity q{{0.2, 0.4, 0.6}, 0.7};
    const std::vector<double> s{0.2, 0.4, 0.6};
    EXPECT_NEAR(gaussian_nll(s, q), 1.5 * std::log(2 * std::numbers::pi * 0.7), 1e-14);
    EXPECT_NEAR(gaussian_nll(std::vector<double>{1.0}, GaussianDecoderDensity{{0.0}, 1.0}), 1.418939, 1e-6);
    EXPECT_THROW(gaussian_nll(s, GaussianDecoderDensity{{0.2, 0.4, 0.6}, 0.0}), ArgumentError);
    EXPECT_THROW(gaussian_nll(std::vector<double>{1.0}, q), ArgumentError);
}

TEST(GaussianNll, EqualsMseAtHalfLVariance) {
    std::mt19937_64 rng(1);
    double worst = 0;
    for (int k = 0; k < 100; ++k) {
        const std::size_t L = 1 + k % 40;
        const auto s = uniform_vector(L, rng), mu = uniform_vector(L, rng);
        const double Ld = static_cast<double>(L);
        Tensor<double> ts({1, L}, s), tm({1, L}, mu);
        const double diff = gaussian_nll(s, {mu, Ld / 2}) - Ld / 2 * std::log(std::numbers::pi * Ld) - mse(ts, tm);
        worst = std::max(worst, std::abs(diff));
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(SsimDensity, PeakRangeAndSupport) {
    std::mt19937_64 rng(2);
    const auto q = SsimDecoderDensity::single_window(uniform_vector(4, rng), 2, 2);
    EXPECT_NEAR(ssim_exp_log_density_unnormalized(q.gamma, q), 0.0, 1e-12);
    for (int k = 0; k < 1000; ++k) {
        const double v = ssim_exp_log_density_unnormalized(uniform_vector(4, rng), q);
        ASSERT_LE(v, 1e-12);
        ASSERT_GE(v, -2.0);
    }
    EXPECT_EQ(ssim_exp_log_density_unnormalized(std::vector<double>{0.5, 1.2, 0.5, 0.5}, q), kLogZero);
    EXPECT_EQ(ssim_exp_log_density_unnormalized(std::vector<double>{-0.01, 0.5, 0.5, 0.5}, q), kLogZero);
}

TEST(SsimDensity, MonotoneInSsim) {
    std::mt19937_64 rng(3);
    const auto q = SsimDecoderDensity::single_window(uniform_vector(4, rng), 2, 2);
    for (int k = 0; k < 200; ++k) {
        const auto a = uniform_vector(4, rng), b = uniform_vector(4, rng);
        const double da = std::exp(ssim_exp_log_density_unnormalized(a, q));
        const double db = std::exp(ssim_exp_log_density_unnormalized(b, q));
        const double sa = ssim_single(a.data(), q.gamma.data(), 2, 2, 1, q.window);
        const double sb = ssim_single(b.data(), q.gamma.data(), 2, 2, 1, q.window);
        ASSERT_EQ(da > db, sa > sb);
    }
}

TEST(Normalizer, WithinAnalyticBoundsAndReproducible) {
    const auto q = SsimDecoderDensity::single_window({0.5, 0.5, 0.5, 0.5}, 2, 2);
    Rng r1(10), r2(20);
    const auto a = estimate_log_normalizer(q, 100000, r1);
    const auto b = estimate_log_normalizer(q, 100000, r2);
    EXPECT_GE(a.log_d, 0.0);
    EXPECT_LE(a.log_d, 2.0);
    EXPECT_GT(a.std_err, 0.0);
    EXPECT_LT(std::abs(a.log_d - b.log_d), 3 * std::hypot(a.std_err, b.std_err));
}

TEST(Normalizer, IntegratesToOneOnFreshSamples) {
    auto q = SsimDecoderDensity::single_window({0.5, 0.5, 0.5, 0.5}, 2, 2);
    Rng rng(5);
    q.log_normalizer = estimate_log_normalizer(q, 1000000, rng).log_d;
    Rng fresh(6);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> s(4);
    double mean = 0;
    const int n = 1000000;
    for (int k = 0; k < n; ++k) {
        for (double& x : s) x = u(fresh);
        mean += std::exp(*q.log_normalizer + ssim_exp_log_density_unnormalized(s, q)) / n;
    }
    EXPECT_LT(std::abs(mean - 1), 0.02) << "integral " << mean;
}

TEST(Normalizer, RefusesLargeImagesAndSmallSamples) {
    Rng rng(1);
    const auto big = SsimDecoderDensity::single_window(std::vector<double>(81, 0.5), 9, 9);
    EXPECT_THROW(estimate_log_normalizer(big, 10000, rng), UnsupportedConfiguration);
    const auto small = SsimDecoderDensity::single_window({0.5, 0.5}, 1, 2);
    EXPECT_THROW(estimate_log_normalizer(small, 100, rng), ArgumentError);
}

TEST(Mixture, EndpointsAndMissingNormalizer) {
    std::mt19937_64 rng(7);
    auto shape = SsimDecoderDensity::single_window({0, 0}, 1, 2);
    const auto s = uniform_vector(2, rng), v = uniform_vector(2, rng);
    EXPECT_DOUBLE_EQ(mixture_log_pdf(s, v, 0.0, 0.3, shape), -gaussian_nll(s, {v, 0.3}));
    shape.log_normalizer = 0.8;
    const double ssim_sv = ssim_single(s.data(), v.data(), 1, 2, 1, shape.window);
    EXPECT_NEAR(mixture_log_pdf(s, v, 1.0, 0.3, shape), 0.8 + ssim_sv - 1, 1e-14);
    // log-sum-exp agrees with the direct mixture
    const double direct = std::log(0.4 * std::exp(-gaussian_nll(s, {v, 0.3})) + 0.6 * std::exp(0.8 + ssim_sv - 1));
    EXPECT_NEAR(mixture_log_pdf(s, v, 0.6, 0.3, shape), direct, 1e-12);
    shape.log_normalizer.reset();
    EXPECT_THROW(mixture_log_pdf(s, v, 0.5, 0.3, shape), NormalizerNotEstimated);
}

TEST(Mixture, GridArgmaxIsTheSharedMean) {
    auto shape = SsimDecoderDensity::single_window({0, 0}, 1, 2);
    Rng rng(8);
    shape.gamma = {0.5, 0.5};
    shape.log_normalizer = estimate_log_normalizer(shape, 20000, rng).log_d;
    const std::vector<double> v{0.42, 0.77};
    for (double beta : {0.0, 0.5, 1.0}) {
        double best = -std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;
        for (int i = 0; i <= 100; ++i)
            for (int j = 0; j <= 100; ++j) {
                const std::vector<double> s{i / 100.0, j / 100.0};
                const double lp = mixture_log_pdf(s, v, beta, 0.05, shape);
                if (lp > best) {
                    best = lp;
                    bi = i;
                    bj = j;
                }
            }
        EXPECT_EQ(bi, 42) << "beta " << beta;
        EXPECT_EQ(bj, 77) << "beta " << beta;
    }
    EXPECT_EQ(ml_estimate(v), v);
    EXPECT_EQ(ml_estimate(std::vector<double>{0, 0}), (std::vector<double>{0, 0}));
}

TEST(Mixture, CrossEntropyDecomposition) {
    // mean of -log q'' over a batch = -log d + mean(1 - SSIM)
    std::mt19937_64 gen(9);
    auto q = SsimDecoderDensity::single_window(uniform_vector(4, gen), 2, 2);
    q.log_normalizer = 0.9;
    double lhs = 0, mean_one_minus = 0;
    const int n = 64;
    for (int k = 0; k < n; ++k) {
        const auto s = uniform_vector(4, gen);
        lhs -= (*q.log_normalizer + ssim_exp_log_density_unnormalized(s, q)) / n;
        mean_one_minus += (1 - ssim_single(s.data(), q.gamma.data(), 2, 2, 1, q.window)) / n;
    }
    EXPECT_NEAR(lhs, -0.9 + mean_one_minus, 1e-9);
}
