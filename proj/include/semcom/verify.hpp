#pragma once

// Dataset-free property suite over the loss surface and the decoder
// densities. Every check reports the observed statistic next to its
// threshold; the fast scale shrinks sample counts, never tolerances.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/objective.hpp"
#include "semcom/prob_semantics.hpp"
#include "semcom/system.hpp"

namespace semcom {

enum class VerifyScale { fast, thorough };

inline VerifyScale verify_scale_from_string(const std::string& s) {
    if (s == "fast") return VerifyScale::fast;
    if (s == "thorough") return VerifyScale::thorough;
    throw ArgumentError("unknown verify scale '" + s + "' (expected fast or thorough)");
}

struct PropertyResult {
    std::string name;
    bool passed = false;
    double observed = 0;
    double threshold = 0;
    std::string detail;
    double seconds = 0;
};

inline void to_json(nlohmann::json& j, const PropertyResult& r) {
    j = {{"name", r.name},         {"passed", r.passed}, {"observed", r.observed},
         {"threshold", r.threshold}, {"detail", r.detail}, {"seconds", r.seconds}};
}

struct VerifyReport {
    VerifyScale scale = VerifyScale::fast;
    std::uint64_t seed = 0;
    std::vector<PropertyResult> results;

    bool all_passed() const {
        for (const auto& r : results)
            if (!r.passed) return false;
        return !results.empty();
    }

    nlohmann::json to_json() const {
        return {{"scale", scale == VerifyScale::fast ? "fast" : "thorough"},
                {"seed", seed},
                {"passed", all_passed()},
                {"properties", results}};
    }
};

namespace verify_detail {

inline Tensor<double> uniform_tensor(Shape shape, Rng& rng, double lo = 0, double hi = 1) {
    Tensor<double> t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& x : t.vec()) x = u(rng);
    return t;
}

inline std::vector<double> uniform_vector(std::size_t n, Rng& rng) { return uniform_tensor({n}, rng).vec(); }

// max_i |a_i - b_i| / max(max|a|, max|b|, floor)
inline double rel_error(const Tensor<double>& a, const Tensor<double>& b, double floor = 1e-12) {
    double diff = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

inline Tensor<double> central_difference(const std::function<double(const Tensor<double>&)>& f, Tensor<double> x,
                                         double h = 1e-6) {
    Tensor<double> g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2 * h);
    }
    return g;
}

}  // namespace verify_detail

inline VerifyReport run_property_suite(VerifyScale scale, std::uint64_t seed = 0,
                                       const std::function<void(const PropertyResult&)>& on_result = {}) {
    using namespace verify_detail;
    const bool thorough = scale == VerifyScale::thorough;
    VerifyReport report{scale, seed, {}};
    auto run = [&](const std::string& name, double threshold, auto&& body) {
        const auto start = std::chrono::steady_clock::now();
        PropertyResult r{name, false, 0, threshold, "", 0};
        try {
            body(r);
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.results.push_back(r);
        if (on_result) on_result(r);
    };
    auto rng_for = [&](std::uint64_t tag) { return Rng(derive_seed(seed, {0x564552ULL, tag})); };

    run("ssim_self_similarity", 1e-9, [&](PropertyResult& r) {
        Rng rng = rng_for(1);
        const auto win = gaussian_window(SsimConfig{});
        const int n = thorough ? 1000 : 100;
        for (int k = 0; k < n; ++k) {
            const auto a = uniform_tensor({1, 16, 16, 3}, rng);
            r.observed = std::max(r.observed, std::abs(ssim_batch(a, a, win) - 1));
        }
        r.passed = r.observed <= r.threshold;
        r.detail = "max |SSIM(x,x) - 1| over " + std::to_string(n) + " random images";
    });

    run("ssim_bounded", 1.0, [&](PropertyResult& r) {
        Rng rng = rng_for(2);
        const auto win = gaussian_window(SsimConfig{});
        const int n = thorough ? 1000 : 100;
        for (int k = 0; k < n; ++k) {
            const auto a = uniform_tensor({1, 16, 16, 3}, rng), b = uniform_tensor({1, 16, 16, 3}, rng);
            r.observed = std::max(r.observed, std::abs(ssim_batch(a, b, win)));
        }
        r.passed = r.observed <= r.threshold;
        r.detail = "max |SSIM(a,b)| over " + std::to_string(n) + " random pairs";
    });

    run("ssim_constant_images", 1e-12, [&](PropertyResult& r) {
        Tensor<double> s({1, 16, 16, 3}), v({1, 16, 16, 3});
        s.fill(1);
        r.observed = std::abs(ssim(s, v, SsimConfig{}) - 1e-4 / (1 + 1e-4));
        r.passed = r.observed <= r.threshold;
        r.detail = "SSIM(1, 0) against c1 / (1 + c1)";
    });

    run("nll_mse_identity", 1e-9, [&](PropertyResult& r) {
        Rng rng = rng_for(3);
        for (int k = 0; k < 100; ++k) {
            const std::size_t L = 1 + static_cast<std::size_t>(k) % 48;
            const auto s = uniform_vector(L, rng), mu = uniform_vector(L, rng);
            const double Ld = static_cast<double>(L);
            const double m = mse(Tensor<double>({1, L}, s), Tensor<double>({1, L}, mu));
            r.observed = std::max(r.observed,
                                  std::abs(gaussian_nll(s, {mu, Ld / 2}) - Ld / 2 * std::log(std::numbers::pi * Ld) - m));
        }
        r.passed = r.observed <= r.threshold;
        r.detail = "max |NLL - (L/2) log(pi L) - MSE| at sigma^2 = L/2 over 100 vectors";
    });

    run("ssim_density_support", 0.0, [&](PropertyResult& r) {
        Rng rng = rng_for(4);
        auto q = SsimDecoderDensity::single_window(uniform_vector(4, rng), 2, 2);
        int violations = 0;
        for (int k = 0; k < 1000; ++k) {
            const double v = ssim_exp_log_density_unnormalized(uniform_vector(4, rng), q);
            if (v > 1e-12 || v < -2) ++violations;
        }
        if (ssim_exp_log_density_unnormalized(std::vector<double>{0.5, 1.5, 0.5, 0.5}, q) != kLogZero) ++violations;
        if (std::abs(ssim_exp_log_density_unnormalized(q.gamma, q)) > 1e-12) ++violations;
        r.observed = violations;
        r.passed = violations == 0;
        r.detail = "log density in [-2, 0] on the cube, peak 0 at gamma, zero density outside";
    });

    run("normalizer_bounds_and_reproducibility", 3.0, [&](PropertyResult& r) {
        const auto q = SsimDecoderDensity::single_window({0.5, 0.5, 0.5, 0.5}, 2, 2);
        const std::size_t n = thorough ? 200000 : 20000;
        Rng r1 = rng_for(5), r2 = rng_for(6);
        const auto a = estimate_log_normalizer(q, n, r1), b = estimate_log_normalizer(q, n, r2);
        r.observed = std::abs(a.log_d - b.log_d) / std::hypot(a.std_err, b.std_err);
        const bool bounded = a.log_d >= 0 && a.log_d <= 2 && b.log_d >= 0 && b.log_d <= 2;
        r.passed = bounded && r.observed <= r.threshold;
        r.detail = "d = " + std::to_string(std::exp(a.log_d)) + " and " + std::to_string(std::exp(b.log_d)) +
                   " (bounds [1, e^2]); difference in standard errors";
    });

    run("ssim_density_integrates_to_one", 0.02, [&](PropertyResult& r) {
        auto q = SsimDecoderDensity::single_window({0.5, 0.5, 0.5, 0.5}, 2, 2);
        const std::size_t n = thorough ? 1000000 : 100000;
        Rng est = rng_for(7), fresh = rng_for(8);
        q.log_normalizer = estimate_log_normalizer(q, n, est).log_d;
        std::uniform_real_distribution<double> u(0, 1);
        std::vector<double> s(4);
        double mean = 0;
        for (std::size_t k = 0; k < n; ++k) {
            for (double& x : s) x = u(fresh);
            mean += std::exp(*q.log_normalizer + ssim_exp_log_density_unnormalized(s, q));
        }
        mean /= static_cast<double>(n);
        r.observed = std::abs(mean - 1);
        r.passed = r.observed <= r.threshold;
        r.detail = "fresh-sample integral " + std::to_string(mean) + " at L = 4 with " + std::to_string(n) + " samples";
    });

    run("mixture_grid_argmax", 0.0, [&](PropertyResult& r) {
        Rng rng = rng_for(9);
        auto shape = SsimDecoderDensity::single_window({0.5, 0.5}, 1, 2);
        shape.log_normalizer = estimate_log_normalizer(shape, 20000, rng).log_d;
        int misses = 0;
        const std::vector<std::vector<double>> centres = {{0.42, 0.77}, {0.1, 0.9}, {0.63, 0.35}};
        for (const auto& v : centres)
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
                if (bi != std::lround(v[0] * 100) || bj != std::lround(v[1] * 100)) ++misses;
                if (ml_estimate(v) != v) ++misses;
            }
        r.observed = misses;
        r.passed = misses == 0;
        r.detail = "grid step 0.01, beta in {0, 0.5, 1}, 3 centres: argmax equals v";
    });

    run("ssim_cross_entropy_decomposition", 1e-9, [&](PropertyResult& r) {
        Rng rng = rng_for(10);
        auto q = SsimDecoderDensity::single_window(uniform_vector(4, rng), 2, 2);
        q.log_normalizer = 0.7;
        double lhs = 0, rhs = 0;
        for (int k = 0; k < 64; ++k) {
            const auto s = uniform_vector(4, rng);
            lhs -= (*q.log_normalizer + ssim_exp_log_density_unnormalized(s, q)) / 64;
            rhs += (1 - ssim_single(s.data(), q.gamma.data(), 2, 2, 1, q.window)) / 64;
        }
        r.observed = std::abs(lhs - (-0.7 + rhs));
        r.passed = r.observed <= r.threshold;
        r.detail = "mean -log q'' = -log d + mean(1 - SSIM)";
    });

    run("ssim_gradient", 1e-4, [&](PropertyResult& r) {
        Rng rng = rng_for(11);
        const auto win = gaussian_window(SsimConfig{});
        const auto s = uniform_tensor({2, 16, 16, 1}, rng), v = uniform_tensor({2, 16, 16, 1}, rng);
        Tensor<double> g;
        ssim_batch(s, v, win, &g);
        r.observed = rel_error(g, central_difference([&](const Tensor<double>& x) { return ssim_batch(s, x, win); }, v));
        r.passed = r.observed < r.threshold;
        r.detail = "relative error against central differences, 16x16x1 inputs";
    });

    run("total_loss_gradient", 1e-4, [&](PropertyResult& r) {
        Rng rng = rng_for(12);
        const auto s = uniform_tensor({2, 16, 16, 1}, rng), v = uniform_tensor({2, 16, 16, 1}, rng, 0.05, 0.95);
        const auto probs = uniform_tensor({2, 10}, rng, 0.05, 1);
        const std::vector<int> labels{3, 8};
        const SsimKernel kernel;
        double worst = 0;
        for (const LossWeights w : {LossWeights{0.75, 0.25}, LossWeights{0.3, 1.0}, LossWeights{1.0, 0.0}}) {
            const auto out = total_loss(s, v, probs, labels, w, kernel);
            auto f_v = [&](const Tensor<double>& x) { return total_loss(s, x, probs, labels, w, kernel, false).total; };
            auto f_p = [&](const Tensor<double>& x) { return total_loss(s, v, x, labels, w, kernel, false).total; };
            worst = std::max(worst, rel_error(out.grad_v, central_difference(f_v, v)));
            if (w.alpha < 1) worst = std::max(worst, rel_error(out.grad_probs, central_difference(f_p, probs)));
        }
        r.observed = worst;
        r.passed = r.observed < r.threshold;
        r.detail = "d total / d v and d total / d probs against central differences, three (alpha, beta) pairs";
    });

    run("system_gradient", 1e-4, [&](PropertyResult& r) {
        // Directional derivative through encoders, channel and both decoders.
        ChannelConfig ch;
        ch.snr_db = std::numeric_limits<double>::infinity();
        SemcomSystem<double> sys(ch, derive_seed(seed, {13}));
        Rng rng = rng_for(13);
        const auto img = uniform_tensor({2, 32, 32, 3}, rng);
        const std::vector<int> labels{1, 6};
        const SsimKernel kernel;
        const LossWeights w{0.75, 0.25};
        auto refs = sys.all_refs();
        std::vector<Tensor<double>> dir;
        std::normal_distribution<double> nd;
        double norm2 = 0;
        for (auto* p : refs.params) {
            Tensor<double> d(p->value.shape());
            for (auto& x : d.vec()) {
                x = nd(rng);
                norm2 += x * x;
            }
            dir.push_back(std::move(d));
        }
        // unit direction keeps the step inside one linear piece of every ReLU
        for (auto& d : dir)
            for (auto& x : d.vec()) x /= std::sqrt(norm2);
        auto loss_at = [&](double t, bool grads) {
            std::vector<Tensor<double>> saved;
            for (std::size_t i = 0; i < refs.params.size(); ++i) {
                saved.push_back(refs.params[i]->value);
                for (std::size_t k = 0; k < dir[i].size(); ++k) refs.params[i]->value[k] += t * dir[i][k];
            }
            std::vector<Tensor<double>> buffers;
            for (auto* b : refs.buffers) buffers.push_back(b->value);
            Rng noise(0);
            auto fp = sys.forward(img, Mode::train_all, noise);
            auto l = total_loss(img, fp.reconstruction, fp.probs, labels, w, kernel, grads);
            if (grads) {
                refs.zero_grad();
                sys.backward(l.grad_v, l.grad_probs, true);
            }
            for (std::size_t i = 0; i < refs.params.size(); ++i) refs.params[i]->value = saved[i];
            for (std::size_t i = 0; i < refs.buffers.size(); ++i) refs.buffers[i]->value = buffers[i];
            return l.total;
        };
        loss_at(0, true);
        double analytic = 0;
        for (std::size_t i = 0; i < refs.params.size(); ++i)
            for (std::size_t k = 0; k < dir[i].size(); ++k) analytic += refs.params[i]->grad[k] * dir[i][k];
        const double h = 1e-6;
        const double numeric = (loss_at(h, false) - loss_at(-h, false)) / (2 * h);
        r.observed = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-12});
        r.passed = r.observed < r.threshold;
        r.detail = "random direction over all parameters: analytic " + std::to_string(analytic) + ", numeric " +
                   std::to_string(numeric);
    });

    run("power_normalization", 1e-6, [&](PropertyResult& r) {
        Rng rng = rng_for(14);
        const std::size_t n = thorough ? 10000 : 1000;
        const auto raw = uniform_tensor({n, 50}, rng, -3, 3);
        const auto c = power_normalize(raw);
        for (std::size_t b = 0; b < n; ++b) {
            double p = 0;
            for (double x : c.sample(b)) p += x * x;
            r.observed = std::max(r.observed, std::abs(p / 50 - 1));
        }
        r.passed = r.observed < r.threshold;
        r.detail = "max |P - 1| over " + std::to_string(n) + " codewords";
    });

    run("awgn_variance_3db", 0.01, [&](PropertyResult& r) {
        ChannelConfig cfg;
        Rng rng = rng_for(15);
        std::vector<Tensor<double>> zeros(4, Tensor<double>({5000, 50}));
        const auto y = transmit(zeros, cfg, rng);
        double sum = 0, sq = 0;
        for (double x : y.vec()) {
            sum += x;
            sq += x * x;
        }
        const double n = static_cast<double>(y.size());
        const double var = sq / n - (sum / n) * (sum / n);
        r.observed = std::abs(var / 0.501187 - 1);
        r.passed = r.observed <= r.threshold;
        r.detail = "empirical variance " + std::to_string(var) + " over 10^6 draws, target 0.501187";
    });

    return report;
}

}  // namespace semcom
