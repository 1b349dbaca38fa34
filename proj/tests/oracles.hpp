#pragma once

// Test-only reference computations. Nothing here calls into the code path it
// is used to check.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom::testing {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
    Tensor<double> t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& x : t.vec()) x = u(rng);
    return t;
}

// Central finite difference of f w.r.t. every element of x.
inline Tensor<double> finite_difference(const std::function<double(const Tensor<double>&)>& f, Tensor<double> x,
                                        double h = 1e-6) {
    Tensor<double> g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2 * h);
    }
    return g;
}

// ||a - b|| / max(||a||, ||b||, floor)
inline double relative_error(const Tensor<double>& a, const Tensor<double>& b, double floor = 1e-12) {
    double diff = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Textbook SSIM for one grayscale image with explicit sample statistics over
// each window placement (no shared code with the library kernel).
inline double naive_ssim_gray(const std::vector<double>& x, const std::vector<double>& y, std::size_t h,
                              std::size_t w, const std::vector<double>& win, std::size_t wh, std::size_t ww,
                              double c1, double c2) {
    double total = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + wh <= h; ++i)
        for (std::size_t j = 0; j + ww <= w; ++j) {
            double mx = 0, my = 0;
            for (std::size_t a = 0; a < wh; ++a)
                for (std::size_t b = 0; b < ww; ++b) {
                    mx += win[a * ww + b] * x[(i + a) * w + j + b];
                    my += win[a * ww + b] * y[(i + a) * w + j + b];
                }
            double vx = 0, vy = 0, cxy = 0;
            for (std::size_t a = 0; a < wh; ++a)
                for (std::size_t b = 0; b < ww; ++b) {
                    const double dx = x[(i + a) * w + j + b] - mx, dy = y[(i + a) * w + j + b] - my;
                    vx += win[a * ww + b] * dx * dx;
                    vy += win[a * ww + b] * dy * dy;
                    cxy += win[a * ww + b] * dx * dy;
                }
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

}  // namespace semcom::testing
