#pragma once

// SVG figure of a results file: PSNR, SSIM and accuracy against alpha, one
// solid curve per beta over noisy-channel records and a dashed curve of the
// same colour over the matching noiseless records.

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "semcom/evaluation.hpp"

namespace semcom {

class PlotError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CurvePoint {
    double alpha = 0;
    double psnr_db = 0, ssim = 0, accuracy = 0;
};

struct Curve {
    double beta = 0;
    double snr_db = 0;
    bool noiseless = false;
    std::vector<CurvePoint> points;  // ascending alpha; repeated alphas averaged
};

// Records of one SSIM definition grouped into curves. Noiseless curves are
// keyed by the SNR they were trained at.
inline std::vector<Curve> build_curves(const std::vector<MetricsRecord>& records) {
    if (records.empty()) throw PlotError("no records to plot");
    std::set<std::string> tags;
    for (const auto& r : records) tags.insert(r.ssim_tag);
    if (tags.size() > 1) {
        std::string list;
        for (const auto& t : tags) list += (list.empty() ? "" : ", ") + t;
        throw PlotError("records use different SSIM definitions (" + list + "); plot them separately");
    }
    struct Acc {
        double psnr = 0, ssim = 0, acc = 0;
        int n = 0;
    };
    std::map<std::tuple<bool, double, double>, std::map<double, Acc>> groups;
    for (const auto& r : records) {
        auto& a = groups[{r.noiseless, r.beta, r.snr_db}][r.alpha];
        a.psnr += r.psnr_db;
        a.ssim += r.ssim;
        a.acc += r.accuracy;
        ++a.n;
    }
    std::vector<Curve> curves;
    for (const auto& [key, by_alpha] : groups) {
        Curve c{std::get<1>(key), std::get<2>(key), std::get<0>(key), {}};
        for (const auto& [alpha, a] : by_alpha) c.points.push_back({alpha, a.psnr / a.n, a.ssim / a.n, a.acc / a.n});
        curves.push_back(std::move(c));
    }
    return curves;
}

namespace plot_detail {

inline std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

inline std::string colour(std::size_t i) {
    static const std::array<const char*, 10> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                        "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return palette[i % palette.size()];
}

struct Range {
    double lo, hi;
};

// Pads a degenerate or tight range so a single value still gets an axis.
inline Range padded(double lo, double hi) {
    if (hi - lo < 1e-9) {
        const double pad = std::max(std::abs(lo) * 0.05, 0.05);
        return {lo - pad, hi + pad};
    }
    const double pad = (hi - lo) * 0.05;
    return {lo - pad, hi + pad};
}

}  // namespace plot_detail

inline std::string render_svg(const std::vector<MetricsRecord>& records) {
    using namespace plot_detail;
    const auto curves = build_curves(records);
    std::set<double> snrs;
    std::vector<double> betas;
    for (const auto& c : curves) {
        snrs.insert(c.snr_db);
        if (std::find(betas.begin(), betas.end(), c.beta) == betas.end()) betas.push_back(c.beta);
    }
    std::sort(betas.begin(), betas.end());
    auto colour_of = [&](double beta) {
        return colour(static_cast<std::size_t>(std::find(betas.begin(), betas.end(), beta) - betas.begin()));
    };

    const double pw = 300, ph = 220, ml = 55, mt = 30, gap = 70, legend_w = 170;
    const double width = ml + 3 * pw + 2 * gap + 30 + legend_w, height = mt + ph + 60;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    const std::array<const char*, 3> titles = {"PSNR (dB)", "SSIM", "Accuracy"};
    for (int panel = 0; panel < 3; ++panel) {
        auto metric = [&](const CurvePoint& p) { return panel == 0 ? p.psnr_db : panel == 1 ? p.ssim : p.accuracy; };
        double lo = 1e300, hi = -1e300;
        for (const auto& c : curves)
            for (const auto& p : c.points) {
                lo = std::min(lo, metric(p));
                hi = std::max(hi, metric(p));
            }
        const Range y = padded(lo, hi);
        const double x0 = ml + panel * (pw + gap), y0 = mt;
        auto sx = [&](double a) { return x0 + a * pw; };
        auto sy = [&](double v) { return y0 + ph - (v - y.lo) / (y.hi - y.lo) * ph; };

        out << "<g>\n<text x=\"" << x0 + pw / 2 << "\" y=\"" << y0 - 10 << "\" text-anchor=\"middle\" font-size=\"13\">"
            << titles[static_cast<std::size_t>(panel)] << "</text>\n";
        out << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << pw << "\" height=\"" << ph
            << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int t = 0; t <= 4; ++t) {
            const double a = t / 4.0, v = y.lo + (y.hi - y.lo) * t / 4.0;
            out << "<text x=\"" << sx(a) << "\" y=\"" << y0 + ph + 15 << "\" text-anchor=\"middle\">" << num(a)
                << "</text>\n";
            out << "<line x1=\"" << x0 << "\" x2=\"" << x0 + pw << "\" y1=\"" << sy(v) << "\" y2=\"" << sy(v)
                << "\" stroke=\"#dddddd\"/>\n";
            out << "<text x=\"" << x0 - 5 << "\" y=\"" << sy(v) + 4 << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
        }
        out << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << y0 + ph + 35 << "\" text-anchor=\"middle\">alpha</text>\n";
        for (const auto& c : curves) {
            const std::string col = colour_of(c.beta);
            const std::string dash = c.noiseless ? " stroke-dasharray=\"6,4\"" : "";
            if (c.points.size() > 1) {
                out << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\"" << dash << " points=\"";
                for (const auto& p : c.points) out << sx(p.alpha) << "," << sy(metric(p)) << " ";
                out << "\"/>\n";
            }
            for (const auto& p : c.points)
                out << "<circle cx=\"" << sx(p.alpha) << "\" cy=\"" << sy(metric(p)) << "\" r=\"3\" fill=\""
                    << (c.noiseless ? "white" : col) << "\" stroke=\"" << col << "\"/>\n";
        }
        out << "</g>\n";
    }

    const double lx = ml + 3 * pw + 2 * gap + 30;
    double ly = mt + 10;
    for (const auto& c : curves) {
        std::string label = "beta=" + num(c.beta);
        if (snrs.size() > 1) label += ", " + num(c.snr_db) + " dB";
        if (c.noiseless) label += " (noiseless)";
        out << "<line x1=\"" << lx << "\" x2=\"" << lx + 25 << "\" y1=\"" << ly << "\" y2=\"" << ly << "\" stroke=\""
            << colour_of(c.beta) << "\" stroke-width=\"1.5\"" << (c.noiseless ? " stroke-dasharray=\"6,4\"" : "")
            << "/>\n<text x=\"" << lx + 30 << "\" y=\"" << ly + 4 << "\">" << label << "</text>\n";
        ly += 16;
    }
    out << "</svg>\n";
    return out.str();
}

inline void write_svg(const std::vector<MetricsRecord>& records, const std::filesystem::path& path) {
    const std::string svg = render_svg(records);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!(f << svg)) throw PlotError("cannot write " + path.string());
}

}  // namespace semcom
