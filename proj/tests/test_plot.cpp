#include <gtest/gtest.h>

#include <regex>

#include "semcom/plot.hpp"

using namespace semcom;

namespace {

MetricsRecord record(double alpha, double beta, bool noiseless = false) {
    MetricsRecord r;
    r.alpha = alpha;
    r.beta = beta;
    r.snr_db = 3;
    r.accuracy = 0.7 - 0.2 * alpha;
    r.psnr_db = 14 + 6 * alpha;
    r.ssim = 0.3 + 0.3 * alpha;
    r.noiseless = noiseless;
    r.ssim_tag = ssim_tag(SsimConfig{});
    return r;
}

std::size_t count(const std::string& s, const std::string& what) {
    std::size_t n = 0;
    for (auto p = s.find(what); p != std::string::npos; p = s.find(what, p + 1)) ++n;
    return n;
}

}  // namespace

TEST(Plot, FullGridGivesFiveCurvesPerPanel) {
    std::vector<MetricsRecord> records;
    for (double b : default_beta_grid())
        for (double a : default_alpha_grid()) records.push_back(record(a, b));
    const auto curves = build_curves(records);
    ASSERT_EQ(curves.size(), 5u);
    for (const auto& c : curves) EXPECT_EQ(c.points.size(), 11u);
    const auto svg = render_svg(records);
    EXPECT_EQ(count(svg, "<polyline"), 15u);
    EXPECT_EQ(count(svg, "stroke-dasharray"), 0u);
    for (const char* title : {"PSNR (dB)", "SSIM", "Accuracy"}) EXPECT_NE(svg.find(title), std::string::npos);
}

TEST(Plot, NoiselessRecordsDrawDashedLabelledCurves) {
    std::vector<MetricsRecord> records{record(0, 0.25), record(1, 0.25), record(0, 0.25, true), record(1, 0.25, true)};
    const auto svg = render_svg(records);
    EXPECT_EQ(count(svg, "<polyline"), 6u);
    EXPECT_EQ(count(svg, "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" stroke-dasharray"), 3u);
    EXPECT_NE(svg.find("(noiseless)"), std::string::npos);
}

TEST(Plot, SingleRecordRendersPoints) {
    const auto svg = render_svg({record(0.75, 0.25)});
    EXPECT_EQ(count(svg, "<polyline"), 0u);
    EXPECT_EQ(count(svg, "<circle"), 3u);
    EXPECT_EQ(svg.find("nan"), std::string::npos);
    EXPECT_EQ(svg.find("inf"), std::string::npos);
}

TEST(Plot, RepeatedAlphasAreAveraged) {
    auto a = record(0.5, 0), b = record(0.5, 0);
    a.accuracy = 0.4;
    b.accuracy = 0.6;
    const auto curves = build_curves({a, b});
    ASSERT_EQ(curves.size(), 1u);
    ASSERT_EQ(curves[0].points.size(), 1u);
    EXPECT_NEAR(curves[0].points[0].accuracy, 0.5, 1e-12);
}

TEST(Plot, RefusesEmptyInputAndMixedSsimDefinitions) {
    EXPECT_THROW(render_svg({}), PlotError);
    auto other = record(0.5, 0.25);
    SsimConfig cfg;
    cfg.window_size = 7;
    other.ssim_tag = ssim_tag(cfg);
    EXPECT_THROW(render_svg({record(0, 0.25), other}), PlotError);
}
