#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rifling/peaks.hpp"

using namespace rifling;

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return x;
}

double lorentz(double x, double c, double w) { return 1.0 / (1.0 + std::pow((x - c) / w, 2)); }

}  // namespace

TEST(FindPeaks, SingleLorentzianCentred) {
    const auto x = linspace(-10, 10, 401);
    std::vector<double> y;
    for (double v : x) y.push_back(lorentz(v, 1.234, 0.5));
    const auto p = find_peaks(y, x);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_NEAR(p[0].x, 1.234, x[1] - x[0]);
    EXPECT_NEAR(p[0].height, 1.0, 1e-2);
}

TEST(FindPeaks, WellSeparatedPairGivesTwo) {
    const auto x = linspace(-20, 20, 801);
    std::vector<double> y;
    for (double v : x) y.push_back(lorentz(v, -5, 0.5) + lorentz(v, 5, 0.5));  // 10 linewidths apart
    const auto p = find_peaks(y, x);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_NEAR(p[0].x, -5, 0.05);
    EXPECT_NEAR(p[1].x, 5, 0.05);
}

// Two Lorentzians (FWHM w) split by 0.5 w: the sum has a negative second
// derivative at the midpoint and no other stationary point, so it is unimodal.
TEST(FindPeaks, HalfLinewidthSplitMerges) {
    const double hw = 0.5;  // half width; FWHM = 1
    const double sep = 0.5;
    auto f = [&](double v) { return lorentz(v, -sep / 2, hw) + lorentz(v, sep / 2, hw); };
    // oracle: sign of f'' at the centre from a central difference
    const double h = 1e-4;
    EXPECT_LT(f(h) - 2 * f(0) + f(-h), 0.0);
    const auto x = linspace(-5, 5, 1001);
    std::vector<double> y;
    for (double v : x) y.push_back(f(v));
    EXPECT_EQ(find_peaks(y, x, 0.05).size(), 1u);
}

TEST(FindPeaks, ParabolicRefinementIsExactOnParabola) {
    const std::vector<double> x{0.0, 1.0, 2.5, 3.0, 4.0};
    std::vector<double> y;
    for (double v : x) y.push_back(2.0 - (v - 1.3) * (v - 1.3));
    const auto p = find_peaks(y, x, 0.0);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_NEAR(p[0].x, 1.3, 1e-12);
    EXPECT_NEAR(p[0].height, 2.0, 1e-12);
}

TEST(FindPeaks, ProminenceThresholdFiltersSmallBumps) {
    const auto x = linspace(-10, 10, 401);
    std::vector<double> y;
    for (double v : x) y.push_back(lorentz(v, -3, 0.5) + 0.02 * lorentz(v, 4, 0.3));
    EXPECT_EQ(find_peaks(y, x, 0.05).size(), 1u);
    EXPECT_EQ(find_peaks(y, x, 0.001).size(), 2u);
}

TEST(FindPeaks, PlateauCountsOnce) {
    const std::vector<double> x{0, 1, 2, 3, 4, 5, 6};
    const std::vector<double> y{0, 1, 2, 2, 2, 1, 0};
    const auto p = find_peaks(y, x);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_DOUBLE_EQ(p[0].x, 3.0);
}

TEST(FindPeaks, MonotoneHasNoPeaks) {
    const auto x = linspace(0, 1, 10);
    EXPECT_TRUE(find_peaks(x, x).empty());
}

TEST(FindPeaks, RejectsBadInput) {
    EXPECT_THROW(find_peaks({1, 2}, {0, 1}), InvalidArgument);
    EXPECT_THROW(find_peaks({1, 2, 3}, {0, 1}), InvalidArgument);
    EXPECT_THROW(find_peaks({1, 2, 1}, {0, 1, 1}), InvalidArgument);
    EXPECT_THROW(find_peaks({1, NAN, 1}, {0, 1, 2}), InvalidArgument);
}
