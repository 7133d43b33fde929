#include "hanoi/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hanoi;

namespace {

MatchingSequence half() { return MatchingSequence::constant(0.5); }

std::vector<CountingSample> synthetic(double exponent, double lo, double hi, std::size_t n) {
    std::vector<CountingSample> out;
    for (double x : log_grid(lo, hi, n)) {
        CountingSample s;
        s.x = x;
        s.n_neumann = std::size_t(std::floor(std::pow(x, exponent)));
        out.push_back(s);
    }
    return out;
}

}  // namespace

TEST(Grid, LogGridEndpointsAndSpacing) {
    const auto g = log_grid(1.0, 1000.0, 4);
    ASSERT_EQ(g.size(), 4u);
    EXPECT_EQ(g.front(), 1.0);
    EXPECT_EQ(g.back(), 1000.0);
    EXPECT_NEAR(g[1], 10.0, 1e-12);
    EXPECT_EQ(log_grid_per_decade(1.0, 100.0, 60).size(), 121u);
    EXPECT_THROW((void)log_grid(0.0, 1.0, 5), DomainError);
}

TEST(Counting, LevelZeroExample) {
    const auto g = build_graph(half(), 0, 1, 0.25);
    const auto pn = assemble_neumann(g);
    const auto pd = dirichlet_pencil(pn, g);
    EXPECT_FALSE(pd.has_value());
    for (auto backend : {Backend::Dense, Backend::Inertia}) {
        const auto s = counting_function(pn, pd, {1.0, 9.0, 10.0}, backend);
        EXPECT_EQ(s[0].n_neumann, 1u);
        EXPECT_EQ(s[1].n_neumann, 3u);
        EXPECT_EQ(s[2].n_neumann, 3u);
        for (const auto& x : s) EXPECT_EQ(x.n_dirichlet, 0u);
    }
}

TEST(Counting, RejectsBadGrid) {
    const auto pn = assemble_neumann(build_graph(half(), 1, 1, 0.25));
    EXPECT_THROW((void)counting_function(pn, std::nullopt, {2.0, 1.0}, Backend::Dense), DomainError);
    EXPECT_THROW((void)counting_function(pn, std::nullopt, {-1.0}, Backend::Dense), DomainError);
}

TEST(Counting, InterlacingAndBackendAgreement) {
    for (const auto& seq : {half(), MatchingSequence::geometric_to_limit(0.6, 0.5)})
        for (std::size_t m = 1; m <= 4; ++m) {
            const auto g = build_graph(seq, m, 2, 0.25);
            const auto pn = assemble_neumann(g);
            const auto pd = dirichlet_pencil(pn, g);
            const auto grid = log_grid(1.0, 1e5, 50);
            const auto a = counting_function(pn, pd, grid, Backend::Dense);
            const auto b = counting_function(pn, pd, grid, Backend::Inertia);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                EXPECT_EQ(a[i].n_neumann, b[i].n_neumann);
                EXPECT_EQ(a[i].n_dirichlet, b[i].n_dirichlet);
                EXPECT_LE(a[i].n_dirichlet, a[i].n_neumann);
                EXPECT_LE(a[i].n_neumann, a[i].n_dirichlet + 3);
                if (i) EXPECT_GE(a[i].n_neumann, a[i - 1].n_neumann);
            }
        }
}

TEST(Fit, RecoversSyntheticExponent) {
    const auto s = synthetic(0.6131, 1e3, 1e8, 200);
    WindowPolicy pol;
    const auto f = fit_exponent(s, pol, 1e9, 0.6131, 0.6131);
    EXPECT_NEAR(f.slope, 0.6131, 0.01);
    EXPECT_TRUE(f.passed());
    EXPECT_EQ(f.n_points, 200u);
}

TEST(Fit, WindowDropsSmallCountsAndHighX) {
    const auto s = synthetic(0.5, 1.0, 1e6, 61);
    WindowPolicy pol;
    const auto idx = fit_window(s, pol, 1e4);
    for (auto i : idx) {
        EXPECT_GE(s[i].n_neumann, 10u);
        EXPECT_LE(s[i].x, 1e4);
    }
    pol.min_points = 1000;
    EXPECT_THROW((void)fit_exponent(s, pol, 1e4, 0.5, 0.5), InsufficientDataError);
}

TEST(Fit, BandDeviation) {
    FitResult f;
    f.predicted_lower = 0.6;
    f.predicted_upper = 0.65;
    f.slope = 0.62;
    EXPECT_EQ(f.deviation(), 0.0);
    f.slope = 0.5;
    EXPECT_NEAR(f.deviation(), 0.1, 1e-15);
    EXPECT_FALSE(f.passed());
}

TEST(Fit, StableUnderOneStepWindowShift) {
    const auto g = build_graph(half(), 5, 2, 0.25);
    const auto pn = assemble_neumann(g);
    const auto grid = auto_grid(pn, 0.2);
    const auto samples = counting_function(pn, std::nullopt, grid, Backend::Inertia);
    WindowPolicy pol;
    const double x_cut = reliability_cutoff(pn, pol.eta);
    auto idx = fit_window(samples, pol, x_cut);
    const auto base = fit_samples(samples, idx, pol, 0.6131, 0.6131);
    const std::vector<std::vector<std::size_t>> shifted{
        {idx.begin() + 1, idx.end()}, {idx.begin(), idx.end() - 1}};
    for (const auto& w : shifted) {
        const auto f = fit_samples(samples, w, pol, 0.6131, 0.6131);
        EXPECT_LT(std::abs(f.slope - base.slope), base.stderr_slope);
    }
}

TEST(Weyl, ExactPowerHasUnitRatio) {
    std::vector<CountingSample> s;
    for (double x : log_grid(1.0, 1e4, 20)) {
        CountingSample c;
        c.x = x;
        c.n_neumann = 1;
        s.push_back(c);
    }
    const auto w = weyl_ratio(s, 0.0001);
    EXPECT_LE(w.c1, w.c2);
    const auto e = weyl_ratio(synthetic(0.5, 1e4, 1e8, 30), 1.0);
    for (const auto& p : e.points) EXPECT_NEAR(p.ratio, 1.0, 0.01);
    EXPECT_GT(e.c1, 0.99);
    EXPECT_LE(e.c2, 1.0);
}

TEST(Bracketing, ConstantHalfLevelThree) {
    const auto g = build_graph(half(), 3, 2, 0.25);
    const auto rep = bracketing_check(g, 1, log_grid(1.0, 1e5, 30));
    EXPECT_TRUE(rep.passed()) << rep.violations.size() << " violations";
    EXPECT_EQ(rep.neumann_components, 6u);
    EXPECT_EQ(rep.dirichlet_components, 6u);
    for (const auto& s : rep.samples) {
        EXPECT_LE(*s.lower_sum, s.n_dirichlet);
        EXPECT_LE(s.n_neumann, *s.upper_sum);
    }
    EXPECT_THROW((void)bracketing_check(g, 3, {1.0}), LevelError);
}

TEST(Bracketing, BelowLowestBlockEigenvalueLowerSumIsZero) {
    const auto g = build_graph(half(), 3, 2, 0.25);
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& p : assemble_decoupled(g, 2, SplitKind::DirichletSplit))
        lowest = std::min(lowest, eig_dense_values(p).eigenvalues.front());
    const auto rep = bracketing_check(g, 2, {0.5 * lowest});
    EXPECT_EQ(*rep.samples[0].lower_sum, 0u);
}

TEST(Bracketing, LevelZeroIsTrivial) {
    const auto g = build_graph(half(), 2, 1, 0.25);
    const auto rep = bracketing_check(g, 0, log_grid(1.0, 1e4, 20));
    EXPECT_TRUE(rep.passed());
    for (const auto& s : rep.samples) {
        EXPECT_EQ(*s.upper_sum, s.n_neumann);
        EXPECT_EQ(*s.lower_sum, s.n_dirichlet);
    }
}

TEST(OneDim, ReferenceExamples) {
    constexpr double pi = std::numbers::pi;
    const auto rep = one_dim_reference(200, {pi * pi * (1 + 1e-9)});
    ASSERT_EQ(rep.samples.size(), 1u);
    EXPECT_EQ(rep.samples[0].n_neumann, 2u);
    EXPECT_EQ(rep.k_max, 20u);
    ASSERT_GE(rep.eigenvalues.size(), 5u);
    EXPECT_NEAR(rep.eigenvalues[4], 25 * pi * pi, 0.01 * 25 * pi * pi);
    EXPECT_TRUE(rep.eigen_ok());
}

TEST(OneDim, CountingBoundOnFixedGrid) {
    constexpr double pi = std::numbers::pi;
    const auto rep = one_dim_reference(200, log_grid_per_decade(pi * pi, 400 * pi * pi, 60));
    EXPECT_TRUE(rep.bound_ok()) << rep.bound_violations.size();
}

TEST(SelfSimilarity, DefectIsRoundoff) {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> nd;
    const auto g = build_graph(half(), 3, 2, 0.25);
    const auto coarse = build_graph(half(), 2, 1, 0.25);
    for (int t = 0; t < 10; ++t) {
        Vector u(Eigen::Index(g.vertex_count()));
        for (auto& x : u) x = nd(rng);
        EXPECT_LE(self_similarity_defect(g, coarse, u), 1e-12 * fractal_form(g, u));
    }
}
