#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "latshape/peak_density.hpp"

using namespace latshape;

namespace {

// Composite Simpson rule.
template <class F>
double simpson(F f, double lo, double hi, int n = 20000) {
    const double h = (hi - lo) / n;
    double s = f(lo) + f(hi);
    for (int k = 1; k < n; ++k) s += f(lo + k * h) * (k % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Differential entropy of r e^(i theta) from a histogram of r:
// h(x) = h(r) + E[log r] + log(2 pi).
double histogram_entropy(const std::vector<double>& r, double support, int bins = 2000) {
    std::vector<double> count(static_cast<std::size_t>(bins), 0.0);
    const double w = support / bins;
    double log_r = 0.0;
    for (double v : r) {
        const int k = std::min(bins - 1, static_cast<int>(v / w));
        count[static_cast<std::size_t>(k)] += 1.0;
        log_r += std::log(v);
    }
    const double n = static_cast<double>(r.size());
    double h = 0.0;
    for (double c : count)
        if (c > 0) h -= (c / n) * std::log(c / (n * w));
    return h + log_r / n + std::log(2.0 * std::numbers::pi);
}

}  // namespace

TEST(SolveDensity, RhoTwoIsLinear) {
    for (double P : {0.5, 1.0, 4.0}) {
        const auto d = solve_density(2.0, P);
        EXPECT_EQ(d.a, 1.0 / P);
        EXPECT_EQ(d.b, 0.0);
        EXPECT_EQ(d.regime, DensityRegime::rho_eq_2);
    }
}

TEST(SolveDensity, LargeRhoApproachesRayleigh) {
    const auto d = solve_density(1e6, 1.0);
    EXPECT_NEAR(d.a, 2.0, 1e-5);
    EXPECT_NEAR(d.b, 2.0, 1e-5);
    double sup = 0.0;
    for (int k = 0; k <= 5000; ++k) {
        const double r = 5.0 * k / 5000.0;
        sup = std::max(sup, std::abs(density_pdf(d, r) - 2.0 * r * std::exp(-r * r)));
    }
    EXPECT_LT(sup, 1e-4);
}

TEST(SolveDensity, ResidualsAcrossGrid) {
    for (double rho : {1.5, 2.0, 3.0, 5.0, 10.0, 100.0})
        for (double P : {0.5, 1.0, 4.0}) {
            const auto d = solve_density(rho, P);
            const auto res = residuals(d);
            EXPECT_LE(std::abs(res.normalization), 1e-10) << rho << " " << P;
            EXPECT_LE(std::abs(res.moment), 1e-10) << rho << " " << P;
            if (rho != 2.0) {
                // closed forms: (a/b)(1 - e^(-c/2)) = 1 and 2(a/b)c^-1[1 - (1 + c/2)e^(-c/2)] = 1/rho
                const double ab = d.a / d.b;
                EXPECT_NEAR(ab * (-std::expm1(-d.c / 2.0)), 1.0, 1e-10);
                EXPECT_NEAR(2.0 * ab / d.c * (1.0 - (1.0 + d.c / 2.0) * std::exp(-d.c / 2.0)), 1.0 / rho, 1e-10);
            }
        }
}

TEST(SolveDensity, NumericalNormalizationAndSupport) {
    for (double rho : {1.1, 1.5, 3.0, 5.0, 50.0}) {
        const auto d = solve_density(rho, 1.0);
        const double s = d.support();
        EXPECT_NEAR(simpson([&](double r) { return density_pdf(d, r); }, 0.0, s), 1.0, 1e-8) << rho;
        EXPECT_NEAR(simpson([&](double r) { return r * r * density_pdf(d, r); }, 0.0, s), 1.0, 1e-8) << rho;
        EXPECT_EQ(density_pdf(d, s * (1 + 1e-12)), 0.0);
        EXPECT_EQ(density_pdf(d, -0.1), 0.0);
    }
}

TEST(SolveDensity, RegimeSignRule) {
    for (double rho : {1.01, 1.1, 1.5, 1.99})
        EXPECT_LT(solve_density(rho, 1.0).b, 0.0);
    for (double rho : {2.01, 3.0, 1e3})
        EXPECT_GT(solve_density(rho, 1.0).b, 0.0);
    EXPECT_EQ(solve_density(1.5, 1.0).regime, DensityRegime::rho_lt_2);
    EXPECT_EQ(solve_density(3.0, 1.0).regime, DensityRegime::rho_gt_2);
}

TEST(SolveDensity, PeakConstraintBelowTwo) {
    const auto d = solve_density(1.5, 2.0, DensityConstraint::peak);
    EXPECT_EQ(d.b, 0.0);
    EXPECT_DOUBLE_EQ(d.a, 2.0 / 3.0);
    EXPECT_NEAR(density_mass(d), 1.0, 1e-15);
    EXPECT_NEAR(second_moment(d), 1.5, 1e-14);  // rho P / 2
    const auto above = solve_density(3.0, 2.0, DensityConstraint::peak);
    EXPECT_EQ(above.c, solve_density(3.0, 2.0).c);
}

TEST(SolveDensity, Errors) {
    for (double rho : {1.0, 0.5, -3.0}) {
        try {
            solve_density(rho, 1.0);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::infeasible);
        }
    }
    EXPECT_THROW(solve_density(3.0, 0.0), Error);
    try {
        solve_density(1.0 + 1e-9, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::solver);
    }
}

TEST(InverseRho, SeriesAgreesWithDirectFormAndIsMonotone) {
    for (double c : {-9e-5, -1e-5, 1e-5, 9e-5}) {
        const long double cl = c;
        const long double direct = 2.0L / cl - 1.0L / (-std::expm1(-cl / 2.0L)) + 1.0L;
        EXPECT_NEAR(inverse_rho_of_c(c), static_cast<double>(direct), 1e-12);
    }
    EXPECT_EQ(inverse_rho_of_c(0.0), 0.5);
    double prev = 1.0;
    for (double c = -200.0; c < 200.0; c += 0.37) {
        const double g = inverse_rho_of_c(c);
        EXPECT_LT(g, prev);
        prev = g;
    }
}

TEST(Sampling, SupportAndMoments) {
    std::mt19937_64 rng(1);
    for (double rho : {1.5, 2.0, 3.0, 10.0}) {
        for (auto constraint : {DensityConstraint::papr, DensityConstraint::peak}) {
            const auto d = solve_density(rho, 2.0, constraint);
            const auto r = sample_radii(d, rng, 1000000);
            double m2 = 0.0, mx = 0.0;
            for (double v : r) {
                m2 += v * v;
                mx = std::max(mx, v);
            }
            m2 /= static_cast<double>(r.size());
            EXPECT_LE(mx, d.support());
            const double expect = (rho < 2.0 && constraint == DensityConstraint::peak) ? rho * 2.0 / 2.0 : 2.0;
            EXPECT_NEAR(m2 / expect, 1.0, 0.01) << rho;
            EXPECT_NEAR(m2, second_moment(d), 0.01 * expect);
        }
    }
}

TEST(Sampling, ComplexSymbolsHaveUniformPhase) {
    std::mt19937_64 rng(2);
    const auto d = solve_density(4.0, 1.0);
    const auto x = sample_symbols(d, rng, 200000);
    std::complex<double> mean{0.0, 0.0};
    for (const auto& v : x) mean += v / std::abs(v);
    EXPECT_LT(std::abs(mean) / static_cast<double>(x.size()), 0.01);
}

TEST(Entropy, ClosedFormsAndLimits) {
    const auto two = entropy_and_k(solve_density(2.0, 1.0));
    EXPECT_NEAR(two.k, std::log(2.0 / std::numbers::e), 1e-15);
    EXPECT_NEAR(two.k, -0.3068528194400547, 1e-15);
    EXPECT_NEAR(entropy_and_k(solve_density(1e6, 1.0)).k, 0.0, 1e-4);
    // k written directly in terms of c
    for (double rho : {1.5, 3.0, 5.0}) {
        const auto d = solve_density(rho, 1.0);
        const double k = std::log(rho * (1.0 - std::exp(-d.c / 2.0)) / d.c) + d.c / (2.0 * rho) + std::log(2.0 / std::numbers::e);
        EXPECT_NEAR(entropy_and_k(d).k, k, 1e-12);
    }
}

TEST(Entropy, MonteCarloMatchesClosedForm) {
    std::mt19937_64 rng(3);
    for (double rho : {1.5, 2.0, 5.0}) {
        const auto d = solve_density(rho, 1.0);
        const auto r = sample_radii(d, rng, 1000000);
        EXPECT_NEAR(histogram_entropy(r, d.support()), entropy_and_k(d).h_star, 0.01) << rho;
    }
}

TEST(Curves, BVersusRho) {
    const auto rows = curve_b_vs_rho(default_inverse_rho_grid());
    ASSERT_EQ(rows.size(), 99u);
    for (const auto& r : rows)
        if (std::abs(r.one_over_rho - 0.5) < 1e-12) {
            EXPECT_EQ(r.bT, 0.0);
        }
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_LT(rows[k].bT, rows[k - 1].bT);
    EXPECT_GT(rows.front().bT, 0.0);
    EXPECT_LT(rows.back().bT, 0.0);
    EXPECT_EQ(b_curve_csv({{0.5, 0.0}}), "# schema: latshape/density-b@1\none_over_rho,bT\n0.5,0\n");
    EXPECT_THROW(curve_b_vs_rho({0.3, 1.0}), Error);
}

TEST(Curves, HStarOrdering) {
    const std::vector<double> powers{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    const std::vector<double> rhos{1.1, 2.0, 5.0, std::numeric_limits<double>::infinity()};
    const auto rows = curve_hstar(powers, rhos);
    ASSERT_EQ(rows.size(), 24u);
    for (std::size_t p = 0; p < powers.size(); ++p)
        for (std::size_t i = 1; i < rhos.size(); ++i) EXPECT_LT(rows[(i - 1) * powers.size() + p].h_star, rows[i * powers.size() + p].h_star);
    const std::string csv = hstar_csv(rows);
    EXPECT_NE(csv.find("\nP,h_star,rho\n"), std::string::npos);
    EXPECT_NE(csv.find(",inf\n"), std::string::npos);
}
