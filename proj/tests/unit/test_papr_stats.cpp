#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "latshape/papr_stats.hpp"

using namespace latshape;

namespace {

// Averaged CCDF at threshold t (linear), computed directly from the samples.
double direct_ccdf(const std::vector<std::vector<cplx>>& per_antenna, double t) {
    double p = 0.0;
    for (const auto& x : per_antenna) {
        const auto v = papr_of(x);
        std::size_t above = 0;
        for (double y : v) above += y > t ? 1 : 0;
        p += static_cast<double>(above) / static_cast<double>(v.size());
    }
    return p / static_cast<double>(per_antenna.size());
}

PaprAccumulator accumulate(const std::vector<std::vector<cplx>>& per_antenna) {
    PaprAccumulator acc(per_antenna.size());
    for (std::size_t a = 0; a < per_antenna.size(); ++a)
        for (const auto& x : per_antenna[a]) acc.add(a, x);
    return acc;
}

}  // namespace

TEST(PaprOf, ConstantModulusIsZeroDb) {
    std::vector<cplx> x;
    for (int k = 0; k < 64; ++k) x.push_back(std::polar(2.5, 0.1 * k));
    for (double v : papr_of(x)) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(PaprOf, SpikeMatchesHandFormula) {
    const std::size_t n = 100;
    const double spike = 7.0;
    std::vector<cplx> x(n, cplx{0.0, 0.0});
    for (std::size_t k = 1; k < 50; ++k) x[k] = {0.0, 1.0};
    x[0] = spike;
    const double total = spike * spike + 49.0;
    const auto v = papr_of(x);
    EXPECT_NEAR(v[0], static_cast<double>(n) * spike * spike / total, 1e-12);
    EXPECT_NEAR(v[1], static_cast<double>(n) / total, 1e-12);
    EXPECT_EQ(v[60], 0.0);
}

TEST(PaprOf, DegenerateInput) {
    EXPECT_THROW(papr_of({}), Error);
    try {
        papr_of(std::vector<cplx>(5, cplx{0.0, 0.0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::degenerate);
    }
}

TEST(PaprOf, ScaleInvariant) {
    std::mt19937_64 rng(3);
    std::vector<cplx> x;
    for (int k = 0; k < 1000; ++k) x.push_back(complex_gaussian(rng));
    const auto v = papr_of(x);
    for (cplx c : {cplx{3.0, 0.0}, cplx{-0.01, 2.0}, cplx{1e6, -1e6}}) {
        std::vector<cplx> y;
        for (const auto& z : x) y.push_back(c * z);
        const auto w = papr_of(y);
        for (std::size_t k = 0; k < v.size(); ++k) EXPECT_NEAR(w[k], v[k], 1e-12 * std::max(1.0, v[k]));
    }
}

TEST(PaprOf, UniformSquarePeakApproachesThree) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<cplx> x(1000000);
    for (auto& z : x) z = {u(rng), u(rng)};
    const auto v = papr_of(x);
    double mx = 0.0, mean = 0.0;
    for (double y : v) {
        mx = std::max(mx, y);
        mean += y;
    }
    EXPECT_GE(mx, 2.9);
    EXPECT_LE(mx, 3.0 + 1e-2);
    EXPECT_NEAR(mean / static_cast<double>(v.size()), 1.0, 1e-9);
}

TEST(Ccdf, AllZeroDbInput) {
    PaprAccumulator acc(2);
    for (int k = 0; k < 2000; ++k) {
        acc.add(0, std::polar(1.0, 0.3 * k));
        acc.add(1, std::polar(4.0, -0.7 * k));
    }
    const auto c = acc.ccdf();
    EXPECT_EQ(c.samples, 2000u);
    ASSERT_EQ(c.thresholds_db.size(), 101u);
    for (std::size_t k = 1; k < c.thresholds_db.size(); ++k) EXPECT_EQ(c.probabilities[k], 0.0);
    EXPECT_NEAR(acc.max_papr(), 1.0, 1e-12);
}

TEST(Ccdf, MatchesDirectCountAndIsMonotone) {
    std::mt19937_64 rng(5);
    std::vector<std::vector<cplx>> x(3);
    for (std::size_t a = 0; a < 3; ++a)
        for (int k = 0; k < 5000; ++k) x[a].push_back(complex_gaussian(rng, 1.0 + static_cast<double>(a)));
    const auto acc = accumulate(x);
    const auto c = acc.ccdf();
    for (std::size_t k = 0; k < c.thresholds_db.size(); ++k) {
        EXPECT_NEAR(c.probabilities[k], direct_ccdf(x, from_db(c.thresholds_db[k])), 1e-12);
        EXPECT_GE(c.probabilities[k], 0.0);
        EXPECT_LE(c.probabilities[k], 1.0);
        if (k > 0) {
            EXPECT_LE(c.probabilities[k], c.probabilities[k - 1]);
        }
    }
    // Rayleigh power: P{|x|^2/E > t} = exp(-t)
    EXPECT_NEAR(c.probabilities[30], std::exp(-from_db(3.0)), 0.01);
}

TEST(Ccdf, CrossingIsSmallestThresholdAtOrBelowLevel) {
    std::mt19937_64 rng(9);
    std::vector<std::vector<cplx>> x(2);
    for (auto& a : x)
        for (int k = 0; k < 4000; ++k) a.push_back(complex_gaussian(rng));
    const auto acc = accumulate(x);
    for (double level : {0.5, 0.1, 1e-2, 1e-3}) {
        const double t = from_db(acc.crossing_db(level));
        EXPECT_LE(direct_ccdf(x, t), level + 1e-15);
        EXPECT_GT(direct_ccdf(x, t * (1.0 - 1e-9)), level);
    }
}

TEST(Ccdf, MergeEqualsSingleAccumulator) {
    std::mt19937_64 rng(13);
    std::vector<std::vector<cplx>> x(2);
    for (auto& a : x)
        for (int k = 0; k < 3000; ++k) a.push_back(complex_gaussian(rng));
    PaprAccumulator left(2), right(2);
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t k = 0; k < x[a].size(); ++k) (k < 1000 ? left : right).add(a, x[a][k]);
    left.merge(right);
    const auto whole = accumulate(x).ccdf();
    EXPECT_EQ(left.ccdf().probabilities, whole.probabilities);
    PaprAccumulator wrong(3);
    EXPECT_THROW(wrong.merge(right), Error);
}

TEST(PaprExperiment, DeterministicAcrossWorkerCounts) {
    const auto shaped = build_layered(golden_code(), 8, ShapingMode::hnf, {}, 2000);
    const auto plain = build_layered(golden_code(), 8, ShapingMode::none, {}, 2000);
    const auto one = papr_experiment(shaped, &plain, 40000, 21, 1);
    const auto three = papr_experiment(shaped, &plain, 40000, 21, 3);
    EXPECT_EQ(one.shaped.samples(), 20000u);  // per antenna
    EXPECT_EQ(one.shaped.ccdf().probabilities, three.shaped.ccdf().probabilities);
    EXPECT_EQ(one.unshaped.ccdf().probabilities, three.unshaped.ccdf().probabilities);
    const auto other = papr_experiment(shaped, &plain, 40000, 22, 1);
    EXPECT_NE(one.shaped.ccdf().probabilities, other.shaped.ccdf().probabilities);
}

TEST(PaprExperiment, ShapedDominatesUnshapedAboveFiveDb) {
    const auto plain = build_layered(golden_code(), 8, ShapingMode::none);
    for (ShapingMode mode : {ShapingMode::hnf, ShapingMode::plus}) {
        const auto shaped = build_layered(golden_code(), 8, mode);
        const auto run = papr_experiment(shaped, &plain, 1000000, 1, 1);
        const auto s = run.shaped.ccdf();
        const auto u = run.unshaped.ccdf();
        for (std::size_t k = 0; k < s.thresholds_db.size(); ++k)
            if (s.thresholds_db[k] >= 5.0 - 1e-9) {
                EXPECT_LE(s.probabilities[k], u.probabilities[k]) << mode_name(mode) << " at " << s.thresholds_db[k];
            }
        EXPECT_LT(run.shaped.crossing_db(1e-3), run.unshaped.crossing_db(1e-3));
    }
}

TEST(PowerIncrease, IdentityCodeCostsNothing) {
    // G = I: the HNF region is already the cube, so shaping changes nothing.
    const auto r = power_increase(identity_code(2), 4, ShapingMode::hnf, 5000, 1);
    EXPECT_NEAR(r.increase_percent, 0.0, 1e-9);
    EXPECT_NEAR(r.avg_power_unshaped, 2.0 * (16.0 - 1.0) / 12.0, 0.05);
    const auto j = to_json(r);
    EXPECT_EQ(j["schema"], "latshape/power@1");
    EXPECT_EQ(j["trials"], 5000);
    EXPECT_THROW(power_increase(identity_code(2), 4, ShapingMode::hnf, 0, 1), Error);
}

TEST(PowerIncrease, DeterministicAcrossWorkerCounts) {
    const auto a = power_increase(golden_code(), 8, ShapingMode::plus, 10000, 4, {}, 1);
    const auto b = power_increase(golden_code(), 8, ShapingMode::plus, 10000, 4, {}, 4);
    EXPECT_EQ(a.avg_power_shaped, b.avg_power_shaped);
    EXPECT_EQ(a.avg_power_unshaped, b.avg_power_unshaped);
}
