#include "selektor/errors.hpp"
#include "selektor/rng.hpp"
#include "selektor/tilted.hpp"
#include "selektor/umpu.hpp"
#include "stats_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace selektor;

namespace {

std::vector<double> gaussian_draws(double mean, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(mean, 1.0);
    std::vector<double> z(n);
    for (double& v : z) v = g(rng);
    return z;
}

double reject_prob(double z, const UmpuCutoffs& c) {
    if (z < c.lower.c || z > c.upper.c) return 1.0;
    double p = 0.0;
    if (z == c.lower.c) p += c.lower.gamma;
    if (z == c.upper.c) p += c.upper.gamma;
    return std::min(p, 1.0);
}

TiltedSampleSet binomial_family(int n) {
    std::vector<double> z, lw;
    for (int k = 0; k <= n; ++k) {
        z.push_back(k);
        lw.push_back(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
    }
    return TiltedSampleSet::from_log_weights(z, lw, 0.0);
}

} // namespace

TEST(Tilted, TiltingGaussianShiftsMean) {
    const auto s = TiltedSampleSet::unit_weights(gaussian_draws(0.0, 100000, 1), 0.0);
    for (double theta : {-0.5, 0.0, 0.5}) {
        EXPECT_NEAR(tilted_expectation(s, [](double z) { return z; }, theta), theta, 0.03);
    }
    EXPECT_NEAR(effective_sample_size(s, 0.0), 100000.0, 1e-6);
    EXPECT_LT(effective_sample_size(s, 2.0), 10000.0);
}

TEST(Tilted, RejectsBadInput) {
    EXPECT_THROW(TiltedSampleSet({1.0, 2.0}, {1.0}, 0.0), PreconditionError);
    EXPECT_THROW(TiltedSampleSet({1.0, 2.0}, {1.0, -1.0}, 0.0), PreconditionError);
}

TEST(Tilted, PoolingTwoReferenceSets) {
    const auto a = TiltedSampleSet::unit_weights(gaussian_draws(-1.0, 20000, 2), -1.0);
    const auto b = TiltedSampleSet::unit_weights(gaussian_draws(1.0, 20000, 3), 1.0);
    const TiltedSampleSet pool = pool_tilted({a, b});
    EXPECT_EQ(pool.size(), 40000u);
    EXPECT_NEAR(tilted_expectation(pool, [](double z) { return z; }, 0.0), 0.0, 0.03);
    EXPECT_NEAR(tilted_expectation(pool, [](double z) { return z * z; }, 0.0), 1.0, 0.04);
    EXPECT_NEAR(tilted_expectation(pool, [](double z) { return z; }, 1.5), 1.5, 0.05);
    EXPECT_GT(effective_sample_size(pool, 0.0), 20000.0);
}

TEST(Umpu, ExactBinomialCutoffsSolveMomentEquations) {
    const EmpiricalFamily fam(binomial_family(10), true);
    for (double theta0 : {0.0, 0.7, -1.2}) {
        for (double alpha : {0.05, 0.2}) {
            const UmpuCutoffs c = solve_umpu_cutoffs(fam, theta0, alpha);
            const auto p = fam.probabilities(theta0);
            double level = 0.0, m1 = 0.0, mean = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double z = fam.atoms()[i];
                level += p[i] * reject_prob(z, c);
                m1 += p[i] * z * reject_prob(z, c);
                mean += p[i] * z;
            }
            EXPECT_NEAR(level, alpha, 1e-9) << theta0;
            EXPECT_NEAR(m1, alpha * mean, 1e-9) << theta0;
            EXPECT_GE(c.lower.gamma, 0.0);
            EXPECT_LE(c.upper.gamma, 1.0);
        }
    }
}

TEST(Umpu, SideAgreesWithDecision) {
    const auto s = TiltedSampleSet::unit_weights(gaussian_draws(0.0, 5000, 4), 0.0);
    const UmpuCutoffs c = solve_umpu_cutoffs(s, 0.0, 0.05);
    EXPECT_NEAR(c.lower.c, -1.96, 0.1);
    EXPECT_NEAR(c.upper.c, 1.96, 0.1);
    for (double z : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
        const int side = umpu_side(z, 0.5, c);
        EXPECT_EQ(side != 0, umpu_decision(z, 0.5, c));
    }
    EXPECT_EQ(umpu_side(3.0, 0.5, c), -1);
    EXPECT_EQ(umpu_side(-3.0, 0.5, c), 1);
}

TEST(Umpu, MonteCarloLevel) {
    const int reps = 2000;
    int et = 0, um = 0;
    Rng rng = make_rng(9, 0);
    std::normal_distribution<double> g;
    for (int r = 0; r < reps; ++r) {
        const auto s = TiltedSampleSet::unit_weights(gaussian_draws(0.0, 500, derive_seed(10, r)), 0.0);
        const double z = g(rng);
        et += equal_tailed_test(z, s, 0.0, 0.05).reject;
        um += umpu_mc_test(z, uniform01(rng), s, 0.0, 0.05).reject;
    }
    const double se = std::sqrt(0.05 * 0.95 / reps);
    EXPECT_NEAR(et / double(reps), 0.05, 3.5 * se);
    EXPECT_NEAR(um / double(reps), 0.05, 3.5 * se);
}

TEST(Umpu, OneSidedRankPValue) {
    const auto s = TiltedSampleSet::unit_weights({1.0, 2.0, 3.0, 4.0}, 0.0);
    // one of four draws is >= 3.5: p = (1 + 4 * 0.25) / 5
    EXPECT_NEAR(one_sided_mc_test(3.5, s, 0.0, 0.05).p_value, 0.4, 1e-12);
}

TEST(Umpu, GaussianIntervalsInvertTheTest) {
    NaturalFamily1D fam;
    fam.sample_at = [](double theta, std::uint64_t stream) {
        return TiltedSampleSet::unit_weights(gaussian_draws(theta, 4000, derive_seed(21, stream)), theta);
    };
    InversionOptions opt;
    opt.theta_start = 1.0;
    const IntervalResult et = equal_tailed_confidence_interval(1.0, fam, 0.05, opt);
    EXPECT_NEAR(et.lo, 1.0 - 1.96, 0.12);
    EXPECT_NEAR(et.hi, 1.0 + 1.96, 0.12);
    const IntervalResult um = umpu_confidence_interval(1.0, 0.5, fam, 0.05, opt);
    EXPECT_NEAR(um.lo, 1.0 - 1.96, 0.12);
    EXPECT_NEAR(um.hi, 1.0 + 1.96, 0.12);
}

TEST(Umpu, ExactFamilyIntervalBracketsNull) {
    const EmpiricalFamily fam(binomial_family(20), true);
    const IntervalResult r = confidence_interval(10.0, 0.5, fam, 0.05, IntervalKind::equal_tailed);
    EXPECT_LT(r.lo, 0.0);
    EXPECT_GT(r.hi, 0.0);
    EXPECT_NEAR(r.lo, -r.hi, 1e-4);
}
