#include "selektor/errors.hpp"
#include "selektor/normal.hpp"
#include "selektor/saturated.hpp"
#include "stats_util.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace selektor;

namespace {

SelectionRegion example4_region() {
    Eigen::MatrixXd A1(2, 2), A2(2, 2);
    A1 << -1, 1, -1, -1;
    A2 << 1, -1, 1, 1;
    return SelectionRegion(std::vector<Polytope>{Polytope(A1, Eigen::Vector2d::Zero()),
                                                 Polytope(A2, Eigen::Vector2d::Zero())});
}

RegressionProblem example4_problem() {
    RegressionProblem p;
    p.X = Eigen::MatrixXd::Identity(2, 2);
    p.y = Eigen::Vector2d(2.9, 2.5);
    p.model = {0};
    p.target = 0;
    p.sigma = 1.0;
    return p;
}

// integral of h(z) phi(z - mu) over [a, b]
double gauss_integral(const std::function<double(double)>& h, double mu, double a, double b) {
    auto f = [&](double z) { return h(z) * norm_pdf(z - mu); };
    if (std::isinf(b)) {
        boost::math::quadrature::exp_sinh<double> es;
        return es.integrate([&](double t) { return f(a + t); }, 0.0, kInf, 1e-14);
    }
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

} // namespace

TEST(Saturated, Example4PValueAgainstClosedForm) {
    const TestOutcome t = saturated_z_test(example4_problem(), example4_region(), 0.05);
    // |Y1| > 2.5 given Y2 = 2.5; symmetric support so p = sf(2.9) / sf(2.5)
    EXPECT_NEAR(t.p_value, norm_sf(2.9) / norm_sf(2.5), 1e-12);
    EXPECT_NEAR(t.p_value, 0.300, 0.002);
    EXPECT_EQ(truncation_set(example4_problem().y, Eigen::Vector2d(1, 0), example4_region()).to_string(),
              "(-inf, -2.5) U (2.5, inf)");
    EXPECT_FALSE(t.reject);
}

TEST(Saturated, NoSelectionIsClassical) {
    RegressionProblem p;
    p.X.resize(4, 2);
    p.X << 1, 0.3, 1, -0.2, 1, 0.8, 1, 1.1;
    p.y = Eigen::Vector4d(0.4, -0.1, 1.3, 2.0);
    p.model = {0, 1};
    p.target = 1;
    p.sigma = 0.7;
    const TestOutcome t = saturated_z_test(p, SelectionRegion::whole_space(4), 0.05);
    const Eigen::VectorXd eta = eta_vector(p.X, p.model, p.target);
    const double z = eta.dot(p.y) / (0.7 * eta.norm());
    EXPECT_NEAR(t.p_value, 2.0 * norm_sf(std::abs(z)), 1e-12);
    EXPECT_NEAR(t.ci_lo, eta.dot(p.y) - 1.959963984540054 * 0.7 * eta.norm(), 1e-6);
    EXPECT_NEAR(t.ci_hi, eta.dot(p.y) + 1.959963984540054 * 0.7 * eta.norm(), 1e-6);
}

TEST(Saturated, TruncatedCdfAgainstQuadrature) {
    const IntervalUnion s{{-kInf, -1.0}, {0.5, 2.0}, {3.0, kInf}};
    const double mu = 0.8, sigma = 1.3;
    auto mass = [&](double a, double b) {
        return gauss_integral([](double) { return 1.0; }, mu / sigma, a / sigma, b / sigma);
    };
    double total = 0.0;
    for (const auto& iv : s.intervals()) total += mass(std::isinf(iv.lo) ? -40.0 : iv.lo, iv.hi);
    for (double z : {-2.0, 0.7, 1.9, 3.5}) {
        double below = 0.0;
        for (const auto& iv : s.intervals())
            if (iv.lo < z) below += mass(std::isinf(iv.lo) ? -40.0 : iv.lo, std::min(iv.hi, z));
        EXPECT_NEAR(trunc_gauss_cdf(z, mu, sigma, s), below / total, 1e-10);
        EXPECT_NEAR(trunc_gauss_sf(z, mu, sigma, s), 1.0 - below / total, 1e-10);
        EXPECT_NEAR(trunc_gauss_cdf(trunc_gauss_quantile(below / total, mu, sigma, s), mu, sigma, s), below / total,
                    1e-9);
    }
}

TEST(Saturated, FarTailCdfStaysFinite) {
    const IntervalUnion s{{40.0, kInf}};
    const double c = trunc_gauss_cdf(40.5, 0.0, 1.0, s);
    // exponential approximation of the tail: P(Z <= 40.5 | Z > 40) ~ 1 - exp(-40 * 0.5)
    EXPECT_NEAR(c, 1.0, 1e-8);
    EXPECT_TRUE(std::isfinite(trunc_gauss_cdf(40.01, 0.0, 1.0, s)));
    EXPECT_NEAR(trunc_gauss_cdf(40.01, 0.0, 1.0, s), 1.0 - std::exp(-40.0 * 0.01 - 0.5 * 1e-4), 1e-3);
}

TEST(Saturated, UmpuCutoffsSolveMomentEquations) {
    const IntervalUnion support{{1.0, kInf}};
    for (double theta : {-1.0, 0.0, 1.5, 4.0}) {
        const UmpuCutoffs c = trunc_gauss_umpu_cutoffs(theta, 1.0, support, 0.05);
        const double mass = gauss_integral([](double) { return 1.0; }, theta, 1.0, kInf);
        const double mean = gauss_integral([](double z) { return z; }, theta, 1.0, kInf) / mass;
        const double lvl = (gauss_integral([](double) { return 1.0; }, theta, 1.0, c.lower.c) +
                            gauss_integral([](double) { return 1.0; }, theta, c.upper.c, kInf)) /
                           mass;
        const double m1 = (gauss_integral([](double z) { return z; }, theta, 1.0, c.lower.c) +
                           gauss_integral([](double z) { return z; }, theta, c.upper.c, kInf)) /
                          mass;
        EXPECT_LT(std::abs(lvl - 0.05), 1e-6) << theta;
        EXPECT_LT(std::abs(m1 - 0.05 * mean), 1e-6) << theta;
    }
}

TEST(Saturated, PivotUniformUnderHalfspaceSelection) {
    // select when y1 + y2 - y3 >= 1, test eta = e1 at mu = 0
    Eigen::MatrixXd A(1, 4);
    A << -1, -1, 1, 0;
    const SelectionRegion R(Polytope(A, Eigen::VectorXd::Constant(1, -1.0)));
    const Eigen::Vector4d eta(1, 0, 0, 0);
    Rng rng = make_rng(17, 0);
    std::normal_distribution<double> g;
    std::vector<double> w;
    while (w.size() < 3000) {
        const Eigen::Vector4d y(g(rng), g(rng), g(rng), g(rng));
        if (!R.contains(y)) continue;
        const IntervalUnion s = truncation_set(y, eta, R);
        w.push_back(trunc_gauss_cdf(y(0), 0.0, 1.0, s));
    }
    EXPECT_GT(selektor::testing::ks_uniform_pvalue(w), 0.01);
}

TEST(Saturated, IntervalEndpointsHaveLevelAlpha) {
    const IntervalUnion support{{1.0, kInf}};
    const auto [lo, hi] = trunc_gauss_interval(1.6, 1.0, support, 0.1);
    EXPECT_NEAR(trunc_gauss_sf(1.6, lo, 1.0, support), 0.05, 1e-7);
    EXPECT_NEAR(trunc_gauss_cdf(1.6, hi, 1.0, support), 0.05, 1e-7);
    // far from the truncation the interval is the classical one
    const auto [lo2, hi2] = trunc_gauss_interval(12.0, 1.0, support, 0.05);
    EXPECT_NEAR(lo2, 12.0 - 1.959963984540054, 1e-6);
    EXPECT_NEAR(hi2, 12.0 + 1.959963984540054, 1e-6);
    const auto [ulo, uhi] = trunc_gauss_interval(1.6, 1.0, support, 0.1, IntervalKind::umpu);
    EXPECT_LT(ulo, 1.6);
    EXPECT_GT(uhi, 1.6);
}

TEST(Saturated, IntervalCoverage) {
    const IntervalUnion support{{1.0, kInf}};
    Rng rng = make_rng(23, 0);
    const double mu = 0.5;
    int cover = 0;
    const int reps = 1500;
    for (int r = 0; r < reps; ++r) {
        const double z = mu + sample_truncated_standard_normal(1.0 - mu, kInf, rng);
        const auto [lo, hi] = trunc_gauss_interval(z, 1.0, support, 0.1);
        cover += lo <= mu && mu <= hi;
    }
    EXPECT_NEAR(cover / double(reps), 0.9, 3.5 * std::sqrt(0.09 / reps));
}

TEST(Saturated, TTestHasNothingToTest) {
    RegressionProblem p = example4_problem();
    p.sigma.reset();
    EXPECT_THROW(saturated_t_test(p, example4_region()), PreconditionError);
}

TEST(Saturated, ZTestNeedsSigmaAndMembership) {
    RegressionProblem p = example4_problem();
    p.sigma.reset();
    EXPECT_THROW(saturated_z_test(p, example4_region(), 0.05), PreconditionError);
    p = example4_problem();
    p.y = Eigen::Vector2d(0.1, 2.0);
    EXPECT_THROW(saturated_z_test(p, example4_region(), 0.05), PreconditionError);
}

TEST(Saturated, LeftoverInformationIsConditionalVariance) {
    for (double mu : {-3.0, 0.0, 2.0, 3.0, 5.0, 9.0}) {
        const double mass = gauss_integral([](double) { return 1.0; }, mu, 3.0, kInf);
        const double m1 = gauss_integral([](double z) { return z; }, mu, 3.0, kInf) / mass;
        const double m2 = gauss_integral([](double z) { return z * z; }, mu, 3.0, kInf) / mass;
        EXPECT_NEAR(leftover_information(mu, 3.0), m2 - m1 * m1, 1e-8) << mu;
    }
    EXPECT_LT(leftover_information(-7.0, 3.0), 0.01);
    EXPECT_GT(leftover_information(13.0, 3.0), 0.999);
}
