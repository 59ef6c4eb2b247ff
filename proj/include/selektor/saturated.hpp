#pragma once

#include "selektor/problem.hpp"
#include "selektor/region.hpp"
#include "selektor/umpu.hpp"

#include <utility>

namespace selektor {

// { eta'(y + t eta) : y + t eta in region }, in the eta'y coordinate.
IntervalUnion truncation_set(const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                             const SelectionRegion& region);

// P(Z <= z | Z in support) and P(Z > z | Z in support) for Z ~ N(mu, sigma^2).
double trunc_gauss_cdf(double z, double mu, double sigma, const IntervalUnion& support);
double trunc_gauss_sf(double z, double mu, double sigma, const IntervalUnion& support);
double trunc_gauss_quantile(double q, double mu, double sigma, const IntervalUnion& support);

// Two-sided UMPU cutoffs for the truncated normal family (no randomization
// needed, gammas are zero). Residuals are relative to sigma.
UmpuCutoffs trunc_gauss_umpu_cutoffs(double mu, double sigma, const IntervalUnion& support, double alpha);

struct SaturatedOptions {
    IntervalKind kind = IntervalKind::equal_tailed;
    bool with_interval = true;
};

// Exact selective z-test of eta'mu = problem.null_value given the component
// of y orthogonal to eta. Requires known sigma.
TestOutcome saturated_z_test(const RegressionProblem& problem, const SelectionRegion& region, double alpha,
                             const SaturatedOptions& options = {});

std::pair<double, double> saturated_z_interval(const RegressionProblem& problem, const SelectionRegion& region,
                                               double alpha, IntervalKind kind = IntervalKind::equal_tailed);

// Same machinery for a bare one-dimensional observation z ~ N(mu, sigma^2) truncated to support.
std::pair<double, double> trunc_gauss_interval(double z, double sigma, const IntervalUnion& support, double alpha,
                                               IntervalKind kind = IntervalKind::equal_tailed);

// Saturated-model t-test: conditioning on |y| as well leaves a point mass, so
// there is nothing to test. Always throws.
[[noreturn]] void saturated_t_test(const RegressionProblem& problem, const SelectionRegion& region);

// Fisher information in the law of Y ~ N(mu, 1) given Y > threshold.
double leftover_information(double mu, double threshold);

} // namespace selektor
