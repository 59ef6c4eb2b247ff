#pragma once

#include "selektor/problem.hpp"
#include "selektor/region.hpp"
#include "selektor/samplers.hpp"
#include "selektor/umpu.hpp"

#include <optional>

namespace selektor {

struct SelectedOptions {
    ChainConfig chain;
    // kind of the reported decision and interval; the equal-tailed p-value is always reported
    IntervalKind kind = IntervalKind::equal_tailed;
    bool with_interval = false;
    // randomization variable of the UMPU rule; drawn from the chain seed when absent
    std::optional<double> u;
    InversionOptions inversion;
};

// Selective z-test of beta_j = problem.null_value in the selected model with
// known sigma. Conditions on X_{M\j}'y and the selection event; the law of
// eta'y is sampled by hit-and-run on the slice.
TestOutcome selected_z_test(const RegressionProblem& problem, const SelectionRegion& region, double alpha,
                            const SelectedOptions& options = {});

// Selective t-test of beta_j = problem.null_value with unknown sigma. Also
// conditions on |y - b X_j|; the direction of the residual is sampled
// uniformly in the unit ball and projected to the sphere with importance
// weights. Requires n - |M| >= 2.
TestOutcome selected_t_test(const RegressionProblem& problem, const SelectionRegion& region, double alpha,
                            const SelectedOptions& options = {});

} // namespace selektor
