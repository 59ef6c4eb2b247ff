#pragma once

#include "selektor/umpu.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace selektor {

// Arm 0 is the placebo, arms 1..m are treatments. counts[j] events out of sizes[j].
struct TrialData {
    std::vector<int> counts;
    std::vector<int> sizes;
    int k = 1;

    int treatments() const noexcept { return static_cast<int>(counts.size()) - 1; }
    void validate() const;
};

// Treatment arms whose event rate is at most the k-th smallest treatment
// rate; ties at the k-th value are all selected. Rates are compared exactly
// by integer cross-multiplication.
std::vector<int> clinical_select(const TrialData& data);

struct FisherOptions {
    IntervalKind kind = IntervalKind::equal_tailed;
    bool with_interval = true;
    std::optional<double> u;
    std::uint64_t seed = 0;
};

// Conditional law of the arm-j count given the placebo-plus-arm-j total, the
// other arms, and the event that arm j is selected:
// P(Y_j = y) proportional to C(n_0, s - y) C(n_j, y) exp(-beta y).
struct ConditionalSupport {
    std::vector<int> values;
    std::vector<double> log_weights;  // at beta = 0
};

ConditionalSupport fisher_conditional_support(const TrialData& data, int arm);

// Selective Fisher exact test of beta_j = beta0, where larger beta means fewer
// events in arm j relative to placebo. p_lower is the one-sided p for a
// beneficial treatment (few events); the interval is for beta_j.
TestOutcome selective_fisher_test(const TrialData& data, int arm, double beta0, double alpha,
                                  const FisherOptions& options = {});

double log_binomial(int n, int k);

// Plug-in Poisson likelihood-ratio scan statistic for a window holding
// `inside` of `total` points over a length `length` subinterval of [0,1].
using ScanStatistic = std::function<double(int inside, int total, double length)>;

double poisson_lr_statistic(int inside, int total, double length);

struct ScanWindow {
    int i = 0;  // index of the left endpoint in the sorted points
    int j = 0;  // index of the right endpoint
    double a = 0.0;
    double b = 0.0;
    double statistic = 0.0;
    int count() const noexcept { return j - i + 1; }
};

// Window [Y_i, Y_j] maximizing the statistic over all pairs i < j; ties go to
// the smaller i, then the larger j. Points must be sorted.
ScanWindow scan_select(const std::vector<double>& points, const ScanStatistic& statistic = poisson_lr_statistic);

// Monte Carlo test of no elevation inside the selected window, conditional on
// the number of points and on the window being selected. n_mc proposals.
TestOutcome scan_test(const std::vector<double>& points, const ScanWindow& window, double alpha, int n_mc,
                      std::uint64_t seed, const ScanStatistic& statistic = poisson_lr_statistic);

} // namespace selektor
