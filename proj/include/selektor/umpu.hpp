#pragma once

#include "selektor/rng.hpp"
#include "selektor/tilted.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace selektor {

// Cutoff in the dictionary order on (z, u): (z, u) precedes (c, g) iff
// z < c, or z == c and u < g.
struct RandomizedCutoff {
    double c = 0.0;
    double gamma = 0.0;
};

// Two-sided randomized rule: reject at z == lower.c with probability lower.gamma
// and at z == upper.c with probability upper.gamma.
struct UmpuCutoffs {
    RandomizedCutoff lower;
    RandomizedCutoff upper;
    double k1_residual = 0.0;
    double k2_residual = 0.0;
    double ess = 0.0;
    bool one_sided_degenerate = false;
};

struct Diagnostics {
    double ess = 0.0;
    double k1_residual = 0.0;
    double k2_residual = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    double lag1_autocorrelation = 0.0;
    std::vector<std::string> flags;

    bool has_flag(const std::string& f) const;
    void flag(const std::string& f);
};

struct TestOutcome {
    double p_value = 1.0;  // equal-tailed two-sided p
    double p_lower = 1.0;  // one-sided, small when the observation is low
    double p_upper = 1.0;  // one-sided, small when the observation is high
    bool reject = false;
    double aux_uniform = 0.5;
    double ci_lo = -1e300;
    double ci_hi = 1e300;
    double statistic = 0.0;
    Diagnostics diagnostics;
};

enum class IntervalKind { umpu, equal_tailed };

// Sorted, tie-merged atoms of an empirical family, reusable across theta.
// An exact family is a finite-support law known in full; its tail
// probabilities need no Monte Carlo correction.
class EmpiricalFamily {
public:
    explicit EmpiricalFamily(const TiltedSampleSet& samples, bool exact = false);

    const std::vector<double>& atoms() const noexcept { return z_; }
    std::size_t raw_size() const noexcept { return raw_size_; }
    const TiltedSampleSet& samples() const noexcept { return samples_; }
    bool exact() const noexcept { return exact_; }

    // Normalized atom probabilities under theta.
    std::vector<double> probabilities(double theta) const;
    double ess(double theta) const;

private:
    TiltedSampleSet samples_;
    std::vector<double> z_;
    std::vector<double> log_w_;
    std::size_t raw_size_ = 0;
    bool exact_ = false;
};

// Rank-based one-sided test of H0: theta <= theta0.
// p = (1 + n P_theta0(Z >= z_obs)) / (n + 1); reject iff p <= alpha.
TestOutcome one_sided_mc_test(double z_obs, const TiltedSampleSet& samples, double theta0, double alpha);

// Union of the two one-sided level alpha/2 tests; p = min(1, 2 min(p_lower, p_upper)).
TestOutcome equal_tailed_test(double z_obs, const TiltedSampleSet& samples, double theta0, double alpha);
TestOutcome equal_tailed_test(double z_obs, const EmpiricalFamily& family, double theta0, double alpha);

UmpuCutoffs solve_umpu_cutoffs(const TiltedSampleSet& samples, double theta0, double alpha);
UmpuCutoffs solve_umpu_cutoffs(const EmpiricalFamily& family, double theta0, double alpha);

bool umpu_decision(double z_obs, double u, const UmpuCutoffs& cutoffs);

// -1: reject in the upper tail (theta0 too small), +1: reject in the lower
// tail (theta0 too large), 0: accept.
int umpu_side(double z_obs, double u, const UmpuCutoffs& cutoffs);

// Randomized UMPU test plus equal-tailed p-value on one sample set.
TestOutcome umpu_mc_test(double z_obs, double u, const TiltedSampleSet& samples, double theta0,
                         double alpha);

struct InversionOptions {
    double theta_start = 0.0;
    double initial_step = 1.0;
    double tol = 1e-6;
    double max_span = 1e6;
    // refresh the pool with a new reference set when ESS drops below
    // max(min_ess, ess_fraction * size of one set)
    double min_ess = kEssWarning;
    double ess_fraction = 0.1;
    int max_reference_sets = 60;
};

struct IntervalResult {
    double lo = -1e300;
    double hi = 1e300;
    double min_ess = 0.0;
    int reference_sets = 1;
    std::vector<std::string> flags;
};

// Interval from a fixed family (no resampling).
IntervalResult confidence_interval(double z_obs, double u, const EmpiricalFamily& family, double alpha,
                                   IntervalKind kind, const InversionOptions& options = {});

// Interval from a fixed sample set (no resampling).
IntervalResult confidence_interval_from_samples(double z_obs, double u, const TiltedSampleSet& samples,
                                                double alpha, IntervalKind kind,
                                                const InversionOptions& options = {});

// Interval with adaptive pooling of reference sets drawn from the family.
IntervalResult umpu_confidence_interval(double z_obs, double u, const NaturalFamily1D& family,
                                        double alpha, const InversionOptions& options = {});
IntervalResult equal_tailed_confidence_interval(double z_obs, const NaturalFamily1D& family, double alpha,
                                                const InversionOptions& options = {});

} // namespace selektor
