#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace selektor {

inline constexpr double kEssWarning = 50.0;

// Weighted reference sample {(Z_i, W_i)} drawn under natural parameter
// reference_theta. Tilting to theta reweights by exp((theta - reference_theta) Z_i).
// Weights are stored as logarithms.
class TiltedSampleSet {
public:
    TiltedSampleSet() = default;
    TiltedSampleSet(std::vector<double> points, std::vector<double> weights, double reference_theta);
    static TiltedSampleSet unit_weights(std::vector<double> points, double reference_theta);
    static TiltedSampleSet from_log_weights(std::vector<double> points, std::vector<double> log_weights,
                                            double reference_theta);

    const std::vector<double>& points() const noexcept { return points_; }
    const std::vector<double>& log_weights() const noexcept { return log_weights_; }
    std::vector<double> weights() const;
    double reference_theta() const noexcept { return reference_theta_; }
    std::size_t size() const noexcept { return points_.size(); }

    // Self-normalized weights at theta (sum to one).
    std::vector<double> tilted_probabilities(double theta) const;

private:
    void validate() const;

    std::vector<double> points_;
    std::vector<double> log_weights_;
    double reference_theta_ = 0.0;
};

double tilted_expectation(const TiltedSampleSet& samples, const std::function<double(double)>& h,
                          double theta);

double effective_sample_size(const TiltedSampleSet& samples, double theta);

// Multiple-importance-sampling pool of sets drawn at different reference
// parameters (balance heuristic). The normalizing constants of the reference
// laws are estimated jointly by self-consistent iteration. The pooled set has
// reference_theta 0 and represents the common carrier.
TiltedSampleSet pool_tilted(const std::vector<TiltedSampleSet>& sets);

// One-parameter exponential family exp(theta z - psi(theta)) against a carrier,
// known through a sampler producing weighted draws at any reference theta.
struct NaturalFamily1D {
    std::function<TiltedSampleSet(double theta, std::uint64_t stream)> sample_at;
    double theta_lo = -1e300;
    double theta_hi = 1e300;
    std::string statistic = "z";
};

} // namespace selektor
