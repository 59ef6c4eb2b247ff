#pragma once

#include "selektor/region.hpp"
#include "selektor/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace selektor {

enum class DirectionScheme {
    isotropic,   // uniformly random unit direction in the slice
    coordinate,  // random coordinate of the slice basis, or the focus direction with probability 1/2
};

struct ChainConfig {
    int burn_in = 1000;
    int thin = 5;
    int n_samples = 1000;
    std::uint64_t seed = 0;
    DirectionScheme scheme = DirectionScheme::isotropic;
    std::optional<Eigen::VectorXd> focus;
    int recompute_every = 200;

    void validate() const;
};

// { y : C y = d }
struct AffineConstraint {
    Eigen::MatrixXd C;
    Eigen::VectorXd d;
};

struct WeightedDraws {
    std::vector<Eigen::VectorXd> points;
    std::vector<double> weights;
    std::size_t discarded = 0;
    std::size_t rejected_steps = 0;
    double acceptance_rate = 1.0;

    std::size_t size() const noexcept { return points.size(); }
    // Weights rescaled to sum to one.
    std::vector<double> normalized_weights() const;
};

// Orthonormal basis of the null space of C (all of R^dim when C has no rows).
Eigen::MatrixXd null_space_basis(const Eigen::MatrixXd& C, Eigen::Index dim);

// Markov chain on region intersected with an optional affine slice. The
// state is y = y0 + B v with B an orthonormal basis of the slice directions,
// and each step moves along one line, redrawing the position from the exact
// conditional law on the chord.
class SliceChain {
public:
    enum class Target {
        gaussian,      // N(mean, sigma^2 I) restricted to the region
        uniform_ball,  // uniform on { |y| <= radius } restricted to the region
    };

    SliceChain(const SelectionRegion& region, const Eigen::VectorXd& start, Target target,
               const Eigen::VectorXd& mean, double sigma_or_radius,
               const std::optional<AffineConstraint>& slice, DirectionScheme scheme,
               const std::optional<Eigen::VectorXd>& focus, std::uint64_t seed, int recompute_every = 200);

    void step();
    void run(int steps);

    Eigen::VectorXd point() const;
    const Eigen::VectorXd& coords() const noexcept { return v_; }
    const Eigen::MatrixXd& basis() const noexcept { return B_; }
    const Eigen::VectorXd& origin() const noexcept { return y0_; }
    std::size_t rejected_steps() const noexcept { return rejected_; }

    // Coefficients c and offset o with a'y = o + c'v for the current chart.
    std::pair<Eigen::VectorXd, double> functional(const Eigen::VectorXd& a) const;

private:
    void recompute_slack();
    IntervalUnion chord(const std::vector<Eigen::VectorXd>& images) const;
    void move(double t, const Eigen::VectorXd& d, const std::vector<Eigen::VectorXd>& images);

    Target target_;
    double scale_;
    Eigen::MatrixXd B_;
    Eigen::VectorXd y0_;
    Eigen::VectorXd v_;
    Eigen::VectorXd mean_v_;
    double radius_sq_v_ = 0.0;
    double v_norm_sq_ = 0.0;
    std::vector<Eigen::MatrixXd> G_;
    std::vector<Eigen::VectorXd> h_;
    std::vector<Eigen::VectorXd> slack_;
    std::optional<Eigen::VectorXd> focus_v_;
    std::vector<Eigen::VectorXd> focus_images_;
    DirectionScheme scheme_;
    Rng rng_;
    int recompute_every_;
    long steps_ = 0;
    std::size_t rejected_ = 0;
};

// Point of region on the slice, found by cyclic projection onto violated
// halfspaces. Throws a numerical error when none is found.
Eigen::VectorXd find_feasible_point(const SelectionRegion& region, const std::optional<AffineConstraint>& slice,
                                    const Eigen::VectorXd& guess, int max_iter = 20000);

// Hit-and-run on N(mean, sigma^2 I) restricted to region (and to the slice
// when given). Unit weights.
WeightedDraws hit_and_run(const Eigen::VectorXd& mean, double sigma, const SelectionRegion& region,
                          const std::optional<AffineConstraint>& slice, const ChainConfig& config,
                          const std::optional<Eigen::VectorXd>& start = std::nullopt);

// I.i.d. truncated-Gaussian draws by rejection. A pilot run estimates the
// acceptance rate and refuses when it is below min_acceptance.
WeightedDraws rejection_sample(const Eigen::VectorXd& mean, double sigma, const SelectionRegion& region,
                               int n, std::uint64_t seed, double min_acceptance = 1e-4, int pilot = 50000);

// Radially project draws in the unit ball (intersected with C) onto the unit
// sphere. Weight of a projected point z is the inverse of the normalized
// radial mass { r in [0,1] : r z in C } under density k r^(k-1); draws whose
// projection leaves C are discarded.
WeightedDraws sphere_project_weights(const WeightedDraws& draws, int k, const SelectionRegion& region);

// Lag-1 autocorrelation of a scalar series.
double lag1_autocorrelation(const std::vector<double>& series);

} // namespace selektor
