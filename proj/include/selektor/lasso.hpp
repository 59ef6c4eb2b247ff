#pragma once

#include "selektor/region.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace selektor {

// Solution of  min_beta |y - X beta|^2 + lambda |beta|_1  (no factor 1/2, so
// the stationarity condition reads 2 X_j'(y - X beta) = lambda sign(beta_j)).
struct LassoFit {
    Eigen::VectorXd beta_hat;
    std::vector<int> active;
    std::vector<int> signs;
    double lambda = 0.0;
    double kkt_residual = 0.0;
    int sweeps = 0;
};

// Cyclic coordinate descent in ascending column order.
LassoFit lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda, double tol = 1e-10,
                   int max_iter = 100000);

// Largest violation of the stationarity conditions at beta.
double lasso_kkt_residual(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                          double lambda);

inline constexpr int kMaxSignFreeActive = 10;

// { y : the lasso at lambda selects exactly `active` with `signs` }, one
// polytope. With condition_on_signs false, the union over all sign patterns
// of the active set (at most kMaxSignFreeActive active variables). An empty
// active set gives the box |2 X'y| <= lambda.
SelectionRegion lasso_selection_region(const Eigen::MatrixXd& X, double lambda, const std::vector<int>& active,
                                       const std::vector<int>& signs, bool condition_on_signs = true);

// lambda = 2 E |X' eps|_inf, eps ~ N(0, sigma^2 I), by Monte Carlo.
double lambda_mc(const Eigen::MatrixXd& X, double sigma, int n_mc, std::uint64_t seed);

} // namespace selektor
