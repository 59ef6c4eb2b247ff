#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace selektor {

// Linear model y = X_M beta + noise. target is a column index of X that must
// belong to model; null_value is the hypothesized coefficient (or, for the
// saturated model, the hypothesized value of eta' mu).
struct RegressionProblem {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<int> model;
    int target = 0;
    std::optional<double> sigma;
    double null_value = 0.0;

    Eigen::Index n() const noexcept { return X.rows(); }
    void validate() const;
    Eigen::MatrixXd model_columns() const;
    // Columns of the model other than the target.
    Eigen::MatrixXd nuisance_columns() const;
};

// Orthonormal basis of the column space of A (n x r), checking full column
// rank. Throws a precondition error naming the first collinear column.
Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd& A, const std::vector<int>& labels = {});

// eta = X_{j.M} / |X_{j.M}|^2 with X_{j.M} the part of X_j orthogonal to the
// other model columns. eta' X_j = 1 and eta' X_k = 0 for the rest of the model.
Eigen::VectorXd eta_vector(const Eigen::MatrixXd& X, const std::vector<int>& model, int target);

// Residual variance estimate |P_perp y|^2 / (n - |M|). Diagnostic only: it
// ignores selection.
double hat_sigma_sq(const RegressionProblem& problem);

} // namespace selektor
