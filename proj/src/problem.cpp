#include "selektor/problem.hpp"

#include "selektor/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace selektor {

void RegressionProblem::validate() const {
    require(X.rows() == y.size(), "RegressionProblem: X and y have different row counts");
    require(!model.empty(), "RegressionProblem: empty model");
    for (int k : model) require(k >= 0 && k < X.cols(), "RegressionProblem: model index out of range");
    std::vector<int> sorted = model;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "RegressionProblem: repeated model index");
    require(std::find(model.begin(), model.end(), target) != model.end(),
            "RegressionProblem: target is not in the model");
    require(X.rows() >= static_cast<Eigen::Index>(model.size()),
            "RegressionProblem: more model columns than observations");
    if (sigma) require(*sigma > 0.0 && std::isfinite(*sigma), "RegressionProblem: sigma must be positive");
}

Eigen::MatrixXd RegressionProblem::model_columns() const {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(model.size()));
    for (std::size_t i = 0; i < model.size(); ++i) out.col(i) = X.col(model[i]);
    return out;
}

Eigen::MatrixXd RegressionProblem::nuisance_columns() const {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(model.size()) - 1);
    Eigen::Index c = 0;
    for (int k : model) {
        if (k != target) out.col(c++) = X.col(k);
    }
    return out;
}

Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd& A, const std::vector<int>& labels) {
    // modified Gram-Schmidt with reorthogonalization, so a collinear column
    // can be reported by name
    const Eigen::Index n = A.rows();
    Eigen::MatrixXd Q(n, A.cols());
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
        Eigen::VectorXd v = A.col(c);
        const double norm0 = v.norm();
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index k = 0; k < c; ++k) v -= Q.col(k).dot(v) * Q.col(k);
        }
        const double norm = v.norm();
        if (!(norm > 1e-10 * std::max(norm0, 1e-300)) || norm0 == 0.0) {
            std::ostringstream os;
            auto name = [&](Eigen::Index i) { return i < static_cast<Eigen::Index>(labels.size()) ? labels[i] : i; };
            os << "design is rank deficient: column " << name(c);
            if (norm0 == 0.0) {
                os << " is zero";
            } else {
                os << " is collinear with columns";
                for (Eigen::Index k = 0; k < c; ++k) os << ' ' << name(k);
            }
            throw PreconditionError(os.str());
        }
        Q.col(c) = v / norm;
    }
    return Q;
}

Eigen::VectorXd eta_vector(const Eigen::MatrixXd& X, const std::vector<int>& model, int target) {
    require(std::find(model.begin(), model.end(), target) != model.end(), "eta_vector: target not in model");
    std::vector<int> order;
    for (int k : model) {
        require(k >= 0 && k < X.cols(), "eta_vector: model index out of range");
        if (k != target) order.push_back(k);
    }
    order.push_back(target);
    Eigen::MatrixXd A(X.rows(), static_cast<Eigen::Index>(order.size()));
    for (std::size_t i = 0; i < order.size(); ++i) A.col(i) = X.col(order[i]);
    const Eigen::MatrixXd Q = orthonormal_columns(A, order);
    Eigen::VectorXd resid = X.col(target);
    const Eigen::Index r = static_cast<Eigen::Index>(order.size()) - 1;
    for (int pass = 0; pass < 2; ++pass) {
        if (r > 0) resid -= Q.leftCols(r) * (Q.leftCols(r).transpose() * resid);
    }
    return resid / resid.squaredNorm();
}

double hat_sigma_sq(const RegressionProblem& problem) {
    problem.validate();
    const Eigen::Index n = problem.n();
    const Eigen::Index m = static_cast<Eigen::Index>(problem.model.size());
    require(n > m, "hat_sigma_sq: needs more observations than model columns");

    std::vector<int> order;
    for (int k : problem.model) {
        if (k != problem.target) order.push_back(k);
    }
    order.push_back(problem.target);
    Eigen::MatrixXd A(n, m);
    for (Eigen::Index i = 0; i < m; ++i) A.col(i) = problem.X.col(order[i]);
    const Eigen::MatrixXd Q = orthonormal_columns(A, order);
    const Eigen::VectorXd& y = problem.y;
    const Eigen::VectorXd coef = Q.transpose() * y;
    Eigen::VectorXd resid = y - Q * coef;
    resid -= Q * (Q.transpose() * resid);
    const double rss = resid.squaredNorm();

    // |y|^2 - |P_{M\j} y|^2 - (eta'y)^2/|eta|^2 must equal the residual sum of squares
    const Eigen::VectorXd eta = eta_vector(problem.X, problem.model, problem.target);
    const double nuisance = coef.head(m - 1).squaredNorm();
    const double ez = eta.dot(y);
    const double identity = y.squaredNorm() - nuisance - ez * ez / eta.squaredNorm();
    if (std::abs(identity - rss) > 1e-8 * std::max(1.0, y.squaredNorm())) {
        throw NumericalError("hat_sigma_sq: residual decomposition failed to close");
    }
    return rss / static_cast<double>(n - m);
}

} // namespace selektor
