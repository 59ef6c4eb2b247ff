#include "selektor/lasso.hpp"

#include "selektor/errors.hpp"
#include "selektor/problem.hpp"
#include "selektor/rng.hpp"

#include <algorithm>
#include <cmath>

namespace selektor {

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

double kkt_violation(double grad, double beta, double lambda) {
    // grad = 2 X_j' r
    if (beta > 0.0) return std::abs(grad - lambda);
    if (beta < 0.0) return std::abs(grad + lambda);
    return std::max(0.0, std::abs(grad) - lambda);
}

} // namespace

double lasso_kkt_residual(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                          double lambda) {
    const Eigen::VectorXd grad = 2.0 * X.transpose() * (y - X * beta);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) worst = std::max(worst, kkt_violation(grad[j], beta[j], lambda));
    return worst;
}

LassoFit lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda, double tol, int max_iter) {
    require(lambda > 0.0, "lasso_fit: lambda must be positive");
    require(X.rows() == y.size(), "lasso_fit: X and y have different row counts");
    const Eigen::Index p = X.cols();
    const Eigen::VectorXd col_sq = X.colwise().squaredNorm();
    for (Eigen::Index j = 0; j < p; ++j) require(col_sq[j] > 0.0, "lasso_fit: zero column in X");

    LassoFit fit;
    fit.lambda = lambda;
    fit.beta_hat = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = y;
    Eigen::VectorXd& beta = fit.beta_hat;

    auto update = [&](Eigen::Index j) {
        const double rho = X.col(j).dot(r) + col_sq[j] * beta[j];
        const double nb = soft_threshold(rho, lambda / 2.0) / col_sq[j];
        const double delta = nb - beta[j];
        if (delta != 0.0) {
            r.noalias() -= delta * X.col(j);
            beta[j] = nb;
        }
        return std::abs(delta) * std::sqrt(col_sq[j]);
    };

    double last = 0.0;
    for (int sweep = 0; sweep < max_iter; ++sweep) {
        // full pass, then iterate on the current support until it settles
        for (Eigen::Index j = 0; j < p; ++j) update(j);
        for (int inner = 0; inner < 1000; ++inner) {
            double change = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                if (beta[j] != 0.0) change = std::max(change, update(j));
            }
            if (change < 1e-3 * tol) break;
        }
        r = y - X * beta;
        last = lasso_kkt_residual(X, y, beta, lambda);
        fit.sweeps = sweep + 1;
        if (last <= tol) break;
        if (sweep + 1 == max_iter) throw ConvergenceError("lasso_fit: coordinate descent did not converge", last);
    }
    fit.kkt_residual = last;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (beta[j] != 0.0) {
            fit.active.push_back(static_cast<int>(j));
            fit.signs.push_back(beta[j] > 0.0 ? 1 : -1);
        }
    }
    return fit;
}

namespace {

Polytope sign_polytope(const Eigen::MatrixXd& X, double lambda, const std::vector<int>& active,
                       const Eigen::VectorXd& s, const Eigen::MatrixXd& XE_pinv, const Eigen::MatrixXd& gram_inv,
                       const Eigen::MatrixXd& inactive_cols, const Eigen::MatrixXd& inactive_perp) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = static_cast<Eigen::Index>(active.size());
    const Eigen::Index q = inactive_cols.cols();
    Eigen::MatrixXd A(k + 2 * q, n);
    Eigen::VectorXd b(k + 2 * q);
    // sign consistency of the active coefficients
    A.topRows(k) = -(s.asDiagonal() * XE_pinv);
    b.head(k) = -s.cwiseProduct(gram_inv * s) * (lambda / 2.0);
    if (q > 0) {
        // subgradient bounds on the inactive block
        const Eigen::VectorXd u = inactive_cols.transpose() * (XE_pinv.transpose() * s);
        A.middleRows(k, q) = 2.0 * inactive_perp;
        A.bottomRows(q) = -2.0 * inactive_perp;
        b.segment(k, q) = lambda * (Eigen::VectorXd::Ones(q) - u);
        b.tail(q) = lambda * (Eigen::VectorXd::Ones(q) + u);
    }
    return Polytope(std::move(A), std::move(b));
}

} // namespace

SelectionRegion lasso_selection_region(const Eigen::MatrixXd& X, double lambda, const std::vector<int>& active,
                                       const std::vector<int>& signs, bool condition_on_signs) {
    require(lambda > 0.0, "lasso_selection_region: lambda must be positive");
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (active.empty()) {
        Eigen::MatrixXd A(2 * p, n);
        A.topRows(p) = 2.0 * X.transpose();
        A.bottomRows(p) = -2.0 * X.transpose();
        return SelectionRegion(Polytope(std::move(A), Eigen::VectorXd::Constant(2 * p, lambda)));
    }
    require(!condition_on_signs || signs.size() == active.size(),
            "lasso_selection_region: signs and active set differ in length");
    std::vector<char> in_active(p, 0);
    for (int j : active) {
        require(j >= 0 && j < p, "lasso_selection_region: active index out of range");
        require(!in_active[j], "lasso_selection_region: repeated active index");
        in_active[j] = 1;
    }
    const Eigen::Index k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd XE(n, k);
    for (Eigen::Index i = 0; i < k; ++i) XE.col(i) = X.col(active[i]);
    const Eigen::MatrixXd Q = orthonormal_columns(XE, active);
    const Eigen::MatrixXd gram_inv = (XE.transpose() * XE).inverse();
    const Eigen::MatrixXd XE_pinv = gram_inv * XE.transpose();

    std::vector<int> inactive;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!in_active[j]) inactive.push_back(static_cast<int>(j));
    }
    const Eigen::Index q = static_cast<Eigen::Index>(inactive.size());
    Eigen::MatrixXd inactive_cols(n, q);
    for (Eigen::Index i = 0; i < q; ++i) inactive_cols.col(i) = X.col(inactive[i]);
    // rows X_j' P_perp for inactive j
    const Eigen::MatrixXd inactive_perp =
        inactive_cols.transpose() - (inactive_cols.transpose() * Q) * Q.transpose();

    if (condition_on_signs) {
        Eigen::VectorXd s(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            require(signs[i] == 1 || signs[i] == -1, "lasso_selection_region: signs must be +1 or -1");
            s[i] = signs[i];
        }
        return SelectionRegion(sign_polytope(X, lambda, active, s, XE_pinv, gram_inv, inactive_cols, inactive_perp));
    }
    require(k <= kMaxSignFreeActive, "lasso_selection_region: too many active variables for the sign-free union");
    std::vector<Polytope> parts;
    for (long mask = 0; mask < (1L << k); ++mask) {
        Eigen::VectorXd s(k);
        for (Eigen::Index i = 0; i < k; ++i) s[i] = (mask >> i) & 1 ? -1.0 : 1.0;
        parts.push_back(sign_polytope(X, lambda, active, s, XE_pinv, gram_inv, inactive_cols, inactive_perp));
    }
    return SelectionRegion(std::move(parts));
}

double lambda_mc(const Eigen::MatrixXd& X, double sigma, int n_mc, std::uint64_t seed) {
    require(sigma > 0.0, "lambda_mc: sigma must be positive");
    require(n_mc >= 1, "lambda_mc: n_mc must be positive");
    Rng rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd eps(X.rows());
    double total = 0.0;
    for (int i = 0; i < n_mc; ++i) {
        for (Eigen::Index r = 0; r < eps.size(); ++r) eps[r] = gauss(rng);
        total += 2.0 * (X.transpose() * eps).cwiseAbs().maxCoeff();
    }
    // scale after averaging, so lambda_mc(X, c sigma) == c lambda_mc(X, sigma) exactly
    return sigma * (total / n_mc);
}

} // namespace selektor
