#include "selektor/selected.hpp"

#include "selektor/errors.hpp"
#include "selektor/normal.hpp"

#include <algorithm>
#include <cmath>

namespace selektor {

namespace {

double draw_u(const SelectedOptions& opt) {
    if (opt.u) {
        require(*opt.u >= 0.0 && *opt.u <= 1.0, "randomization variable must lie in [0,1]");
        return *opt.u;
    }
    Rng rng = make_rng(opt.chain.seed, 0x75u);
    return uniform01(rng);
}

void fill_decision(TestOutcome& out, double z_obs, double u, const TiltedSampleSet& samples, double alpha,
                   IntervalKind kind) {
    const EmpiricalFamily fam(samples);
    TestOutcome et = equal_tailed_test(z_obs, fam, 0.0, alpha);
    out.statistic = z_obs;
    out.p_value = et.p_value;
    out.p_lower = et.p_lower;
    out.p_upper = et.p_upper;
    out.aux_uniform = u;
    out.diagnostics.ess = et.diagnostics.ess;
    out.diagnostics.n_samples = samples.size();
    for (const auto& f : et.diagnostics.flags) out.diagnostics.flag(f);
    const UmpuCutoffs cut = solve_umpu_cutoffs(fam, 0.0, alpha);
    out.diagnostics.k1_residual = std::abs(cut.k1_residual);
    out.diagnostics.k2_residual = std::abs(cut.k2_residual);
    if (cut.one_sided_degenerate) out.diagnostics.flag("one_sided_degenerate");
    out.reject = kind == IntervalKind::umpu ? umpu_decision(z_obs, u, cut) : et.reject;
}

// Shared setup: the problem shifted so that the null is beta_j = 0.
struct ShiftedProblem {
    Eigen::VectorXd y;
    SelectionRegion region;
    Eigen::VectorXd eta;
    Eigen::VectorXd xj;
    Eigen::MatrixXd nuisance;
};

ShiftedProblem shift(const RegressionProblem& problem, const SelectionRegion& region) {
    problem.validate();
    require(region.dim() == problem.n(), "selection region dimension differs from the sample size");
    require(region.contains(problem.y), "observed y is not in the selection region");
    ShiftedProblem s{problem.y, region, eta_vector(problem.X, problem.model, problem.target),
                     problem.X.col(problem.target), problem.nuisance_columns()};
    if (problem.null_value != 0.0) {
        const Eigen::VectorXd offset = problem.null_value * s.xj;
        s.y = problem.y - offset;
        s.region = region.shifted(offset);
    }
    return s;
}

std::optional<AffineConstraint> nuisance_slice(const ShiftedProblem& s) {
    if (s.nuisance.cols() == 0) return std::nullopt;
    return AffineConstraint{s.nuisance.transpose(), s.nuisance.transpose() * s.y};
}

} // namespace

TestOutcome selected_z_test(const RegressionProblem& problem, const SelectionRegion& region, double alpha,
                            const SelectedOptions& options) {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    require(problem.sigma.has_value(), "selected_z_test: sigma must be known");
    options.chain.validate();
    const ShiftedProblem s = shift(problem, region);
    const double sigma = *problem.sigma;
    const double eta_sq = s.eta.squaredNorm();
    const std::optional<AffineConstraint> slice = nuisance_slice(s);
    ChainConfig cfg = options.chain;
    if (cfg.scheme == DirectionScheme::coordinate && !cfg.focus) cfg.focus = s.eta;

    // draws of eta'y under beta_j = b (shifted coordinates), natural parameter theta = b / (sigma^2 |eta|^2)
    auto sample_at = [&](double theta, std::uint64_t stream, std::vector<double>* series) {
        const Eigen::VectorXd mean = theta * sigma * sigma * eta_sq * s.xj;
        SliceChain chain(s.region, s.y, SliceChain::Target::gaussian, mean, sigma, slice, cfg.scheme, cfg.focus,
                         derive_seed(cfg.seed, stream), cfg.recompute_every);
        const auto [coef, offset] = chain.functional(s.eta);
        chain.run(cfg.burn_in);
        std::vector<double> z(cfg.n_samples);
        for (int i = 0; i < cfg.n_samples; ++i) {
            chain.run(cfg.thin);
            z[i] = offset + coef.dot(chain.coords());
        }
        if (series) *series = z;
        return TiltedSampleSet::unit_weights(std::move(z), theta);
    };

    std::vector<double> series;
    const TiltedSampleSet null_samples = sample_at(0.0, 0, &series);
    const double z_obs = s.eta.dot(s.y);
    const double u = draw_u(options);

    TestOutcome out;
    fill_decision(out, z_obs, u, null_samples, alpha, options.kind);
    out.statistic = s.eta.dot(problem.y);
    out.diagnostics.seed = cfg.seed;
    out.diagnostics.lag1_autocorrelation = lag1_autocorrelation(series);

    if (options.with_interval) {
        NaturalFamily1D family;
        family.sample_at = [&](double theta, std::uint64_t stream) {
            return sample_at(theta, stream + 1, nullptr);
        };
        InversionOptions inv = options.inversion;
        const double to_beta = sigma * sigma * eta_sq;
        inv.theta_start = z_obs / to_beta;
        inv.initial_step = 1.0 / (sigma * std::sqrt(eta_sq));
        inv.tol = options.inversion.tol / to_beta;
        const IntervalResult r = options.kind == IntervalKind::umpu
                                     ? umpu_confidence_interval(z_obs, u, family, alpha, inv)
                                     : equal_tailed_confidence_interval(z_obs, family, alpha, inv);
        out.ci_lo = problem.null_value + r.lo * to_beta;
        out.ci_hi = problem.null_value + r.hi * to_beta;
        for (const auto& f : r.flags) out.diagnostics.flag(f);
    }
    return out;
}

namespace {

struct TTestDraws {
    double z_obs;
    TiltedSampleSet samples;
    std::size_t discarded;
    double lag1;
};

TTestDraws t_test_draws(const RegressionProblem& problem, const SelectionRegion& region, const ChainConfig& cfg0) {
    const ShiftedProblem s = shift(problem, region);
    const Eigen::Index n = problem.n();
    const Eigen::Index m = static_cast<Eigen::Index>(problem.model.size());
    require(n - m >= 2, "selected_t_test: insufficient residual dimension, needs n - |M| >= 2");

    // y = U + L Q w with U the projection on the nuisance columns and |w| = 1
    const Eigen::MatrixXd Q = null_space_basis(
        s.nuisance.cols() ? Eigen::MatrixXd(s.nuisance.transpose()) : Eigen::MatrixXd(0, n), n);
    const Eigen::Index k = Q.cols();
    const Eigen::VectorXd coords = Q.transpose() * s.y;
    const Eigen::VectorXd U = s.y - Q * coords;
    const double L = coords.norm();
    require(L > 0.0, "selected_t_test: response lies in the span of the nuisance columns");
    const Eigen::VectorXd w_obs = coords / L;
    const SelectionRegion cw = s.region.reparametrize(U, L * Q);
    const Eigen::VectorXd direction = Q.transpose() * s.eta;

    ChainConfig cfg = cfg0;
    if (cfg.scheme == DirectionScheme::coordinate && !cfg.focus) cfg.focus = direction;
    SliceChain chain(cw, w_obs, SliceChain::Target::uniform_ball, Eigen::VectorXd::Zero(k), 1.0, std::nullopt,
                     cfg.scheme, cfg.focus, derive_seed(cfg.seed, 0), cfg.recompute_every);
    chain.run(cfg.burn_in);
    WeightedDraws ball;
    ball.points.reserve(cfg.n_samples);
    for (int i = 0; i < cfg.n_samples; ++i) {
        chain.run(cfg.thin);
        ball.points.push_back(chain.coords());
    }
    ball.weights.assign(ball.points.size(), 1.0);
    const WeightedDraws sphere = sphere_project_weights(ball, static_cast<int>(k), cw);
    if (sphere.points.empty()) throw NumericalError("selected_t_test: every projected draw left the region");

    std::vector<double> z(sphere.size()), w(sphere.size());
    for (std::size_t i = 0; i < sphere.size(); ++i) {
        z[i] = L * direction.dot(sphere.points[i]);
        w[i] = sphere.weights[i];
    }
    std::vector<double> series(z);
    return {s.eta.dot(s.y), TiltedSampleSet(std::move(z), std::move(w), 0.0), sphere.discarded,
            lag1_autocorrelation(series)};
}

} // namespace

TestOutcome selected_t_test(const RegressionProblem& problem, const SelectionRegion& region, double alpha,
                            const SelectedOptions& options) {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    options.chain.validate();
    const TTestDraws d = t_test_draws(problem, region, options.chain);
    const double u = draw_u(options);
    TestOutcome out;
    fill_decision(out, d.z_obs, u, d.samples, alpha, options.kind);
    out.diagnostics.seed = options.chain.seed;
    out.diagnostics.lag1_autocorrelation = d.lag1;
    if (d.discarded) out.diagnostics.flag("discarded_draws=" + std::to_string(d.discarded));

    if (options.with_interval) {
        // invert over b with common random numbers: the same seed at every b
        auto side = [&](double b) {
            RegressionProblem shifted = problem;
            shifted.null_value = b;
            const TTestDraws db = t_test_draws(shifted, region, options.chain);
            const EmpiricalFamily fam(db.samples);
            if (options.kind == IntervalKind::umpu) {
                return umpu_side(db.z_obs, u, solve_umpu_cutoffs(fam, 0.0, alpha));
            }
            const TestOutcome et = equal_tailed_test(db.z_obs, fam, 0.0, alpha);
            if (et.p_upper <= alpha / 2.0) return -1;
            if (et.p_lower <= alpha / 2.0) return 1;
            return 0;
        };
        const Eigen::VectorXd eta = eta_vector(problem.X, problem.model, problem.target);
        const double estimate = eta.dot(problem.y);
        const double se = std::sqrt(std::max(hat_sigma_sq(problem), 1e-300) * eta.squaredNorm());
        constexpr double golden = 1.618033988749895;
        const double tol = options.inversion.tol * std::max(1.0, se);

        auto endpoint = [&](bool lower) {
            const int outside = lower ? -1 : 1;
            const double dir = lower ? -1.0 : 1.0;
            double inside = estimate;
            if (side(inside) == outside) {
                // the estimate itself is rejected: walk inward from the other side
                inside = estimate - dir * se;
                for (int i = 0; i < 60 && side(inside) == outside; ++i) inside -= dir * se * std::pow(golden, i);
            }
            double step = se;
            double far = inside + dir * step;
            int guard = 0;
            while (side(far) != outside) {
                inside = far;
                step *= golden;
                far = inside + dir * step;
                if (++guard > 200) return dir * kInf;
            }
            while (std::abs(far - inside) > tol) {
                const double mid = 0.5 * (inside + far);
                if (side(mid) == outside) far = mid;
                else inside = mid;
            }
            return 0.5 * (inside + far);
        };
        out.ci_lo = endpoint(true);
        out.ci_hi = endpoint(false);
    }
    return out;
}

} // namespace selektor
