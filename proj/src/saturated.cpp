#include "selektor/saturated.hpp"

#include "selektor/errors.hpp"
#include "selektor/normal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace selektor {

IntervalUnion truncation_set(const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                             const SelectionRegion& region) {
    require(y.size() == region.dim() && eta.size() == region.dim(), "truncation_set: dimension mismatch");
    const double nn = eta.squaredNorm();
    require(nn > 0.0, "truncation_set: degenerate direction, eta is zero");
    require(region.contains(y), "truncation_set: y is not in the selection region");
    return region.chord(y, eta).affine(nn, eta.dot(y));
}

namespace {

struct SplitMass {
    double log_below = -kInf;
    double log_above = -kInf;
};

SplitMass split_mass(double z, double mu, double sigma, const IntervalUnion& support) {
    require(sigma > 0.0, "truncated normal: sigma must be positive");
    require(!support.empty(), "truncated normal: empty support");
    SplitMass m;
    for (const auto& iv : support.intervals()) {
        const double a = (iv.lo - mu) / sigma;
        const double b = (iv.hi - mu) / sigma;
        const double s = (z - mu) / sigma;
        if (s > a) m.log_below = log_add_exp(m.log_below, log_norm_interval_mass(a, std::min(b, s)));
        if (s < b) m.log_above = log_add_exp(m.log_above, log_norm_interval_mass(std::max(a, s), b));
    }
    if (m.log_below == -kInf && m.log_above == -kInf) {
        throw FarTailError("truncated normal: support mass underflows; the null is too far from the support");
    }
    return m;
}

// P(Z <= z) given the split: 1 / (1 + exp(log_above - log_below)), stable both ways
double logistic_ratio(double log_num, double log_other) {
    if (log_num == -kInf) return 0.0;
    if (log_other == -kInf) return 1.0;
    return 1.0 / (1.0 + std::exp(log_other - log_num));
}

double bisect(const std::function<double(double)>& g, double a, double b, int iters = 200) {
    // g(a) < 0 <= g(b)
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        if (g(mid) < 0.0) a = mid;
        else b = mid;
    }
    return 0.5 * (a + b);
}

// E[(Z - mu)/sigma ; Z <= x] / P(Z in support)
double centred_partial_moment(double x, double mu, double sigma, const IntervalUnion& support, double log_total) {
    double acc = 0.0;
    const double s = (x - mu) / sigma;
    for (const auto& iv : support.intervals()) {
        const double a = (iv.lo - mu) / sigma;
        if (a >= s) break;
        const double b = std::min((iv.hi - mu) / sigma, s);
        const double pa = std::isfinite(a) ? std::exp(log_norm_pdf(a) - log_total) : 0.0;
        const double pb = std::isfinite(b) ? std::exp(log_norm_pdf(b) - log_total) : 0.0;
        acc += pa - pb;
    }
    return acc;
}

} // namespace

double trunc_gauss_cdf(double z, double mu, double sigma, const IntervalUnion& support) {
    const SplitMass m = split_mass(z, mu, sigma, support);
    return logistic_ratio(m.log_below, m.log_above);
}

double trunc_gauss_sf(double z, double mu, double sigma, const IntervalUnion& support) {
    const SplitMass m = split_mass(z, mu, sigma, support);
    return logistic_ratio(m.log_above, m.log_below);
}

double trunc_gauss_quantile(double q, double mu, double sigma, const IntervalUnion& support) {
    require(q >= 0.0 && q <= 1.0, "trunc_gauss_quantile: level outside [0,1]");
    require(!support.empty(), "trunc_gauss_quantile: empty support");
    const double lo = support.lower();
    const double hi = support.upper();
    if (q == 0.0) return lo;
    if (q == 1.0) return hi;
    double a = std::isfinite(lo) ? lo : std::min(hi, mu) - 40.0 * sigma;
    double b = std::isfinite(hi) ? hi : std::max(lo, mu) + 40.0 * sigma;
    // upper tail levels are resolved through the survival function
    if (q > 0.5) {
        const double r = 1.0 - q;
        return bisect([&](double x) { return r - trunc_gauss_sf(x, mu, sigma, support); }, a, b);
    }
    return bisect([&](double x) { return trunc_gauss_cdf(x, mu, sigma, support) - q; }, a, b);
}

UmpuCutoffs trunc_gauss_umpu_cutoffs(double mu, double sigma, const IntervalUnion& support, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    double log_total = -kInf;
    for (const auto& iv : support.intervals()) {
        log_total = log_add_exp(log_total, log_norm_interval_mass((iv.lo - mu) / sigma, (iv.hi - mu) / sigma));
    }
    if (log_total == -kInf) throw FarTailError("truncated normal: support mass underflows");
    const double htot = centred_partial_moment(support.upper(), mu, sigma, support, log_total);
    auto H = [&](double x) { return centred_partial_moment(x, mu, sigma, support, log_total); };
    auto f = [&](double s1) {
        const double c1 = trunc_gauss_quantile(s1, mu, sigma, support);
        const double c2 = trunc_gauss_quantile(s1 + 1.0 - alpha, mu, sigma, support);
        return H(c1) + (htot - H(c2)) - alpha * htot;
    };
    UmpuCutoffs out;
    double lo = 0.0, hi = alpha;
    if (f(lo) <= 0.0) {
        hi = lo;
        out.one_sided_degenerate = true;
    } else if (f(hi) >= 0.0) {
        lo = hi;
        out.one_sided_degenerate = true;
    }
    for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) lo = mid;
        else hi = mid;
    }
    const double s1 = 0.5 * (lo + hi);
    out.lower = {trunc_gauss_quantile(s1, mu, sigma, support), 0.0};
    out.upper = {trunc_gauss_quantile(s1 + 1.0 - alpha, mu, sigma, support), 0.0};
    out.k1_residual = trunc_gauss_cdf(out.lower.c, mu, sigma, support) +
                      trunc_gauss_sf(out.upper.c, mu, sigma, support) - alpha;
    out.k2_residual = H(out.lower.c) + (htot - H(out.upper.c)) - alpha * htot;
    out.ess = kInf;
    return out;
}

std::pair<double, double> trunc_gauss_interval(double z, double sigma, const IntervalUnion& support, double alpha,
                                               IntervalKind kind) {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    require(support.contains(z), "trunc_gauss_interval: observation outside the support");

    // side(mu): -1 when the test rejects because mu is too small, +1 when too large
    std::function<int(double)> side;
    if (kind == IntervalKind::equal_tailed) {
        side = [&](double mu) {
            const SplitMass m = split_mass(z, mu, sigma, support);
            if (logistic_ratio(m.log_above, m.log_below) <= alpha / 2.0) return -1;
            if (logistic_ratio(m.log_below, m.log_above) <= alpha / 2.0) return 1;
            return 0;
        };
    } else {
        side = [&](double mu) { return umpu_side(z, 0.5, trunc_gauss_umpu_cutoffs(mu, sigma, support, alpha)); };
    }
    auto safe_side = [&](double mu) {
        // far from the support the masses underflow; the side is then decided by position
        try {
            return side(mu);
        } catch (const FarTailError&) {
            return mu < z ? -1 : 1;
        }
    };

    auto find_endpoint = [&](bool lower) {
        const double dir = lower ? -1.0 : 1.0;
        const int outside = lower ? -1 : 1;
        double width = 20.0 * sigma;
        for (int attempt = 0; attempt < 12; ++attempt, width *= 4.0) {
            const double far = z + dir * width;
            if (safe_side(far) != outside) continue;
            // near a truncation point mu = z itself can be rejected; step back until accepted or past
            double in = z;
            for (double back = sigma; safe_side(in) == outside; back *= 4.0) {
                if (back > 1e6 * sigma) throw ConvergenceError("interval inversion: no accepted parameter found", back);
                in = z - dir * back;
            }
            double out = far;
            for (int it = 0; it < 200 && std::abs(out - in) > 1e-12 * std::max(1.0, std::abs(z)); ++it) {
                const double mid = 0.5 * (in + out);
                if (safe_side(mid) == outside) out = mid;
                else in = mid;
            }
            return 0.5 * (in + out);
        }
        throw ConvergenceError("interval inversion: no sign change found within the widened bracket", width);
    };
    return {find_endpoint(true), find_endpoint(false)};
}

TestOutcome saturated_z_test(const RegressionProblem& problem, const SelectionRegion& region, double alpha,
                             const SaturatedOptions& options) {
    problem.validate();
    require(problem.sigma.has_value(), "saturated_z_test: sigma must be known");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    const Eigen::VectorXd eta = eta_vector(problem.X, problem.model, problem.target);
    const IntervalUnion support = truncation_set(problem.y, eta, region);
    const double z = eta.dot(problem.y);
    const double sd = *problem.sigma * eta.norm();
    const double mu0 = problem.null_value;

    TestOutcome out;
    out.statistic = z;
    const SplitMass m = split_mass(z, mu0, sd, support);
    out.p_lower = logistic_ratio(m.log_below, m.log_above);
    out.p_upper = logistic_ratio(m.log_above, m.log_below);
    out.p_value = std::min(1.0, 2.0 * std::min(out.p_lower, out.p_upper));
    if (options.kind == IntervalKind::umpu) {
        const UmpuCutoffs cut = trunc_gauss_umpu_cutoffs(mu0, sd, support, alpha);
        out.reject = umpu_decision(z, 0.5, cut);
        out.diagnostics.k1_residual = std::abs(cut.k1_residual);
        out.diagnostics.k2_residual = std::abs(cut.k2_residual);
    } else {
        out.reject = out.p_value <= alpha;
    }
    out.diagnostics.ess = kInf;
    if (options.with_interval) {
        const auto ci = trunc_gauss_interval(z, sd, support, alpha, options.kind);
        out.ci_lo = ci.first;
        out.ci_hi = ci.second;
    }
    return out;
}

std::pair<double, double> saturated_z_interval(const RegressionProblem& problem, const SelectionRegion& region,
                                               double alpha, IntervalKind kind) {
    problem.validate();
    require(problem.sigma.has_value(), "saturated_z_interval: sigma must be known");
    const Eigen::VectorXd eta = eta_vector(problem.X, problem.model, problem.target);
    const IntervalUnion support = truncation_set(problem.y, eta, region);
    return trunc_gauss_interval(eta.dot(problem.y), *problem.sigma * eta.norm(), support, alpha, kind);
}

void saturated_t_test(const RegressionProblem&, const SelectionRegion&) {
    throw PreconditionError(
        "saturated-model t-test is not available: once |y| and the component orthogonal to eta are fixed, "
        "eta'y is determined up to sign and carries no information about the mean");
}

double leftover_information(double mu, double threshold) {
    const double a = threshold - mu;
    const double lambda = 1.0 / mills_ratio(a);
    return 1.0 - lambda * (lambda - a);
}

} // namespace selektor
