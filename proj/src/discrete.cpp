#include "selektor/discrete.hpp"

#include "selektor/errors.hpp"
#include "selektor/normal.hpp"
#include "selektor/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace selektor {

void TrialData::validate() const {
    require(counts.size() == sizes.size(), "TrialData: counts and sizes differ in length");
    require(counts.size() >= 2, "TrialData: needs a placebo arm and at least one treatment");
    for (std::size_t j = 0; j < counts.size(); ++j) {
        require(sizes[j] > 0, "TrialData: arm sizes must be positive");
        require(counts[j] >= 0 && counts[j] <= sizes[j], "TrialData: counts must lie in [0, size]");
    }
    require(k >= 1 && k < treatments(), "TrialData: k must satisfy 1 <= k < number of treatments");
}

namespace {

// y_a / n_a < y_b / n_b, exactly
bool rate_less(std::int64_t ya, std::int64_t na, std::int64_t yb, std::int64_t nb) { return ya * nb < yb * na; }

bool arm_selected(const TrialData& d, int j, int count_j) {
    int lower = 0;
    for (int i = 1; i <= d.treatments(); ++i) {
        if (i == j) continue;
        if (rate_less(d.counts[i], d.sizes[i], count_j, d.sizes[j])) ++lower;
    }
    return lower < d.k;
}

} // namespace

std::vector<int> clinical_select(const TrialData& data) {
    data.validate();
    std::vector<int> out;
    for (int j = 1; j <= data.treatments(); ++j) {
        if (arm_selected(data, j, data.counts[j])) out.push_back(j);
    }
    return out;
}

double log_binomial(int n, int k) {
    require(n >= 0, "log_binomial: n must be nonnegative");
    if (k < 0 || k > n) return -kInf;
    k = std::min(k, n - k);
    if (n <= 60) {
        // exact: each partial product i * C(n - k + i, i) fits in 64 bits
        std::uint64_t c = 1;
        for (int i = 1; i <= k; ++i) c = c * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
        return std::log(static_cast<double>(c));
    }
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

ConditionalSupport fisher_conditional_support(const TrialData& data, int arm) {
    data.validate();
    require(arm >= 1 && arm <= data.treatments(), "selective_fisher_test: arm index out of range");
    require(arm_selected(data, arm, data.counts[arm]), "selective_fisher_test: the arm was not selected");
    const int n0 = data.sizes[0];
    const int nj = data.sizes[arm];
    const int s = data.counts[0] + data.counts[arm];
    ConditionalSupport sup;
    for (int y = std::max(0, s - n0); y <= std::min(nj, s); ++y) {
        if (!arm_selected(data, arm, y)) continue;
        sup.values.push_back(y);
        sup.log_weights.push_back(log_binomial(n0, s - y) + log_binomial(nj, y));
    }
    return sup;
}

TestOutcome selective_fisher_test(const TrialData& data, int arm, double beta0, double alpha,
                                  const FisherOptions& options) {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    const ConditionalSupport sup = fisher_conditional_support(data, arm);
    const double y_obs = data.counts[arm];
    double u;
    if (options.u) {
        u = *options.u;
    } else {
        Rng rng = make_rng(options.seed, 0x66u);
        u = uniform01(rng);
    }
    TestOutcome out;
    out.statistic = y_obs;
    out.aux_uniform = u;
    out.diagnostics.seed = options.seed;
    out.diagnostics.n_samples = sup.values.size();
    out.diagnostics.ess = static_cast<double>(sup.values.size());
    if (sup.values.size() == 1) {
        out.diagnostics.flag("degenerate_support");
        out.ci_lo = -kInf;
        out.ci_hi = kInf;
        return out;
    }

    // natural parameter of the count is -beta
    std::vector<double> pts(sup.values.begin(), sup.values.end());
    const EmpiricalFamily fam(TiltedSampleSet::from_log_weights(pts, sup.log_weights, 0.0), true);
    const double theta0 = -beta0;
    const TestOutcome et = equal_tailed_test(y_obs, fam, theta0, alpha);
    out.p_value = et.p_value;
    out.p_lower = et.p_lower;
    out.p_upper = et.p_upper;
    const UmpuCutoffs cut = solve_umpu_cutoffs(fam, theta0, alpha);
    out.diagnostics.k1_residual = std::abs(cut.k1_residual);
    out.diagnostics.k2_residual = std::abs(cut.k2_residual);
    out.reject = options.kind == IntervalKind::umpu ? umpu_decision(y_obs, u, cut) : et.reject;

    if (options.with_interval) {
        InversionOptions inv;
        inv.theta_start = theta0;
        inv.max_span = 200.0;
        const IntervalResult r = confidence_interval(y_obs, u, fam, alpha, options.kind, inv);
        out.ci_lo = -r.hi;
        out.ci_hi = -r.lo;
        for (const auto& f : r.flags) out.diagnostics.flag(f);
    }
    return out;
}

double poisson_lr_statistic(int inside, int total, double length) {
    if (total <= 0 || !(length > 0.0) || length >= 1.0) return 0.0;
    const double T = inside;
    const double N = total;
    if (T / N <= length) return 0.0;
    double v = T * std::log(T / (N * length));
    if (inside < total) v += (N - T) * std::log((N - T) / (N * (1.0 - length)));
    return v;
}

ScanWindow scan_select(const std::vector<double>& points, const ScanStatistic& statistic) {
    const int N = static_cast<int>(points.size());
    require(N >= 2, "scan_select: needs at least two points");
    require(std::is_sorted(points.begin(), points.end()), "scan_select: points must be sorted");
    ScanWindow best;
    bool have = false;
    for (int i = 0; i < N; ++i) {
        for (int j = N - 1; j > i; --j) {
            const double v = statistic(j - i + 1, N, points[j] - points[i]);
            // strict improvement keeps the earliest (smaller i, larger j) maximizer
            if (!have || v > best.statistic) {
                best = {i, j, points[i], points[j], v};
                have = true;
            }
        }
    }
    return best;
}

namespace {

// true iff no pair beats (or ties ahead of) the window at (wi, wj)
bool window_still_selected(const std::vector<double>& pts, int wi, int wj, const ScanStatistic& statistic) {
    const int N = static_cast<int>(pts.size());
    const double target = statistic(wj - wi + 1, N, pts[wj] - pts[wi]);
    for (int i = 0; i < N; ++i) {
        for (int j = N - 1; j > i; --j) {
            if (i == wi && j == wj) continue;
            const double v = statistic(j - i + 1, N, pts[j] - pts[i]);
            if (v > target) return false;
            // equal value earlier in the scan order wins the tie
            if (v == target && (i < wi || (i == wi && j > wj))) return false;
        }
    }
    return true;
}

} // namespace

TestOutcome scan_test(const std::vector<double>& points, const ScanWindow& window, double alpha, int n_mc,
                      std::uint64_t seed, const ScanStatistic& statistic) {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    require(n_mc >= 1, "scan_test: n_mc must be positive");
    const int N = static_cast<int>(points.size());
    require(N >= 2, "scan_test: needs at least two points");
    require(window.i >= 0 && window.j < N && window.i < window.j, "scan_test: malformed window");
    require(points[window.i] == window.a && points[window.j] == window.b, "scan_test: window does not match points");
    const int t_obs = window.count();

    TestOutcome out;
    out.statistic = t_obs;
    out.diagnostics.seed = seed;
    Rng rng = make_rng(seed, 0);
    const double u = uniform01(rng);
    out.aux_uniform = u;
    if (t_obs == N) {
        out.p_value = out.p_upper = out.p_lower = 1.0;
        out.diagnostics.flag("degenerate_window");
        return out;
    }

    const double a = window.a, b = window.b;
    long accepted = 0, greater = 0, equal = 0;
    std::vector<double> pts(N);
    for (int m = 0; m < n_mc; ++m) {
        pts[0] = a;
        pts[1] = b;
        for (int r = 2; r < N; ++r) pts[r] = uniform01(rng);
        std::sort(pts.begin(), pts.end());
        const int wi = static_cast<int>(std::lower_bound(pts.begin(), pts.end(), a) - pts.begin());
        const int wj = static_cast<int>(std::lower_bound(pts.begin(), pts.end(), b) - pts.begin());
        if (!window_still_selected(pts, wi, wj, statistic)) continue;
        ++accepted;
        const int t = wj - wi + 1;
        if (t > t_obs) ++greater;
        else if (t == t_obs) ++equal;
    }
    const double rate = static_cast<double>(accepted) / n_mc;
    out.diagnostics.n_samples = static_cast<std::size_t>(accepted);
    out.diagnostics.ess = static_cast<double>(accepted);
    if (accepted == 0 || rate < 1e-4) {
        throw NumericalError("scan_test: conditional acceptance rate " + std::to_string(rate) +
                             " is below 1e-4; increase n_mc");
    }
    // randomized rank of the observed count among the accepted draws
    const double n = static_cast<double>(accepted);
    out.p_upper = (static_cast<double>(greater) + u * (static_cast<double>(equal) + 1.0)) / (n + 1.0);
    out.p_value = out.p_upper;
    out.p_lower = 1.0;
    out.reject = out.p_value <= alpha;
    if ((n + 1.0) * alpha < 1.0) out.diagnostics.flag("cannot_reject");
    return out;
}

} // namespace selektor
