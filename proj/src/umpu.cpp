#include "selektor/umpu.hpp"

#include "selektor/errors.hpp"
#include "selektor/normal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

namespace selektor {

bool Diagnostics::has_flag(const std::string& f) const {
    return std::find(flags.begin(), flags.end(), f) != flags.end();
}

void Diagnostics::flag(const std::string& f) {
    if (!has_flag(f)) flags.push_back(f);
}

EmpiricalFamily::EmpiricalFamily(const TiltedSampleSet& samples, bool exact)
    : samples_(samples), raw_size_(samples.size()), exact_(exact) {
    const auto& pts = samples.points();
    const auto& lw = samples.log_weights();
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pts[a] < pts[b]; });
    for (std::size_t i : order) {
        if (lw[i] == -kInf) continue;
        if (!z_.empty() && pts[i] == z_.back()) {
            log_w_.back() = log_add_exp(log_w_.back(), lw[i]);
        } else {
            z_.push_back(pts[i]);
            log_w_.push_back(lw[i]);
        }
    }
}

std::vector<double> EmpiricalFamily::probabilities(double theta) const {
    const double shift = theta - samples_.reference_theta();
    std::vector<double> p(z_.size());
    double m = -kInf;
    for (std::size_t j = 0; j < z_.size(); ++j) {
        p[j] = log_w_[j] + shift * z_[j];
        m = std::max(m, p[j]);
    }
    if (!std::isfinite(m)) throw DegenerateTiltError("tilted weights degenerate at theta");
    double total = 0.0;
    for (double& v : p) {
        v = std::exp(v - m);
        total += v;
    }
    for (double& v : p) v /= total;
    return p;
}

double EmpiricalFamily::ess(double theta) const { return effective_sample_size(samples_, theta); }

namespace {

struct TailProbabilities {
    double at_or_above = 0.0;
    double at_or_below = 0.0;
};

TailProbabilities tail_probabilities(const EmpiricalFamily& fam, double z_obs, double theta) {
    const std::vector<double> p = fam.probabilities(theta);
    const auto& z = fam.atoms();
    TailProbabilities t;
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (z[j] >= z_obs) t.at_or_above += p[j];
        if (z[j] <= z_obs) t.at_or_below += p[j];
    }
    t.at_or_above = std::min(t.at_or_above, 1.0);
    t.at_or_below = std::min(t.at_or_below, 1.0);
    return t;
}

double rank_p(double tail, std::size_t n) {
    const double nn = static_cast<double>(n);
    return std::min(1.0, (1.0 + nn * tail) / (nn + 1.0));
}

double family_p(double tail, const EmpiricalFamily& fam) {
    return fam.exact() ? std::min(tail, 1.0) : rank_p(tail, fam.raw_size());
}

void check_alpha(double alpha) { require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)"); }

} // namespace

TestOutcome one_sided_mc_test(double z_obs, const TiltedSampleSet& samples, double theta0, double alpha) {
    check_alpha(alpha);
    const EmpiricalFamily fam(samples);
    const TailProbabilities t = tail_probabilities(fam, z_obs, theta0);
    TestOutcome out;
    out.statistic = z_obs;
    out.p_upper = rank_p(t.at_or_above, samples.size());
    out.p_lower = rank_p(t.at_or_below, samples.size());
    out.p_value = out.p_upper;
    out.reject = out.p_upper <= alpha;
    out.diagnostics.ess = effective_sample_size(samples, theta0);
    out.diagnostics.n_samples = samples.size();
    if ((samples.size() + 1.0) * alpha < 1.0) out.diagnostics.flag("cannot_reject");
    if (out.diagnostics.ess < kEssWarning) out.diagnostics.flag("low_ess");
    return out;
}

TestOutcome equal_tailed_test(double z_obs, const EmpiricalFamily& fam, double theta0, double alpha) {
    check_alpha(alpha);
    const TailProbabilities t = tail_probabilities(fam, z_obs, theta0);
    TestOutcome out;
    out.statistic = z_obs;
    out.p_upper = family_p(t.at_or_above, fam);
    out.p_lower = family_p(t.at_or_below, fam);
    out.p_value = std::min(1.0, 2.0 * std::min(out.p_lower, out.p_upper));
    out.reject = out.p_value <= alpha;
    out.diagnostics.ess = fam.ess(theta0);
    out.diagnostics.n_samples = fam.raw_size();
    if (!fam.exact() && (fam.raw_size() + 1.0) * alpha / 2.0 < 1.0) out.diagnostics.flag("cannot_reject");
    if (out.diagnostics.ess < kEssWarning) out.diagnostics.flag("low_ess");
    return out;
}

TestOutcome equal_tailed_test(double z_obs, const TiltedSampleSet& samples, double theta0, double alpha) {
    return equal_tailed_test(z_obs, EmpiricalFamily(samples), theta0, alpha);
}

UmpuCutoffs solve_umpu_cutoffs(const EmpiricalFamily& fam, double theta0, double alpha) {
    check_alpha(alpha);
    const std::vector<double> p = fam.probabilities(theta0);
    const auto& z = fam.atoms();
    const std::size_t J = z.size();

    double mean = 0.0;
    for (std::size_t j = 0; j < J; ++j) mean += p[j] * z[j];
    double var = 0.0;
    for (std::size_t j = 0; j < J; ++j) var += p[j] * (z[j] - mean) * (z[j] - mean);
    const double scale = std::max(std::sqrt(var), 1e-300);

    // cumulative mass C[j] = P(Z <= z_j), first moment M[j] of centred Z
    std::vector<double> C(J), M(J);
    double c = 0.0, m = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        c += p[j];
        m += p[j] * (z[j] - mean);
        C[j] = c;
        M[j] = m;
    }
    const double total = C.back();
    // G(s) = integral of the quantile function of centred Z over [0, s]
    auto atom_at = [&](double s) {
        const auto it = std::lower_bound(C.begin(), C.end(), s);
        return std::min<std::size_t>(static_cast<std::size_t>(it - C.begin()), J - 1);
    };
    auto G = [&](double s) {
        s = std::clamp(s, 0.0, total);
        const std::size_t j = atom_at(s);
        const double c_prev = j ? C[j - 1] : 0.0;
        const double m_prev = j ? M[j - 1] : 0.0;
        return m_prev + (s - c_prev) * (z[j] - mean);
    };
    const double g1 = G(total);
    auto f = [&](double s1) { return G(s1) - G(s1 + total - alpha) + (1.0 - alpha) * g1; };

    UmpuCutoffs out;
    double lo = 0.0, hi = alpha;
    const double flo = f(lo), fhi = f(hi);
    const double eps = 1e-14 * scale;
    if (flo <= eps || fhi >= -eps) out.one_sided_degenerate = true;
    double s1;
    if (flo <= 0.0) {
        s1 = 0.0;
    } else if (fhi >= 0.0) {
        s1 = alpha;
    } else {
        for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) lo = mid;
            else hi = mid;
        }
        s1 = 0.5 * (lo + hi);
    }

    // lower cutoff: atom holding position s1 (strictly)
    {
        std::size_t j = static_cast<std::size_t>(std::upper_bound(C.begin(), C.end(), s1) - C.begin());
        j = std::min(j, J - 1);
        const double c_prev = j ? C[j - 1] : 0.0;
        out.lower.c = z[j];
        out.lower.gamma = std::clamp((s1 - c_prev) / p[j], 0.0, 1.0);
    }
    {
        const double s2 = std::min(s1 + total - alpha, total);
        const std::size_t j = atom_at(s2);
        const double c_prev = j ? C[j - 1] : 0.0;
        out.upper.c = z[j];
        out.upper.gamma = std::clamp(1.0 - (s2 - c_prev) / p[j], 0.0, 1.0);
    }

    // residuals of the level and unbiasedness equations, evaluated afresh
    double k1 = -alpha, k2 = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        double phi = 0.0;
        if (z[j] < out.lower.c || z[j] > out.upper.c) phi = 1.0;
        if (z[j] == out.lower.c) phi += out.lower.gamma;
        if (z[j] == out.upper.c) phi += out.upper.gamma;
        phi = std::min(phi, 1.0);
        k1 += p[j] * phi;
        k2 += p[j] * (z[j] - mean) * (phi - alpha);
    }
    out.k1_residual = k1;
    out.k2_residual = k2;
    out.ess = fam.ess(theta0);
    return out;
}

UmpuCutoffs solve_umpu_cutoffs(const TiltedSampleSet& samples, double theta0, double alpha) {
    return solve_umpu_cutoffs(EmpiricalFamily(samples), theta0, alpha);
}

int umpu_side(double z_obs, double u, const UmpuCutoffs& cut) {
    if (z_obs < cut.lower.c || (z_obs == cut.lower.c && u < cut.lower.gamma)) return 1;
    if (z_obs > cut.upper.c || (z_obs == cut.upper.c && u > 1.0 - cut.upper.gamma)) return -1;
    return 0;
}

bool umpu_decision(double z_obs, double u, const UmpuCutoffs& cutoffs) {
    return umpu_side(z_obs, u, cutoffs) != 0;
}

TestOutcome umpu_mc_test(double z_obs, double u, const TiltedSampleSet& samples, double theta0,
                         double alpha) {
    const EmpiricalFamily fam(samples);
    TestOutcome out = equal_tailed_test(z_obs, fam, theta0, alpha);
    const UmpuCutoffs cut = solve_umpu_cutoffs(fam, theta0, alpha);
    out.aux_uniform = u;
    out.reject = umpu_decision(z_obs, u, cut);
    out.diagnostics.k1_residual = std::abs(cut.k1_residual);
    out.diagnostics.k2_residual = std::abs(cut.k2_residual);
    if (cut.one_sided_degenerate) out.diagnostics.flag("one_sided_degenerate");
    return out;
}

namespace {

using StateFn = std::function<int(double)>;

struct Endpoints {
    double lo;
    double hi;
    std::vector<std::string> flags;
};

// state: -1 below the acceptance set, 0 inside, +1 above; nondecreasing in theta.
Endpoints invert_states(const StateFn& state, const InversionOptions& opt, double theta_lo,
                        double theta_hi) {
    Endpoints e{-kInf, kInf, {}};
    const double start = std::clamp(opt.theta_start, theta_lo, theta_hi);
    const int s0 = state(start);

    // lower endpoint: boundary between {-1} and {>= 0}
    {
        double a = kNaN, b = kNaN;
        if (s0 >= 0) {
            b = start;
            double step = opt.initial_step;
            for (;;) {
                const double t = std::max(start - step, theta_lo);
                if (state(t) == -1) {
                    a = t;
                    break;
                }
                b = t;
                if (t <= theta_lo || step > opt.max_span) break;
                step *= 2.0;
            }
        } else {
            a = start;
            double step = opt.initial_step;
            for (;;) {
                const double t = std::min(start + step, theta_hi);
                if (state(t) >= 0) {
                    b = t;
                    break;
                }
                a = t;
                if (t >= theta_hi || step > opt.max_span) break;
                step *= 2.0;
            }
            if (std::isnan(b)) throw NumericalError("confidence interval: test rejects at every parameter value");
        }
        if (std::isnan(a)) {
            e.flags.push_back("unbounded_lower");
        } else {
            while (b - a > opt.tol) {
                const double mid = 0.5 * (a + b);
                if (state(mid) == -1) a = mid;
                else b = mid;
            }
            e.lo = 0.5 * (a + b);
        }
    }
    // upper endpoint: boundary between {<= 0} and {+1}
    {
        double c = kNaN, d = kNaN;
        if (s0 <= 0) {
            c = start;
            double step = opt.initial_step;
            for (;;) {
                const double t = std::min(start + step, theta_hi);
                if (state(t) == 1) {
                    d = t;
                    break;
                }
                c = t;
                if (t >= theta_hi || step > opt.max_span) break;
                step *= 2.0;
            }
        } else {
            d = start;
            double step = opt.initial_step;
            for (;;) {
                const double t = std::max(start - step, theta_lo);
                if (state(t) <= 0) {
                    c = t;
                    break;
                }
                d = t;
                if (t <= theta_lo || step > opt.max_span) break;
                step *= 2.0;
            }
            if (std::isnan(c)) throw NumericalError("confidence interval: test rejects at every parameter value");
        }
        if (std::isnan(d)) {
            e.flags.push_back("unbounded_upper");
        } else {
            while (d - c > opt.tol) {
                const double mid = 0.5 * (c + d);
                if (state(mid) == 1) d = mid;
                else c = mid;
            }
            e.hi = 0.5 * (c + d);
        }
    }
    if (e.lo > e.hi) {
        const double mid = 0.5 * (e.lo + e.hi);
        e.lo = e.hi = mid;
        e.flags.push_back("empty_acceptance");
    }
    return e;
}

StateFn make_state(const EmpiricalFamily& fam, double z_obs, double u, double alpha, IntervalKind kind) {
    if (kind == IntervalKind::umpu) {
        return [&fam, z_obs, u, alpha](double theta) {
            return umpu_side(z_obs, u, solve_umpu_cutoffs(fam, theta, alpha));
        };
    }
    return [&fam, z_obs, alpha](double theta) {
        const TailProbabilities t = tail_probabilities(fam, z_obs, theta);
        if (family_p(t.at_or_above, fam) <= alpha / 2.0) return -1;
        if (family_p(t.at_or_below, fam) <= alpha / 2.0) return 1;
        return 0;
    };
}

// Verify the frozen state function is monotone across the reported interval.
void verify_monotone(const StateFn& state, const Endpoints& e, double step) {
    const double lo = std::isfinite(e.lo) ? e.lo : (std::isfinite(e.hi) ? e.hi - 10 * step : -10 * step);
    const double hi = std::isfinite(e.hi) ? e.hi : lo + 10 * step;
    const double pad = 0.25 * (hi - lo) + step;
    int prev = -2;
    for (int i = 0; i <= 40; ++i) {
        const double t = (lo - pad) + (hi - lo + 2 * pad) * i / 40.0;
        const int s = state(t);
        if (s < prev) {
            throw NumericalError(
                "confidence interval: test decision is not monotone in theta; "
                "the importance weights have collapsed, use more reference points or larger samples");
        }
        prev = s;
    }
}

IntervalResult interval_on_fixed(double z_obs, double u, const EmpiricalFamily& fam, double alpha,
                                 IntervalKind kind, const InversionOptions& opt, double theta_lo,
                                 double theta_hi) {
    const StateFn state = make_state(fam, z_obs, u, alpha, kind);
    const Endpoints e = invert_states(state, opt, theta_lo, theta_hi);
    IntervalResult r;
    r.lo = e.lo;
    r.hi = e.hi;
    r.flags = e.flags;
    double min_ess = kInf;
    for (double t : {e.lo, e.hi}) {
        if (std::isfinite(t)) min_ess = std::min(min_ess, fam.ess(t));
    }
    r.min_ess = std::isfinite(min_ess) ? min_ess : fam.ess(opt.theta_start);
    if (r.min_ess < kEssWarning) r.flags.push_back("low_ess");
    return r;
}

IntervalResult adaptive_interval(double z_obs, double u, const NaturalFamily1D& family, double alpha,
                                 IntervalKind kind, const InversionOptions& opt) {
    require(static_cast<bool>(family.sample_at), "NaturalFamily1D has no sampler");
    std::vector<TiltedSampleSet> sets;
    sets.push_back(family.sample_at(opt.theta_start, 0));
    const double threshold = std::max(opt.min_ess, opt.ess_fraction * static_cast<double>(sets[0].size()));
    auto fam = std::make_unique<EmpiricalFamily>(sets[0]);

    auto refresh_if_needed = [&](double theta) {
        if (static_cast<int>(sets.size()) >= opt.max_reference_sets) return;
        if (fam->ess(theta) >= threshold) return;
        sets.push_back(family.sample_at(theta, sets.size()));
        fam = std::make_unique<EmpiricalFamily>(pool_tilted(sets));
    };
    auto live_state = [&](double theta) {
        refresh_if_needed(theta);
        return make_state(*fam, z_obs, u, alpha, kind)(theta);
    };
    invert_states(live_state, opt, family.theta_lo, family.theta_hi);

    // final pass on the frozen pool
    IntervalResult r = interval_on_fixed(z_obs, u, *fam, alpha, kind, opt, family.theta_lo, family.theta_hi);
    verify_monotone(make_state(*fam, z_obs, u, alpha, kind), Endpoints{r.lo, r.hi, {}}, opt.initial_step);
    r.reference_sets = static_cast<int>(sets.size());
    return r;
}

} // namespace

IntervalResult confidence_interval(double z_obs, double u, const EmpiricalFamily& family, double alpha,
                                   IntervalKind kind, const InversionOptions& options) {
    check_alpha(alpha);
    return interval_on_fixed(z_obs, u, family, alpha, kind, options, -kInf, kInf);
}

IntervalResult confidence_interval_from_samples(double z_obs, double u, const TiltedSampleSet& samples,
                                                double alpha, IntervalKind kind,
                                                const InversionOptions& options) {
    check_alpha(alpha);
    const EmpiricalFamily fam(samples);
    return interval_on_fixed(z_obs, u, fam, alpha, kind, options, -kInf, kInf);
}

IntervalResult umpu_confidence_interval(double z_obs, double u, const NaturalFamily1D& family, double alpha,
                                        const InversionOptions& options) {
    check_alpha(alpha);
    return adaptive_interval(z_obs, u, family, alpha, IntervalKind::umpu, options);
}

IntervalResult equal_tailed_confidence_interval(double z_obs, const NaturalFamily1D& family, double alpha,
                                                const InversionOptions& options) {
    check_alpha(alpha);
    return adaptive_interval(z_obs, 0.5, family, alpha, IntervalKind::equal_tailed, options);
}

} // namespace selektor
