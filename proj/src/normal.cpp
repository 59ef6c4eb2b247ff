#include "selektor/normal.hpp"

#include "selektor/errors.hpp"
#include "selektor/region.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace selektor {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kMillsSwitch = 8.0;

// Lentz evaluation of R(x) = 1/(x+ 1/(x+ 2/(x+ 3/(x+ ...)))), x >= 8.
double mills_continued_fraction(double x) {
    constexpr double tiny = 1e-300;
    double f = x;
    double c = x;
    double d = 0.0;
    for (int k = 1; k < 500; ++k) {
        d = x + k * d;
        if (std::abs(d) < tiny) d = tiny;
        c = x + k / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return 1.0 / f;
}

} // namespace

double norm_pdf(double x) { return std::exp(log_norm_pdf(x)); }

double log_norm_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double norm_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double mills_ratio(double x) {
    if (x >= kMillsSwitch) return mills_continued_fraction(x);
    return std::exp(log_norm_sf(x) - log_norm_pdf(x));
}

double log_norm_sf(double x) {
    if (std::isnan(x)) return kNaN;
    if (x == kInf) return -kInf;
    if (x == -kInf) return 0.0;
    if (x < kMillsSwitch) {
        if (x < -kMillsSwitch) return std::log1p(-norm_sf(-x));
        return std::log(norm_sf(x));
    }
    return log_norm_pdf(x) + std::log(mills_continued_fraction(x));
}

double log_norm_cdf(double x) { return log_norm_sf(-x); }

double log_add_exp(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == -kInf) return a;
    return a + std::log1p(std::exp(b - a));
}

double log_sub_exp(double a, double b) {
    if (b == -kInf) return a;
    if (b >= a) return -kInf;
    return a + std::log1p(-std::exp(b - a));
}

double log_norm_interval_mass(double a, double b) {
    if (!(a < b)) return -kInf;
    if (a >= 0.0) return log_sub_exp(log_norm_sf(a), log_norm_sf(b));
    if (b <= 0.0) return log_sub_exp(log_norm_cdf(b), log_norm_cdf(a));
    // straddles zero: both tails are at most 1/2, no cancellation
    return std::log1p(-(norm_sf(b) + norm_cdf(a)));
}

double norm_quantile(double p) {
    require(p > 0.0 && p < 1.0, "norm_quantile: p must lie in (0,1)");
    return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double sample_truncated_standard_normal(double a, double b, Rng& rng) {
    require(a < b, "truncated normal: empty interval");
    if (b <= 0.0) return -sample_truncated_standard_normal(-b, -a, rng);

    if (a >= 0.0) {
        // upper tail piece
        if (b < kInf && (b - a) * (a + b) <= 2.0) {
            for (;;) {
                const double z = a + (b - a) * uniform01(rng);
                if (uniform01(rng) <= std::exp(0.5 * (a * a - z * z))) return z;
            }
        }
        const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
        for (;;) {
            const double z = a - std::log(uniform01(rng)) / rate;
            if (z > b) continue;
            if (uniform01(rng) <= std::exp(-0.5 * (z - rate) * (z - rate))) return z;
        }
    }

    // a < 0 < b
    if (b - a < 2.0) {
        for (;;) {
            const double z = a + (b - a) * uniform01(rng);
            if (uniform01(rng) <= std::exp(-0.5 * z * z)) return z;
        }
    }
    std::normal_distribution<double> gauss;
    for (;;) {
        const double z = gauss(rng);
        if (z >= a && z <= b) return z;
    }
}

double sample_truncated_normal(double mean, double sd, const IntervalUnion& support, Rng& rng) {
    require(sd > 0.0, "truncated normal: sd must be positive");
    const auto& pieces = support.intervals();
    require(!pieces.empty(), "truncated normal: empty support");

    auto standardize = [&](double x) { return (x - mean) / sd; };
    if (pieces.size() == 1) {
        return mean + sd * sample_truncated_standard_normal(standardize(pieces[0].lo),
                                                            standardize(pieces[0].hi), rng);
    }

    std::vector<double> log_mass(pieces.size());
    double top = -kInf;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        log_mass[i] = log_norm_interval_mass(standardize(pieces[i].lo), standardize(pieces[i].hi));
        top = std::max(top, log_mass[i]);
    }
    if (top == -kInf) throw FarTailError("truncated normal: support carries no mass");
    double total = 0.0;
    for (double& m : log_mass) {
        m = std::exp(m - top);
        total += m;
    }
    double pick = uniform01(rng) * total;
    std::size_t k = 0;
    for (; k + 1 < pieces.size(); ++k) {
        if (pick < log_mass[k]) break;
        pick -= log_mass[k];
    }
    return mean + sd * sample_truncated_standard_normal(standardize(pieces[k].lo),
                                                        standardize(pieces[k].hi), rng);
}

} // namespace selektor
