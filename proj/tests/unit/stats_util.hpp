#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace selektor::testing {

// Two-sided one-sample Kolmogorov-Smirnov statistic against a continuous cdf.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

// Asymptotic p-value with Stephens' small-sample correction.
inline double ks_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double t = (sn + 0.12 + 0.11 / sn) * d;
    if (t < 0.2) return 1.0;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * t * t);
        p += (k % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

inline double ks_uniform_pvalue(const std::vector<double>& u) {
    return ks_pvalue(ks_statistic(u, [](double x) { return std::clamp(x, 0.0, 1.0); }), u.size());
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& x) {
    MeanSe r;
    const double n = static_cast<double>(x.size());
    for (double v : x) r.mean += v;
    r.mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - r.mean) * (v - r.mean);
    r.se = std::sqrt(ss / (n - 1.0) / n);
    return r;
}

// Self-normalized weighted mean with its delta-method standard error.
inline MeanSe weighted_mean_se(const std::vector<double>& x, const std::vector<double>& w) {
    double sw = 0.0, m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        m += w[i] * x[i];
    }
    m /= sw;
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) v += w[i] * w[i] * (x[i] - m) * (x[i] - m);
    return {m, std::sqrt(v) / sw};
}

} // namespace selektor::testing
