#include "selektor/tilted.hpp"

#include "selektor/errors.hpp"
#include "selektor/normal.hpp"

#include <algorithm>
#include <cmath>

namespace selektor {

namespace {

std::vector<double> tilted_log_weights(const TiltedSampleSet& s, double theta) {
    const double shift = theta - s.reference_theta();
    std::vector<double> e(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        e[i] = s.log_weights()[i] + (shift == 0.0 ? 0.0 : shift * s.points()[i]);
    }
    return e;
}

double max_finite(const std::vector<double>& e) {
    double m = -kInf;
    for (double v : e) {
        if (std::isnan(v) || v == kInf) throw DegenerateTiltError("tilted weight overflowed");
        m = std::max(m, v);
    }
    if (m == -kInf) throw DegenerateTiltError("all tilted weights are zero");
    return m;
}

double log_sum_exp(const std::vector<double>& e) {
    const double m = max_finite(e);
    double s = 0.0;
    for (double v : e) s += std::exp(v - m);
    return m + std::log(s);
}

} // namespace

TiltedSampleSet::TiltedSampleSet(std::vector<double> points, std::vector<double> weights,
                                 double reference_theta)
    : points_(std::move(points)), reference_theta_(reference_theta) {
    require(points_.size() == weights.size(), "TiltedSampleSet: points and weights differ in length");
    log_weights_.resize(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        require(weights[i] >= 0.0 && std::isfinite(weights[i]),
                "TiltedSampleSet: weights must be finite and nonnegative");
        log_weights_[i] = weights[i] > 0.0 ? std::log(weights[i]) : -kInf;
    }
    validate();
}

TiltedSampleSet TiltedSampleSet::unit_weights(std::vector<double> points, double reference_theta) {
    std::vector<double> lw(points.size(), 0.0);
    return from_log_weights(std::move(points), std::move(lw), reference_theta);
}

TiltedSampleSet TiltedSampleSet::from_log_weights(std::vector<double> points,
                                                  std::vector<double> log_weights,
                                                  double reference_theta) {
    require(points.size() == log_weights.size(),
            "TiltedSampleSet: points and weights differ in length");
    TiltedSampleSet s;
    s.points_ = std::move(points);
    s.log_weights_ = std::move(log_weights);
    s.reference_theta_ = reference_theta;
    s.validate();
    return s;
}

void TiltedSampleSet::validate() const {
    require(!points_.empty(), "TiltedSampleSet: empty sample");
    bool any_positive = false;
    for (std::size_t i = 0; i < points_.size(); ++i) {
        require(std::isfinite(points_[i]), "TiltedSampleSet: non-finite point");
        require(!std::isnan(log_weights_[i]) && log_weights_[i] < kInf,
                "TiltedSampleSet: invalid weight");
        any_positive = any_positive || log_weights_[i] > -kInf;
    }
    require(any_positive, "TiltedSampleSet: all weights are zero");
}

std::vector<double> TiltedSampleSet::weights() const {
    std::vector<double> w(size());
    for (std::size_t i = 0; i < size(); ++i) w[i] = std::exp(log_weights_[i]);
    return w;
}

std::vector<double> TiltedSampleSet::tilted_probabilities(double theta) const {
    std::vector<double> e = tilted_log_weights(*this, theta);
    const double m = max_finite(e);
    double total = 0.0;
    for (double& v : e) {
        v = std::exp(v - m);
        total += v;
    }
    for (double& v : e) v /= total;
    return e;
}

double tilted_expectation(const TiltedSampleSet& samples, const std::function<double(double)>& h,
                          double theta) {
    const std::vector<double> p = samples.tilted_probabilities(theta);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        num += p[i] * h(samples.points()[i]);
        den += p[i];
    }
    return num / den;
}

double effective_sample_size(const TiltedSampleSet& samples, double theta) {
    const std::vector<double> p = samples.tilted_probabilities(theta);
    double s1 = 0.0, s2 = 0.0;
    for (double v : p) {
        s1 += v;
        s2 += v * v;
    }
    return s1 * s1 / s2;
}

TiltedSampleSet pool_tilted(const std::vector<TiltedSampleSet>& sets) {
    require(!sets.empty(), "pool_tilted: no sample sets");
    if (sets.size() == 1) return sets.front();

    const std::size_t K = sets.size();
    std::vector<double> z, log_wbar, theta(K), log_n(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& s = sets[k];
        theta[k] = s.reference_theta();
        log_n[k] = std::log(static_cast<double>(s.size()));
        // within-set weights rescaled to sum to the set size
        const double lse = log_sum_exp(s.log_weights());
        for (std::size_t i = 0; i < s.size(); ++i) {
            z.push_back(s.points()[i]);
            log_wbar.push_back(s.log_weights()[i] - lse + log_n[k]);
        }
    }
    const std::size_t N = z.size();

    // psi[k]: log normalizer of the reference law k relative to the carrier.
    // Self-consistent iteration: psi_k = log sum_i wbar_i exp(theta_k z_i) / D_i,
    // D_i = sum_l n_l exp(theta_l z_i - psi_l).
    std::vector<double> psi(K, 0.0), log_den(N), term(N);
    for (int iter = 0; iter < 1000; ++iter) {
        for (std::size_t i = 0; i < N; ++i) {
            double m = -kInf;
            for (std::size_t l = 0; l < K; ++l) m = std::max(m, log_n[l] + theta[l] * z[i] - psi[l]);
            double s = 0.0;
            for (std::size_t l = 0; l < K; ++l) s += std::exp(log_n[l] + theta[l] * z[i] - psi[l] - m);
            log_den[i] = m + std::log(s);
        }
        double change = 0.0;
        std::vector<double> next(K);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t i = 0; i < N; ++i) term[i] = log_wbar[i] + theta[k] * z[i] - log_den[i];
            next[k] = log_sum_exp(term);
        }
        const double anchor = next[0];
        for (std::size_t k = 0; k < K; ++k) {
            next[k] -= anchor;
            change = std::max(change, std::abs(next[k] - psi[k]));
        }
        psi = std::move(next);
        if (change < 1e-11) break;
    }

    std::vector<double> log_w(N);
    for (std::size_t i = 0; i < N; ++i) log_w[i] = log_wbar[i] - log_den[i];
    return TiltedSampleSet::from_log_weights(std::move(z), std::move(log_w), 0.0);
}

} // namespace selektor
