#include "selektor/samplers.hpp"

#include "selektor/errors.hpp"
#include "selektor/normal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace selektor {

void ChainConfig::validate() const {
    require(burn_in >= 0, "ChainConfig: burn_in must be nonnegative");
    require(thin >= 1, "ChainConfig: thin must be at least 1");
    require(n_samples >= 1, "ChainConfig: n_samples must be at least 1");
    require(recompute_every >= 1, "ChainConfig: recompute_every must be at least 1");
}

std::vector<double> WeightedDraws::normalized_weights() const {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> out(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) out[i] = weights[i] / total;
    return out;
}

Eigen::MatrixXd null_space_basis(const Eigen::MatrixXd& C, Eigen::Index dim) {
    if (C.rows() == 0) return Eigen::MatrixXd::Identity(dim, dim);
    require(C.cols() == dim, "null_space_basis: dimension mismatch");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double tol = 1e-10 * std::max(1.0, s.size() ? s[0] : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) rank += s[i] > tol;
    return svd.matrixV().rightCols(dim - rank);
}

namespace {

// { t : t * image <= slack } without assuming the current point is inside.
Interval raw_chord(const Eigen::VectorXd& slack, const Eigen::VectorXd& image) {
    double lo = -kInf, hi = kInf;
    for (Eigen::Index i = 0; i < slack.size(); ++i) {
        const double a = image[i];
        if (a > 0.0) hi = std::min(hi, slack[i] / a);
        else if (a < 0.0) lo = std::max(lo, slack[i] / a);
        else if (slack[i] < -1e-9) return {1.0, -1.0};
    }
    return {lo, hi};
}

double sample_uniform_union(const IntervalUnion& u, Rng& rng) {
    double total = 0.0;
    for (const auto& iv : u.intervals()) total += iv.hi - iv.lo;
    require(std::isfinite(total) && total > 0.0, "uniform draw on an unbounded or empty set");
    double pick = uniform01(rng) * total;
    for (const auto& iv : u.intervals()) {
        const double w = iv.hi - iv.lo;
        if (pick <= w) return iv.lo + pick;
        pick -= w;
    }
    return u.intervals().back().hi;
}

} // namespace

SliceChain::SliceChain(const SelectionRegion& region, const Eigen::VectorXd& start, Target target,
                       const Eigen::VectorXd& mean, double sigma_or_radius,
                       const std::optional<AffineConstraint>& slice, DirectionScheme scheme,
                       const std::optional<Eigen::VectorXd>& focus, std::uint64_t seed, int recompute_every)
    : target_(target), scale_(sigma_or_radius), scheme_(scheme), rng_(seed), recompute_every_(recompute_every) {
    const Eigen::Index n = region.dim();
    require(start.size() == n, "SliceChain: start has wrong dimension");
    require(sigma_or_radius > 0.0, "SliceChain: scale must be positive");
    require(recompute_every >= 1, "SliceChain: recompute_every must be positive");
    if (slice) {
        require(slice->C.cols() == n && slice->C.rows() == slice->d.size(), "SliceChain: malformed slice");
        B_ = null_space_basis(slice->C, n);
    } else {
        B_ = Eigen::MatrixXd::Identity(n, n);
    }
    require(B_.cols() > 0, "SliceChain: the slice is a single point, nothing to sample");
    v_ = B_.transpose() * start;
    y0_ = start - B_ * v_;
    if (target_ == Target::gaussian) {
        require(mean.size() == n, "SliceChain: mean has wrong dimension");
        mean_v_ = B_.transpose() * mean;
    } else {
        radius_sq_v_ = scale_ * scale_ - y0_.squaredNorm();
        require(radius_sq_v_ > 0.0, "SliceChain: slice misses the ball");
        v_norm_sq_ = v_.squaredNorm();
        require(v_norm_sq_ <= radius_sq_v_ * (1.0 + 1e-9), "SliceChain: start lies outside the ball");
    }
    for (const auto& p : region.parts()) {
        G_.push_back(p.A * B_);
        h_.push_back(p.b - p.A * y0_);
    }
    slack_.resize(G_.size());
    recompute_slack();
    require(region.contains(point(), 1e-8), "SliceChain: start is not in the selection region");
    if (focus) {
        require(focus->size() == n, "SliceChain: focus has wrong dimension");
        Eigen::VectorXd f = B_.transpose() * *focus;
        if (f.norm() > 1e-12) {
            focus_v_ = f / f.norm();
            for (const auto& G : G_) focus_images_.push_back(G * *focus_v_);
        }
    }
}

void SliceChain::recompute_slack() {
    for (std::size_t p = 0; p < G_.size(); ++p) slack_[p] = h_[p] - G_[p] * v_;
    if (target_ == Target::uniform_ball) v_norm_sq_ = v_.squaredNorm();
}

IntervalUnion SliceChain::chord(const std::vector<Eigen::VectorXd>& images) const {
    std::vector<Interval> pieces;
    pieces.reserve(G_.size());
    for (std::size_t p = 0; p < G_.size(); ++p) {
        if (G_[p].rows() == 0) {
            pieces.push_back({-kInf, kInf});
        } else {
            pieces.push_back(raw_chord(slack_[p], images[p]));
        }
    }
    return IntervalUnion(std::move(pieces));
}

void SliceChain::move(double t, const Eigen::VectorXd& d, const std::vector<Eigen::VectorXd>& images) {
    v_ += t * d;
    for (std::size_t p = 0; p < G_.size(); ++p) slack_[p] -= t * images[p];
    ++steps_;
    if (steps_ % recompute_every_ == 0) {
        recompute_slack();
    } else if (target_ == Target::uniform_ball) {
        v_norm_sq_ = v_.squaredNorm();
    }
}

void SliceChain::step() {
    const Eigen::Index k = v_.size();
    Eigen::VectorXd d;
    std::vector<Eigen::VectorXd> images;
    images.reserve(G_.size());
    bool use_focus = false;
    if (scheme_ == DirectionScheme::coordinate) {
        use_focus = focus_v_ && uniform01(rng_) < 0.5;
        if (use_focus) {
            d = *focus_v_;
            images = focus_images_;
        } else {
            const Eigen::Index c = static_cast<Eigen::Index>(uniform01(rng_) * static_cast<double>(k));
            d = Eigen::VectorXd::Unit(k, std::min(c, k - 1));
            for (const auto& G : G_) images.push_back(G.col(std::min(c, k - 1)));
        }
    } else {
        std::normal_distribution<double> gauss;
        d.resize(k);
        for (Eigen::Index i = 0; i < k; ++i) d[i] = gauss(rng_);
        d.normalize();
        for (const auto& G : G_) images.push_back(G * d);
    }

    IntervalUnion line = chord(images);
    if (target_ == Target::uniform_ball) {
        const double vd = v_.dot(d);
        const double disc = vd * vd - v_norm_sq_ + radius_sq_v_;
        if (disc <= 0.0) {
            ++rejected_;
            return;
        }
        const double r = std::sqrt(disc);
        line = line.intersect(Interval{-vd - r, -vd + r});
    }
    if (line.empty()) {
        ++rejected_;
        return;
    }
    double t;
    try {
        if (target_ == Target::gaussian) {
            t = sample_truncated_normal(d.dot(mean_v_ - v_), scale_, line, rng_);
        } else {
            t = sample_uniform_union(line, rng_);
        }
    } catch (const NumericalError&) {
        ++rejected_;
        return;
    }
    if (!std::isfinite(t)) {
        ++rejected_;
        return;
    }
    move(t, d, images);
}

void SliceChain::run(int steps) {
    for (int i = 0; i < steps; ++i) step();
}

Eigen::VectorXd SliceChain::point() const { return y0_ + B_ * v_; }

std::pair<Eigen::VectorXd, double> SliceChain::functional(const Eigen::VectorXd& a) const {
    return {B_.transpose() * a, a.dot(y0_)};
}

Eigen::VectorXd find_feasible_point(const SelectionRegion& region, const std::optional<AffineConstraint>& slice,
                                    const Eigen::VectorXd& guess, int max_iter) {
    const Eigen::Index n = region.dim();
    require(guess.size() == n, "find_feasible_point: guess has wrong dimension");
    Eigen::MatrixXd B;
    Eigen::VectorXd y0;
    if (slice) {
        B = null_space_basis(slice->C, n);
        // particular solution of C y = d closest to the guess
        const Eigen::VectorXd r = slice->d - slice->C * guess;
        y0 = guess + slice->C.completeOrthogonalDecomposition().solve(r);
        if ((slice->C * y0 - slice->d).norm() > 1e-8 * (1.0 + slice->d.norm())) {
            throw NumericalError("find_feasible_point: affine slice is inconsistent");
        }
    } else {
        B = Eigen::MatrixXd::Identity(n, n);
        y0 = guess;
    }
    for (const auto& part : region.parts()) {
        if (part.rows() == 0) return y0;
        const Eigen::MatrixXd G = part.A * B;
        const Eigen::VectorXd h = part.b - part.A * y0;
        const Eigen::VectorXd margin = 1e-9 * (1.0 + h.array().abs()).matrix();
        Eigen::VectorXd v = Eigen::VectorXd::Zero(B.cols());
        const Eigen::VectorXd row_norm_sq = G.rowwise().squaredNorm();
        for (int it = 0; it < max_iter; ++it) {
            const Eigen::VectorXd slack = h - G * v - margin;
            Eigen::Index worst;
            const double s = slack.minCoeff(&worst);
            if (s >= 0.0) {
                const Eigen::VectorXd y = y0 + B * v;
                if (region.contains(y)) return y;
                break;
            }
            if (row_norm_sq[worst] < 1e-300) break;
            // overshoot a little past the violated face
            v += (1.5 * s - margin[worst]) / row_norm_sq[worst] * G.row(worst).transpose();
        }
    }
    throw NumericalError("find_feasible_point: no point of the region found on the slice");
}

WeightedDraws hit_and_run(const Eigen::VectorXd& mean, double sigma, const SelectionRegion& region,
                          const std::optional<AffineConstraint>& slice, const ChainConfig& config,
                          const std::optional<Eigen::VectorXd>& start) {
    config.validate();
    require(mean.size() == region.dim(), "hit_and_run: mean has wrong dimension");
    Eigen::VectorXd y;
    const bool start_ok = start && region.contains(*start) &&
                          (!slice || (slice->C * *start - slice->d).norm() <= 1e-8 * (1.0 + slice->d.norm()));
    y = start_ok ? *start : find_feasible_point(region, slice, start ? *start : mean);

    SliceChain chain(region, y, SliceChain::Target::gaussian, mean, sigma, slice, config.scheme, config.focus,
                     config.seed, config.recompute_every);
    chain.run(config.burn_in);
    WeightedDraws out;
    out.points.reserve(config.n_samples);
    for (int i = 0; i < config.n_samples; ++i) {
        chain.run(config.thin);
        out.points.push_back(chain.point());
    }
    out.weights.assign(out.points.size(), 1.0);
    out.rejected_steps = chain.rejected_steps();
    return out;
}

WeightedDraws rejection_sample(const Eigen::VectorXd& mean, double sigma, const SelectionRegion& region, int n,
                               std::uint64_t seed, double min_acceptance, int pilot) {
    require(n >= 1, "rejection_sample: n must be positive");
    require(sigma > 0.0, "rejection_sample: sigma must be positive");
    require(mean.size() == region.dim(), "rejection_sample: mean has wrong dimension");
    Rng rng(seed);
    std::normal_distribution<double> gauss;
    const Eigen::Index dim = mean.size();
    WeightedDraws out;
    auto draw = [&]() {
        Eigen::VectorXd y(dim);
        for (Eigen::Index i = 0; i < dim; ++i) y[i] = mean[i] + sigma * gauss(rng);
        return y;
    };
    long tried = 0;
    long accepted = 0;
    for (int i = 0; i < pilot; ++i) {
        Eigen::VectorXd y = draw();
        ++tried;
        if (region.contains(y, 0.0)) {
            ++accepted;
            if (static_cast<int>(out.points.size()) < n) out.points.push_back(std::move(y));
        }
    }
    const double pilot_rate = static_cast<double>(accepted) / static_cast<double>(tried);
    if (pilot_rate < min_acceptance) {
        throw NumericalError("rejection_sample: pilot acceptance rate " + std::to_string(pilot_rate) +
                             " is below the threshold; use hit_and_run for this region");
    }
    while (static_cast<int>(out.points.size()) < n) {
        Eigen::VectorXd y = draw();
        ++tried;
        if (region.contains(y, 0.0)) {
            ++accepted;
            out.points.push_back(std::move(y));
        }
    }
    out.weights.assign(out.points.size(), 1.0);
    out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(tried);
    return out;
}

WeightedDraws sphere_project_weights(const WeightedDraws& draws, int k, const SelectionRegion& region) {
    require(k >= 1 && region.dim() == k, "sphere_project_weights: dimension mismatch");
    require(draws.points.size() == draws.weights.size(), "sphere_project_weights: malformed draws");
    WeightedDraws out;
    std::vector<double> log_w;
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < draws.points.size(); ++i) {
        const Eigen::VectorXd& y = draws.points[i];
        require(y.size() == k, "sphere_project_weights: draw has wrong dimension");
        const double norm = y.norm();
        if (!(norm > 0.0) || draws.weights[i] <= 0.0) {
            ++out.discarded;
            continue;
        }
        const Eigen::VectorXd z = y / norm;
        if (!region.contains(z)) {
            ++out.discarded;
            continue;
        }
        // log of sum_j (b_j^k - a_j^k) over the ray pieces inside [0, 1]
        const IntervalUnion ray = region.chord(origin, z).intersect(Interval{0.0, 1.0});
        double log_mass = -kInf;
        for (const auto& iv : ray.intervals()) {
            const double lb = std::log(iv.hi);
            const double tail = iv.lo > 0.0 ? std::log(-std::expm1(k * (std::log(iv.lo) - lb))) : 0.0;
            log_mass = log_add_exp(log_mass, k * lb + tail);
        }
        if (log_mass == -kInf) {
            ++out.discarded;
            continue;
        }
        out.points.push_back(z);
        log_w.push_back(std::log(draws.weights[i]) - log_mass);
    }
    if (!log_w.empty()) {
        const double top = *std::max_element(log_w.begin(), log_w.end());
        for (double lw : log_w) out.weights.push_back(std::exp(lw - top));
    }
    out.rejected_steps = draws.rejected_steps;
    return out;
}

double lag1_autocorrelation(const std::vector<double>& series) {
    const std::size_t n = series.size();
    if (n < 3) return 0.0;
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = series[i] - mean;
        den += d * d;
        if (i + 1 < n) num += d * (series[i + 1] - mean);
    }
    return den > 0.0 ? num / den : 0.0;
}

} // namespace selektor
