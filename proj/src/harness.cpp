#include "selektor/harness.hpp"

#include "selektor/errors.hpp"
#include "selektor/lasso.hpp"
#include "selektor/normal.hpp"
#include "selektor/problem.hpp"
#include "selektor/rng.hpp"
#include "selektor/saturated.hpp"
#include "selektor/selected.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace selektor {

using nlohmann::json;

// ---------------------------------------------------------------- file drawer

double file_drawer_cutoff(double threshold, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    require(threshold >= 0.0, "threshold must be non-negative");
    const double log_target = std::log(alpha) + log_norm_sf(threshold);
    // log P(|Y| > c) - log P(|Y| > t) is decreasing in c
    double lo = threshold, hi = threshold + 1.0;
    while (log_norm_sf(hi) > log_target) hi = threshold + 2.0 * (hi - threshold);
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (log_norm_sf(mid) > log_target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double file_drawer_conditional_error(double threshold, double cutoff) {
    require(threshold >= 0.0, "threshold must be non-negative");
    if (cutoff <= threshold) return 1.0;
    return std::exp(log_norm_sf(cutoff) - log_norm_sf(threshold));
}

// ---------------------------------------------------------------- config

void CarvingConfig::validate() const {
    require(n > 0 && p > 0, "n and p must be positive");
    require(n1 > 0 && n1 <= n, "need 0 < n1 <= n");
    require(rho >= 0.0 && rho < 1.0, "need 0 <= rho < 1");
    require(sparsity >= 0 && sparsity <= p, "sparsity must lie in [0, p]");
    require(sigma > 0.0, "sigma must be positive");
    require(replicates > 0, "replicates must be positive");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    require(error_dist != ErrorDist::student_t || df > 2.0, "student_t errors need df > 2");
    require(lambda_mc_draws > 0, "lambda_mc_draws must be positive");
    require(lambda_scale > 0.0, "lambda_scale must be positive");
    require(chain_samples > 0 && chain_burn_in >= 0 && chain_thin > 0, "invalid chain settings");
    require(threads > 0, "threads must be positive");
}

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::string mode_name(CarveMode m) { return m == CarveMode::split ? "split" : "carve"; }

} // namespace

CarvingConfig CarvingConfig::from_json(const json& j) {
    CarvingConfig c;
    try {
        read_opt(j, "n", c.n);
        read_opt(j, "p", c.p);
        read_opt(j, "rho", c.rho);
        read_opt(j, "sparsity", c.sparsity);
        read_opt(j, "signal", c.signal);
        read_opt(j, "sigma", c.sigma);
        read_opt(j, "n1", c.n1);
        read_opt(j, "df", c.df);
        read_opt(j, "replicates", c.replicates);
        read_opt(j, "seed", c.seed);
        read_opt(j, "alpha", c.alpha);
        read_opt(j, "lambda_mc_draws", c.lambda_mc_draws);
        read_opt(j, "lambda_scale", c.lambda_scale);
        read_opt(j, "chain_samples", c.chain_samples);
        read_opt(j, "chain_burn_in", c.chain_burn_in);
        read_opt(j, "chain_thin", c.chain_thin);
        read_opt(j, "threads", c.threads);
        if (j.contains("mode")) {
            const auto m = j.at("mode").get<std::string>();
            require(m == "split" || m == "carve", "mode must be split or carve");
            c.mode = m == "split" ? CarveMode::split : CarveMode::carve;
        }
        if (j.contains("error_dist")) {
            const auto e = j.at("error_dist").get<std::string>();
            require(e == "gaussian" || e == "student_t", "error_dist must be gaussian or student_t");
            c.error_dist = e == "gaussian" ? ErrorDist::gaussian : ErrorDist::student_t;
        }
        if (j.contains("selection")) {
            const auto s = j.at("selection").get<std::string>();
            require(s == "lasso" || s == "oracle", "selection must be lasso or oracle");
            c.selection = s == "lasso" ? SelectionRule::lasso : SelectionRule::oracle;
        }
        if (j.contains("decision")) {
            const auto d = j.at("decision").get<std::string>();
            require(d == "umpu" || d == "equal_tailed", "decision must be umpu or equal_tailed");
            c.decision = d == "umpu" ? IntervalKind::umpu : IntervalKind::equal_tailed;
        }
    } catch (const json::exception& e) {
        throw PreconditionError(std::string("bad carving config: ") + e.what());
    }
    c.validate();
    return c;
}

json CarvingConfig::to_json() const {
    return json{{"n", n},
                {"p", p},
                {"rho", rho},
                {"sparsity", sparsity},
                {"signal", signal},
                {"sigma", sigma},
                {"n1", n1},
                {"mode", mode_name(mode)},
                {"error_dist", error_dist == ErrorDist::gaussian ? "gaussian" : "student_t"},
                {"df", df},
                {"replicates", replicates},
                {"seed", seed},
                {"alpha", alpha},
                {"decision", decision == IntervalKind::umpu ? "umpu" : "equal_tailed"},
                {"selection", selection == SelectionRule::lasso ? "lasso" : "oracle"},
                {"lambda_mc_draws", lambda_mc_draws},
                {"lambda_scale", lambda_scale},
                {"chain_samples", chain_samples},
                {"chain_burn_in", chain_burn_in},
                {"chain_thin", chain_thin},
                {"threads", threads}};
}

// ---------------------------------------------------------------- tables

const std::vector<std::string>& MetricsTable::columns() {
    static const std::vector<std::string> cols{
        "label",    "n1",       "mode",   "replicates",  "screened", "p_screen",    "p_screen_se",
        "E_V",      "E_V_se",   "E_RminusV", "E_RminusV_se", "E_R",   "FDR",         "FDR_se",
        "power",    "power_se", "level",  "level_se",    "power_tests", "level_tests", "failures",
        "analytic_power"};
    return cols;
}

void MetricsTable::write_csv(std::ostream& os) const {
    const auto& cols = columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    std::ostringstream line;
    for (const auto& r : rows) {
        line.str("");
        line << std::setprecision(6) << r.label << ',' << r.n1 << ',' << mode_name(r.mode) << ',' << r.replicates << ','
             << r.screened << ',' << r.p_screen.value << ',' << r.p_screen.se << ',' << r.e_v.value << ','
             << r.e_v.se << ',' << r.e_r_minus_v.value << ',' << r.e_r_minus_v.se << ',' << r.e_r << ','
             << r.fdr.value << ',' << r.fdr.se << ',' << r.power.value << ',' << r.power.se << ','
             << r.level.value << ',' << r.level.se << ',' << r.power_tests << ',' << r.level_tests << ','
             << r.failures << ',' << r.analytic_power;
        os << line.str() << '\n';
    }
}

json MetricsTable::to_json() const {
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back(json{{"label", r.label},
                           {"n1", r.n1},
                           {"mode", mode_name(r.mode)},
                           {"replicates", r.replicates},
                           {"screened", r.screened},
                           {"p_screen", {r.p_screen.value, r.p_screen.se}},
                           {"E_V", {r.e_v.value, r.e_v.se}},
                           {"E_RminusV", {r.e_r_minus_v.value, r.e_r_minus_v.se}},
                           {"E_R", r.e_r},
                           {"FDR", {r.fdr.value, r.fdr.se}},
                           {"power", {r.power.value, r.power.se}},
                           {"level", {r.level.value, r.level.se}},
                           {"power_tests", r.power_tests},
                           {"level_tests", r.level_tests},
                           {"failures", r.failures},
                           {"analytic_power", r.analytic_power}});
    }
    return out;
}

// ---------------------------------------------------------------- simulation

namespace {

struct Replicate {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

Replicate draw_replicate(const CarvingConfig& c, Rng& rng) {
    std::normal_distribution<double> gauss;
    const double a = std::sqrt(1.0 - c.rho), b = std::sqrt(c.rho);
    Replicate r;
    r.X.resize(c.n, c.p);
    for (int i = 0; i < c.n; ++i) {
        const double w = gauss(rng);
        for (int k = 0; k < c.p; ++k) r.X(i, k) = a * gauss(rng) + b * w;
    }
    for (int k = 0; k < c.p; ++k) {
        const double len = r.X.col(k).norm();
        if (len > 0.0) r.X.col(k) /= len;
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(c.p);
    beta.head(c.sparsity).setConstant(c.signal);
    r.y = r.X * beta;
    if (c.error_dist == ErrorDist::gaussian) {
        for (int i = 0; i < c.n; ++i) r.y(i) += c.sigma * gauss(rng);
    } else {
        // rescaled to variance sigma^2
        std::student_t_distribution<double> t(c.df);
        const double unit = std::sqrt((c.df - 2.0) / c.df);
        for (int i = 0; i < c.n; ++i) r.y(i) += c.sigma * unit * t(rng);
    }
    return r;
}

struct ArmCounts {
    long true_tests = 0, true_rejections = 0;
    long null_tests = 0, null_rejections = 0;
    long failures = 0;
    double analytic_sum = 0.0;
};

struct ReplicateResult {
    int R = 0, V = 0;
    bool screened = false;
    ArmCounts split, carve;
};

// Classical two-sided z-test of beta_j = 0 in model E fitted on (X2, y2); power at beta_true.
struct ClassicalTest {
    bool reject;
    double power;
};

ClassicalTest classical_z_test(const Eigen::MatrixXd& X2, const Eigen::VectorXd& y2, int pos, double sigma,
                               double alpha, double beta_true) {
    const Eigen::MatrixXd gram = X2.transpose() * X2;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw NumericalError("second-stage Gram matrix is singular");
    const Eigen::VectorXd bhat = ldlt.solve(X2.transpose() * y2);
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(X2.cols(), pos);
    const double var = ldlt.solve(e)(pos);
    if (!(var > 0.0) || !std::isfinite(var)) throw NumericalError("second-stage Gram matrix is singular");
    const double se = sigma * std::sqrt(var);
    const double zc = -norm_quantile(alpha / 2.0);
    const double delta = beta_true / se;
    return {std::abs(bhat(pos) / se) > zc, norm_sf(zc - delta) + norm_cdf(-zc - delta)};
}

ReplicateResult run_replicate(const CarvingConfig& c, int index, bool do_split, bool do_carve) {
    const std::uint64_t rep_seed = derive_seed(c.seed, static_cast<std::uint64_t>(index));
    Rng rng = make_rng(rep_seed, 0);
    const Replicate data = draw_replicate(c, rng);
    const Eigen::MatrixXd X1 = data.X.topRows(c.n1);
    const Eigen::VectorXd y1 = data.y.head(c.n1);

    ReplicateResult out;
    std::vector<int> active;
    SelectionRegion region;
    if (c.selection == SelectionRule::oracle) {
        for (int k = 0; k < c.sparsity; ++k) active.push_back(k);
        region = SelectionRegion::whole_space(c.n);
    } else {
        const double lambda =
            c.lambda_scale * lambda_mc(X1, c.sigma, c.lambda_mc_draws, derive_seed(rep_seed, 1));
        const LassoFit fit = lasso_fit(X1, y1, lambda);
        active = fit.active;
        if (do_carve) {
            SelectionRegion r1 = lasso_selection_region(X1, lambda, fit.active, fit.signs, true);
            region = c.n1 < c.n ? r1.lifted(c.n) : std::move(r1);
        }
    }
    out.R = static_cast<int>(active.size());
    for (int k : active) out.V += k >= c.sparsity;
    out.screened = out.R - out.V == c.sparsity;
    if (!out.screened || active.empty()) return out;

    const double alpha = c.alpha;
    for (std::size_t pos = 0; pos < active.size(); ++pos) {
        const int j = active[pos];
        const bool is_true = j < c.sparsity;
        const double beta_true = is_true ? c.signal : 0.0;
        auto record = [&](ArmCounts& arm, bool reject) {
            (is_true ? arm.true_tests : arm.null_tests) += 1;
            (is_true ? arm.true_rejections : arm.null_rejections) += reject;
        };

        if (do_split) {
            const int n2 = c.n - c.n1;
            if (n2 <= out.R) {
                ++out.split.failures;
            } else {
                try {
                    Eigen::MatrixXd X2(n2, active.size());
                    for (std::size_t k = 0; k < active.size(); ++k) X2.col(k) = data.X.col(active[k]).tail(n2);
                    const ClassicalTest t = classical_z_test(X2, data.y.tail(n2), static_cast<int>(pos), c.sigma,
                                                             alpha, beta_true);
                    record(out.split, t.reject);
                    if (is_true) out.split.analytic_sum += t.power;
                } catch (const Error&) {
                    ++out.split.failures;
                }
            }
        }

        if (do_carve) {
            try {
                RegressionProblem prob;
                prob.X = data.X;
                prob.y = data.y;
                prob.model = active;
                prob.target = j;
                prob.sigma = c.sigma;
                bool reject;
                if (c.selection == SelectionRule::oracle || c.n1 == c.n) {
                    // with all rows used for selection the lasso event splits into a part in X_E'y
                    // and a part in the residual, so the exact saturated test is the selected test
                    SaturatedOptions so;
                    so.kind = c.decision;
                    so.with_interval = false;
                    const TestOutcome t = saturated_z_test(prob, region, alpha, so);
                    reject = c.decision == IntervalKind::umpu ? t.reject : t.p_value <= alpha;
                } else {
                    SelectedOptions so;
                    so.kind = c.decision;
                    so.chain.n_samples = c.chain_samples;
                    so.chain.burn_in = c.chain_burn_in;
                    so.chain.thin = c.chain_thin;
                    so.chain.scheme = DirectionScheme::coordinate;
                    so.chain.seed = derive_seed(rep_seed, 100 + static_cast<std::uint64_t>(j));
                    const TestOutcome t = selected_z_test(prob, region, alpha, so);
                    reject = t.reject;
                }
                record(out.carve, reject);
                if (is_true && c.selection == SelectionRule::oracle) {
                    const ClassicalTest ct = classical_z_test(
                        [&] {
                            Eigen::MatrixXd XE(c.n, active.size());
                            for (std::size_t k = 0; k < active.size(); ++k) XE.col(k) = data.X.col(active[k]);
                            return XE;
                        }(),
                        data.y, static_cast<int>(pos), c.sigma, alpha, beta_true);
                    out.carve.analytic_sum += ct.power;
                }
            } catch (const Error&) {
                ++out.carve.failures;
            }
        }
    }
    return out;
}

std::vector<ReplicateResult> run_all(const CarvingConfig& c, bool do_split, bool do_carve) {
    std::vector<ReplicateResult> results(c.replicates);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < c.replicates; i = next++) {
            try {
                results[i] = run_replicate(c, i, do_split, do_carve);
            } catch (const Error&) {
                // selection itself failed: counted as a failure of both arms, not screened
                results[i] = ReplicateResult{};
                results[i].split.failures = results[i].carve.failures = 1;
            }
        }
    };
    const int nthreads = std::min(c.threads, c.replicates);
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return results;
}

Estimate mean_se(const std::vector<double>& x) {
    Estimate e;
    if (x.empty()) return e;
    const double m = static_cast<double>(x.size());
    for (double v : x) e.value += v;
    e.value /= m;
    if (x.size() > 1) {
        double ss = 0.0;
        for (double v : x) ss += (v - e.value) * (v - e.value);
        e.se = std::sqrt(ss / (m - 1.0) / m);
    }
    return e;
}

// Pooled proportion sum(a)/sum(b) over clusters with a delta-method standard error.
Estimate ratio_se(const std::vector<std::pair<double, double>>& ab) {
    Estimate e;
    double sa = 0.0, sb = 0.0;
    for (const auto& [a, b] : ab) {
        sa += a;
        sb += b;
    }
    if (sb <= 0.0) return e;
    e.value = sa / sb;
    double ss = 0.0;
    for (const auto& [a, b] : ab) ss += (a - e.value * b) * (a - e.value * b);
    const double m = static_cast<double>(ab.size());
    e.se = m > 1 ? std::sqrt(ss * m / (m - 1.0)) / sb : 0.0;
    return e;
}

MetricsRow summarize(const CarvingConfig& c, const std::vector<ReplicateResult>& res, CarveMode mode) {
    MetricsRow row;
    row.mode = mode;
    row.n1 = c.n1;
    row.label = (mode == CarveMode::split ? "Split" : "Carve") + std::to_string(c.n1);
    row.replicates = c.replicates;
    std::vector<double> screened, v, rv, fdr;
    std::vector<std::pair<double, double>> pw, lv;
    long analytic_n = 0;
    for (const auto& r : res) {
        const ArmCounts& arm = mode == CarveMode::split ? r.split : r.carve;
        row.failures += arm.failures;
        screened.push_back(r.screened);
        v.push_back(r.V);
        rv.push_back(r.R - r.V);
        fdr.push_back(static_cast<double>(r.V) / std::max(r.R, 1));
        row.e_r += r.R;
        if (!r.screened) continue;
        row.screened += 1;
        if (arm.true_tests > 0) pw.emplace_back(arm.true_rejections, arm.true_tests);
        if (arm.null_tests > 0) lv.emplace_back(arm.null_rejections, arm.null_tests);
        row.power_tests += arm.true_tests;
        row.level_tests += arm.null_tests;
        row.analytic_power += arm.analytic_sum;
        analytic_n += c.selection == SelectionRule::oracle ? arm.true_tests : 0;
    }
    row.e_r /= c.replicates;
    row.p_screen = mean_se(screened);
    row.e_v = mean_se(v);
    row.e_r_minus_v = mean_se(rv);
    row.fdr = mean_se(fdr);
    row.power = ratio_se(pw);
    row.level = ratio_se(lv);
    row.analytic_power = analytic_n > 0 ? row.analytic_power / analytic_n : 0.0;
    return row;
}

} // namespace

MetricsTable run_carving_experiment(const CarvingConfig& config) {
    config.validate();
    const bool split = config.mode == CarveMode::split;
    require(!split || config.n1 < config.n, "split mode needs n1 < n");
    const auto res = run_all(config, split, !split);
    return MetricsTable{{summarize(config, res, config.mode)}};
}

MetricsTable run_carving_pair(const CarvingConfig& config) {
    config.validate();
    const bool split = config.n1 < config.n;
    const auto res = run_all(config, split, true);
    MetricsTable t;
    if (split) t.rows.push_back(summarize(config, res, CarveMode::split));
    t.rows.push_back(summarize(config, res, CarveMode::carve));
    return t;
}

std::vector<TradeoffPoint> tradeoff_sweep(const CarvingConfig& base, const std::vector<int>& n1_grid) {
    require(!n1_grid.empty(), "empty n1 grid");
    std::vector<TradeoffPoint> out;
    for (int n1 : n1_grid) {
        CarvingConfig c = base;
        c.n1 = n1;
        const MetricsTable t = run_carving_pair(c);
        TradeoffPoint pt;
        pt.n1 = n1;
        pt.carve = t.rows.back();
        if (t.rows.size() == 2) pt.split = t.rows.front();
        out.push_back(pt);
    }
    return out;
}

json tradeoff_to_json(const std::vector<TradeoffPoint>& sweep) {
    json out = json::array();
    for (const auto& pt : sweep) {
        json entry{{"n1", pt.n1}};
        auto arm = [](const MetricsRow& r) {
            return json{{"p_screen", r.p_screen.value},
                        {"power", r.power.value},
                        {"power_se", r.power.se},
                        {"product", r.p_screen.value * r.power.value}};
        };
        entry["carve"] = arm(pt.carve);
        if (!pt.split.label.empty()) entry["split"] = arm(pt.split);
        out.push_back(entry);
    }
    return out;
}

// ---------------------------------------------------------------- aggregation

AggregateConfig AggregateConfig::from_json(const json& j) {
    AggregateConfig c;
    try {
        read_opt(j, "effects", c.effects);
        read_opt(j, "null_fraction", c.null_fraction);
        read_opt(j, "effect_size", c.effect_size);
        read_opt(j, "threshold", c.threshold);
        read_opt(j, "alpha", c.alpha);
        read_opt(j, "experiments", c.experiments);
        read_opt(j, "m", c.m);
        read_opt(j, "seed", c.seed);
        if (j.contains("test")) {
            const auto t = j.at("test").get<std::string>();
            require(t == "selective" || t == "nominal" || t == "trivial", "test must be selective, nominal or trivial");
            c.test = t == "selective" ? DisciplineTest::selective
                     : t == "nominal" ? DisciplineTest::nominal
                                      : DisciplineTest::trivial;
        }
    } catch (const json::exception& e) {
        throw PreconditionError(std::string("bad aggregate config: ") + e.what());
    }
    return c;
}

json AggregateReport::to_json() const {
    static const char* names[] = {"discipline", "fcr", "fwer"};
    return json{{"kind", names[static_cast<int>(kind)]},
                {"ratio", ratio},
                {"se", se},
                {"numerator", numerator},
                {"denominator", denominator}};
}

AggregateReport aggregate_error_check(AggregateKind kind, const AggregateConfig& c) {
    require(c.alpha > 0.0 && c.alpha < 1.0, "alpha must lie in (0,1)");
    require(c.null_fraction >= 0.0 && c.null_fraction <= 1.0, "null_fraction must lie in [0,1]");
    Rng rng = make_rng(c.seed, static_cast<std::uint64_t>(kind));
    std::normal_distribution<double> gauss;
    auto draw_mean = [&] {
        if (uniform01(rng) < c.null_fraction) return 0.0;
        return uniform01(rng) < 0.5 ? -c.effect_size : c.effect_size;
    };
    AggregateReport rep;
    rep.kind = kind;

    if (kind == AggregateKind::discipline) {
        require(c.effects > 0, "effects must be positive");
        const double zc = c.test == DisciplineTest::selective ? file_drawer_cutoff(c.threshold, c.alpha)
                                                              : -norm_quantile(c.alpha / 2.0);
        for (long i = 0; i < c.effects; ++i) {
            const double mu = draw_mean();
            const double y = mu + gauss(rng);
            const double coin = uniform01(rng);
            if (std::abs(y) <= c.threshold || mu != 0.0) continue;
            ++rep.denominator;
            const bool reject = c.test == DisciplineTest::trivial ? coin < c.alpha : std::abs(y) > zc;
            rep.numerator += reject;
        }
        if (rep.denominator > 0) {
            rep.ratio = static_cast<double>(rep.numerator) / rep.denominator;
            rep.se = std::sqrt(rep.ratio * (1.0 - rep.ratio) / rep.denominator);
        }
        return rep;
    }

    require(c.experiments > 0 && c.m > 0, "experiments and m must be positive");
    std::vector<double> per_experiment;
    per_experiment.reserve(c.experiments);
    std::vector<double> mu(c.m), y(c.m);
    const IntervalUnion outside{{-kInf, -c.threshold}, {c.threshold, kInf}};
    for (int e = 0; e < c.experiments; ++e) {
        for (int i = 0; i < c.m; ++i) {
            mu[i] = draw_mean();
            y[i] = mu[i] + gauss(rng);
        }
        if (kind == AggregateKind::fcr) {
            // effects are independent, so given selection of i the count R carries no
            // further information about y_i and the truncated interval is conditional on R too
            int R = 0, V = 0;
            for (int i = 0; i < c.m; ++i) {
                if (std::abs(y[i]) <= c.threshold) continue;
                ++R;
                const auto [lo, hi] = trunc_gauss_interval(y[i], 1.0, outside, c.alpha);
                V += !(lo <= mu[i] && mu[i] <= hi);
            }
            rep.numerator += V;
            rep.denominator += R;
            per_experiment.push_back(static_cast<double>(V) / std::max(R, 1));
        } else {
            int star = 0;
            for (int i = 1; i < c.m; ++i)
                if (std::abs(y[i]) > std::abs(y[star])) star = i;
            double runner_up = 0.0;
            for (int i = 0; i < c.m; ++i)
                if (i != star) runner_up = std::max(runner_up, std::abs(y[i]));
            // given the others, y_star is N(mu_star, 1) restricted to |y| > runner_up
            const bool reject = std::abs(y[star]) > file_drawer_cutoff(runner_up, c.alpha);
            const bool false_rejection = reject && mu[star] == 0.0;
            rep.numerator += false_rejection;
            rep.denominator += 1;
            per_experiment.push_back(false_rejection);
        }
    }
    const Estimate est = mean_se(per_experiment);
    rep.ratio = est.value;
    rep.se = est.se;
    return rep;
}

// ---------------------------------------------------------------- worked examples

double carving_sum_cdf(double s, double mu, double threshold) {
    // Y1 = threshold + t, t > 0 with density phi(a + t) / sf(a), a = threshold - mu
    const double a = threshold - mu;
    const double log_mass = log_norm_sf(a);
    auto f = [&](double t) { return std::exp(log_norm_pdf(a + t) - log_mass) * norm_cdf(s - threshold - t - mu); };
    boost::math::quadrature::exp_sinh<double> integrator;
    const double v = integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-12);
    return std::clamp(v, 0.0, 1.0);
}

namespace {

double solve_decreasing(const std::function<double(double)>& f, double target, double guess) {
    // root of f(x) = target for f decreasing in x
    double lo = guess - 1.0, hi = guess + 1.0;
    while (f(lo) < target) lo -= 2.0 * (hi - lo);
    while (f(hi) > target) hi += 2.0 * (hi - lo);
    boost::math::tools::eps_tolerance<double> tol(40);
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve([&](double x) { return f(x) - target; }, lo, hi, tol, iters);
    return 0.5 * (r.first + r.second);
}

} // namespace

std::pair<double, double> carving_sum_interval(double s, double threshold, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    auto cdf = [&](double mu) { return carving_sum_cdf(s, mu, threshold); };
    return {solve_decreasing(cdf, 1.0 - alpha / 2.0, s / 2.0), solve_decreasing(cdf, alpha / 2.0, s / 2.0)};
}

double carving_sum_expected_length(double mu, double threshold, double alpha, int nodes) {
    require(nodes > 0, "nodes must be positive");
    double total = 0.0;
    for (int k = 0; k < nodes; ++k) {
        const double q = (k + 0.5) / nodes;
        // S is increasing in its quantile: invert s -> cdf(s) via the decreasing map s -> 1 - cdf(s)
        const double s = solve_decreasing([&](double x) { return 1.0 - carving_sum_cdf(x, mu, threshold); }, 1.0 - q,
                                          2.0 * std::max(mu, threshold));
        const auto [lo, hi] = carving_sum_interval(s, threshold, alpha);
        total += hi - lo;
    }
    return total / nodes;
}

namespace {

json gallery_ex2(std::uint64_t seed) {
    const double threshold = 3.0, alpha = 0.05;
    json info = json::array();
    for (int k = 0; k <= 200; ++k) {
        const double mu = -7.0 + 0.1 * k;
        info.push_back({mu, leftover_information(mu, threshold)});
    }
    const IntervalUnion support{{threshold, kInf}};
    json intervals = json::array();
    for (int k = 1; k <= 70; ++k) {
        const double y = threshold + 0.1 * k;
        const auto et = trunc_gauss_interval(y, 1.0, support, alpha, IntervalKind::equal_tailed);
        const auto um = trunc_gauss_interval(y, 1.0, support, alpha, IntervalKind::umpu);
        intervals.push_back({{"y", y}, {"equal_tailed", {et.first, et.second}}, {"umpu", {um.first, um.second}}});
    }
    // Monte Carlo UMPU interval at y = 8 from draws of the truncated family
    NaturalFamily1D fam;
    fam.sample_at = [&](double theta, std::uint64_t stream) {
        Rng rng = make_rng(seed, stream);
        std::vector<double> z(20000);
        for (double& v : z) v = theta + sample_truncated_standard_normal(threshold - theta, kInf, rng);
        return TiltedSampleSet::unit_weights(std::move(z), theta);
    };
    InversionOptions inv;
    inv.theta_start = 8.0;
    Rng urng = make_rng(seed, 0x75);
    const IntervalResult mc = umpu_confidence_interval(8.0, uniform01(urng), fam, alpha, inv);
    const json info_front = info.front(), info_back = info.back();
    return json{{"threshold", threshold},
                {"leftover_information", info},
                {"info_endpoints", {info_front[1], info_back[1]}},
                {"intervals", intervals},
                {"mc_umpu_interval_at_8", {mc.lo, mc.hi}}};
}

json gallery_ex3() {
    const double threshold = 3.0, alpha = 0.05;
    json info = json::array();
    for (int k = 0; k <= 200; ++k) {
        const double mu = -7.0 + 0.1 * k;
        info.push_back({mu, 1.0 + leftover_information(mu, threshold), 1.0});
    }
    const double split_len = 2.0 * -norm_quantile(alpha / 2.0);
    json lengths = json::array();
    double ratio_at_8 = 0.0;
    for (double mu : {0.0, 2.0, 4.0, 6.0, 8.0}) {
        const double carve_len = carving_sum_expected_length(mu, threshold, alpha);
        lengths.push_back({{"mu", mu}, {"carving", carve_len}, {"splitting", split_len},
                           {"ratio", split_len / carve_len}});
        if (mu == 8.0) ratio_at_8 = split_len / carve_len;
    }
    return json{{"threshold", threshold},
                {"information", info},
                {"expected_lengths", lengths},
                {"length_ratio_at_8", ratio_at_8}};
}

json gallery_ex4(std::uint64_t seed) {
    Eigen::MatrixXd A1(2, 2), A2(2, 2);
    A1 << -1, 1, -1, -1;
    A2 << 1, -1, 1, 1;
    const SelectionRegion region(std::vector<Polytope>{Polytope(A1, Eigen::Vector2d::Zero()),
                                                       Polytope(A2, Eigen::Vector2d::Zero())});
    RegressionProblem prob;
    prob.X = Eigen::MatrixXd::Identity(2, 2);
    prob.y = Eigen::Vector2d(2.9, 2.5);
    prob.model = {0};
    prob.target = 0;
    prob.sigma = 1.0;
    const TestOutcome sat = saturated_z_test(prob, region, 0.05);
    SelectedOptions so;
    so.chain.n_samples = 100000;
    so.chain.thin = 2;
    so.chain.seed = seed;
    so.chain.scheme = DirectionScheme::coordinate;
    const TestOutcome sel = selected_z_test(prob, region, 0.05, so);
    return json{{"y", {2.9, 2.5}},
                {"p_saturated", sat.p_value},
                {"saturated_truncation", truncation_set(prob.y, Eigen::Vector2d(1, 0), region).to_string()},
                {"p_selected", sel.p_value},
                {"selected_ess", sel.diagnostics.ess},
                {"selected_lag1", sel.diagnostics.lag1_autocorrelation}};
}

} // namespace

json example_gallery(const std::string& which, std::uint64_t seed) {
    if (which == "ex2") return gallery_ex2(seed);
    if (which == "ex3") return gallery_ex3();
    if (which == "ex4") return gallery_ex4(seed);
    throw PreconditionError("unknown example '" + which + "', expected ex2, ex3 or ex4");
}

} // namespace selektor
