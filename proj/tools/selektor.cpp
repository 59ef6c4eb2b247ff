#include "selektor/errors.hpp"
#include "selektor/harness.hpp"
#include "selektor/lasso.hpp"
#include "selektor/problem.hpp"
#include "selektor/saturated.hpp"
#include "selektor/selected.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::json;
using namespace selektor;

namespace {

// Numeric CSV; a first row that does not parse as numbers is taken as a header.
std::vector<std::vector<double>> read_csv(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            while (end && (*end == ' ' || *end == '\t')) ++end;
            if (end == cell.c_str() || (end && *end != '\0')) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            require(first, path + ": non-numeric entry in line " + std::to_string(rows.size() + 1));
            first = false;
            continue;
        }
        first = false;
        require(rows.empty() || rows.front().size() == row.size(), path + ": ragged rows");
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), path + ": no data");
    return rows;
}

Eigen::MatrixXd read_matrix(const std::string& path) {
    const auto rows = read_csv(path);
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
    return m;
}

Eigen::VectorXd read_vector(const std::string& path) {
    const Eigen::MatrixXd m = read_matrix(path);
    if (m.cols() == 1) return m.col(0);
    require(m.rows() == 1, path + ": expected a single column or a single row");
    return m.row(0).transpose();
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw PreconditionError(path + ": " + e.what());
    }
}

SelectionRegion read_region(const std::string& path, Eigen::Index dim) {
    if (path.empty()) return SelectionRegion::whole_space(dim);
    const json j = read_json(path);
    require(j.contains("polytopes") && j["polytopes"].is_array(), path + ": expected {\"polytopes\": [...]}");
    std::vector<Polytope> parts;
    try {
        for (const auto& pj : j["polytopes"]) {
            const auto A = pj.at("A").get<std::vector<std::vector<double>>>();
            const auto b = pj.at("b").get<std::vector<double>>();
            require(A.size() == b.size(), path + ": A and b have different row counts");
            Eigen::MatrixXd Am(A.size(), dim);
            for (std::size_t i = 0; i < A.size(); ++i) {
                require(static_cast<Eigen::Index>(A[i].size()) == dim, path + ": row of A has the wrong length");
                for (Eigen::Index k = 0; k < dim; ++k) Am(i, k) = A[i][k];
            }
            parts.emplace_back(Am, Eigen::Map<const Eigen::VectorXd>(b.data(), b.size()));
        }
    } catch (const json::exception& e) {
        throw PreconditionError(path + ": " + e.what());
    }
    require(!parts.empty(), path + ": no polytopes");
    return SelectionRegion(std::move(parts));
}

std::vector<int> parse_index_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(tok, &used));
            require(used == tok.size(), "bad index '" + tok + "'");
        } catch (const std::logic_error&) {
            throw PreconditionError("bad index '" + tok + "'");
        }
    }
    return out;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback) {
    if (flag) return *flag;
    if (const char* env = std::getenv("SELEKTOR_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::logic_error&) {
            throw PreconditionError("SELEKTOR_SEED is not an unsigned integer");
        }
    }
    return fallback;
}

json outcome_json(const TestOutcome& t, double alpha) {
    json diag{{"ess", t.diagnostics.ess},
              {"k1_residual", t.diagnostics.k1_residual},
              {"k2_residual", t.diagnostics.k2_residual},
              {"seed", t.diagnostics.seed},
              {"flags", t.diagnostics.flags}};
    return json{{"p_value", t.p_value},
                {"ci", {t.ci_lo, t.ci_hi}},
                {"decision", t.reject ? "reject" : "accept"},
                {"alpha", alpha},
                {"statistic", t.statistic},
                {"diagnostics", diag}};
}

IntervalKind parse_kind(const std::string& s) { return s == "umpu" ? IntervalKind::umpu : IntervalKind::equal_tailed; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selective inference after model selection"};
    app.require_subcommand(1);
    int threads = 1;
    std::optional<std::uint64_t> seed_flag;
    app.add_option("--threads", threads, "maximum number of worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed_flag, "base seed (overrides SELEKTOR_SEED and config files)");

    // filedrawer
    auto* fd = app.add_subcommand("filedrawer", "selective cutoff after |Y| > threshold screening");
    double fd_threshold = 1.0, fd_alpha = 0.05;
    fd->add_option("--threshold", fd_threshold);
    fd->add_option("--alpha", fd_alpha);

    // ztest / ttest
    struct RegressionArgs {
        std::string design, response, model, region, kind = "equal_tailed";
        int target = 0;
        std::optional<double> sigma;
        double alpha = 0.05, null_value = 0.0;
        int samples = 5000, burn_in = 1000, thin = 5;
        bool saturated = false, interval = false;
    };
    RegressionArgs ra;
    auto add_regression = [&](CLI::App* sub, bool with_sigma) {
        sub->add_option("--design", ra.design, "design matrix CSV")->required();
        sub->add_option("--response", ra.response, "response CSV")->required();
        sub->add_option("--model", ra.model, "comma-separated 0-based column indices")->required();
        sub->add_option("--target", ra.target, "0-based column index under test")->required();
        if (with_sigma) sub->add_option("--sigma", ra.sigma, "known noise level")->required();
        sub->add_option("--region", ra.region, "selection region JSON (default: no selection)");
        sub->add_option("--alpha", ra.alpha);
        sub->add_option("--null", ra.null_value, "hypothesised coefficient");
        sub->add_option("--kind", ra.kind)->check(CLI::IsMember({"equal_tailed", "umpu"}));
        sub->add_option("--samples", ra.samples)->check(CLI::PositiveNumber);
        sub->add_option("--burn-in", ra.burn_in)->check(CLI::NonNegativeNumber);
        sub->add_option("--thin", ra.thin)->check(CLI::PositiveNumber);
        sub->add_flag("--interval", ra.interval, "also invert the test into a confidence interval");
    };
    auto* zt = app.add_subcommand("ztest", "selective z-test, known sigma");
    add_regression(zt, true);
    zt->add_flag("--saturated", ra.saturated, "saturated-model test instead of the selected-model test");
    auto* tt = app.add_subcommand("ttest", "selected-model t-test, unknown sigma");
    add_regression(tt, false);

    // lasso-infer
    std::string li_design, li_response, li_test = "saturated";
    std::optional<double> li_lambda, li_sigma;
    bool li_lambda_mc = false, li_condition_signs = true;
    double li_alpha = 0.05;
    int li_samples = 5000, li_mc_draws = 2000;
    auto* li = app.add_subcommand("lasso-infer", "lasso selection followed by selective tests of every active variable");
    li->add_option("--design", li_design)->required();
    li->add_option("--response", li_response)->required();
    auto* lam_opt = li->add_option("--lambda", li_lambda);
    auto* lam_mc = li->add_flag("--lambda-mc", li_lambda_mc, "lambda = 2 E|X'e|_inf by Monte Carlo (needs --sigma)");
    lam_opt->excludes(lam_mc);
    li->add_option("--sigma", li_sigma, "known noise level; without it the selected t-test is used");
    li->add_option("--alpha", li_alpha);
    li->add_option("--condition-signs", li_condition_signs);
    li->add_option("--test", li_test)->check(CLI::IsMember({"saturated", "selected"}));
    li->add_option("--samples", li_samples)->check(CLI::PositiveNumber);
    li->add_option("--lambda-mc-draws", li_mc_draws)->check(CLI::PositiveNumber);

    // carve-sim / sweep
    std::string cs_config, cs_format = "csv", sw_n1;
    auto* cs = app.add_subcommand("carve-sim", "data splitting versus data carving simulation");
    cs->add_option("--config", cs_config, "JSON config")->required();
    cs->add_option("--format", cs_format)->check(CLI::IsMember({"csv", "json"}));
    auto* sw = app.add_subcommand("sweep", "split/carve tradeoff over n1");
    sw->add_option("--config", cs_config, "JSON config")->required();
    sw->add_option("--n1", sw_n1, "comma-separated n1 grid")->required();

    // aggregate
    std::string ag_kind, ag_config;
    auto* ag = app.add_subcommand("aggregate", "long-run error of selective procedures");
    ag->add_option("--kind", ag_kind)->required()->check(CLI::IsMember({"discipline", "fcr", "fwer"}));
    ag->add_option("--config", ag_config, "JSON config");

    // gallery
    std::string ga_which;
    auto* ga = app.add_subcommand("gallery", "numbers behind the worked examples");
    ga->add_option("--which", ga_which)->required()->check(CLI::IsMember({"ex2", "ex3", "ex4"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fd->parsed()) {
            const double c = file_drawer_cutoff(fd_threshold, fd_alpha);
            std::cout << json{{"threshold", fd_threshold},
                              {"alpha", fd_alpha},
                              {"cutoff", c},
                              {"nominal_conditional_error", file_drawer_conditional_error(fd_threshold)}}
                             .dump(2)
                      << '\n';
        } else if (zt->parsed() || tt->parsed()) {
            RegressionProblem prob;
            prob.X = read_matrix(ra.design);
            prob.y = read_vector(ra.response);
            prob.model = parse_index_list(ra.model);
            prob.target = ra.target;
            prob.sigma = ra.sigma;
            prob.null_value = ra.null_value;
            prob.validate();
            const SelectionRegion region = read_region(ra.region, prob.n());
            const std::uint64_t seed = resolve_seed(seed_flag, 1);
            TestOutcome out;
            if (zt->parsed() && ra.saturated) {
                SaturatedOptions so;
                so.kind = parse_kind(ra.kind);
                so.with_interval = ra.interval;
                out = saturated_z_test(prob, region, ra.alpha, so);
                out.diagnostics.seed = seed;
            } else {
                SelectedOptions so;
                so.kind = parse_kind(ra.kind);
                so.with_interval = ra.interval;
                so.chain.n_samples = ra.samples;
                so.chain.burn_in = ra.burn_in;
                so.chain.thin = ra.thin;
                so.chain.seed = seed;
                so.chain.scheme = DirectionScheme::coordinate;
                out = zt->parsed() ? selected_z_test(prob, region, ra.alpha, so)
                                   : selected_t_test(prob, region, ra.alpha, so);
            }
            std::cout << outcome_json(out, ra.alpha).dump(2) << '\n';
        } else if (li->parsed()) {
            const Eigen::MatrixXd X = read_matrix(li_design);
            const Eigen::VectorXd y = read_vector(li_response);
            require(X.rows() == y.size(), "design and response have different row counts");
            const std::uint64_t seed = resolve_seed(seed_flag, 1);
            require(li_lambda.has_value() || li_lambda_mc, "give --lambda or --lambda-mc");
            require(!li_lambda_mc || li_sigma.has_value(), "--lambda-mc needs --sigma");
            const double lambda = li_lambda ? *li_lambda : lambda_mc(X, *li_sigma, li_mc_draws, seed);
            const LassoFit fit = lasso_fit(X, y, lambda);
            const SelectionRegion region =
                lasso_selection_region(X, lambda, fit.active, fit.signs, li_condition_signs);
            json tests = json::array();
            for (int j : fit.active) {
                RegressionProblem prob{X, y, fit.active, j, li_sigma, 0.0};
                TestOutcome out;
                if (li_sigma && li_test == "saturated") {
                    out = saturated_z_test(prob, region, li_alpha);
                    out.diagnostics.seed = seed;
                } else {
                    SelectedOptions so;
                    so.chain.n_samples = li_samples;
                    so.chain.seed = derive_seed(seed, static_cast<std::uint64_t>(j));
                    so.chain.scheme = DirectionScheme::coordinate;
                    out = li_sigma ? selected_z_test(prob, region, li_alpha, so)
                                   : selected_t_test(prob, region, li_alpha, so);
                }
                json t = outcome_json(out, li_alpha);
                t["variable"] = j;
                tests.push_back(t);
            }
            std::cout << json{{"lambda", lambda},
                              {"active", fit.active},
                              {"signs", fit.signs},
                              {"condition_signs", li_condition_signs},
                              {"tests", tests}}
                             .dump(2)
                      << '\n';
        } else if (cs->parsed() || sw->parsed()) {
            CarvingConfig cfg = CarvingConfig::from_json(read_json(cs_config));
            cfg.seed = resolve_seed(seed_flag, cfg.seed);
            if (app.count("--threads")) cfg.threads = threads;
            if (cs->parsed()) {
                const MetricsTable t = run_carving_experiment(cfg);
                if (cs_format == "csv")
                    t.write_csv(std::cout);
                else
                    std::cout << json{{"config", cfg.to_json()}, {"rows", t.to_json()}}.dump(2) << '\n';
            } else {
                const auto sweep = tradeoff_sweep(cfg, parse_index_list(sw_n1));
                std::cout << json{{"config", cfg.to_json()}, {"sweep", tradeoff_to_json(sweep)}}.dump(2) << '\n';
            }
        } else if (ag->parsed()) {
            AggregateConfig cfg = ag_config.empty() ? AggregateConfig{} : AggregateConfig::from_json(read_json(ag_config));
            cfg.seed = resolve_seed(seed_flag, cfg.seed);
            const AggregateKind kind = ag_kind == "discipline" ? AggregateKind::discipline
                                       : ag_kind == "fcr"      ? AggregateKind::fcr
                                                               : AggregateKind::fwer;
            std::cout << aggregate_error_check(kind, cfg).to_json().dump(2) << '\n';
        } else if (ga->parsed()) {
            std::cout << example_gallery(ga_which, resolve_seed(seed_flag, 1)).dump(2) << '\n';
        }
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
