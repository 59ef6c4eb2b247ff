#pragma once

#include "selektor/samplers.hpp"
#include "selektor/umpu.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace selektor {

// c with P(|Y| > c | |Y| > threshold) = alpha for Y ~ N(0, 1).
double file_drawer_cutoff(double threshold, double alpha);

// P(|Y| > cutoff | |Y| > threshold) under N(0, 1).
double file_drawer_conditional_error(double threshold, double cutoff = 1.959963984540054);

enum class CarveMode { split, carve };
enum class ErrorDist { gaussian, student_t };
enum class SelectionRule { lasso, oracle };

struct CarvingConfig {
    int n = 100;
    int p = 200;
    double rho = 0.3;
    int sparsity = 7;
    double signal = 7.0;
    double sigma = 1.0;
    int n1 = 100;
    CarveMode mode = CarveMode::carve;
    ErrorDist error_dist = ErrorDist::gaussian;
    double df = 5.0;
    int replicates = 1000;
    std::uint64_t seed = 20140101;
    double alpha = 0.05;
    IntervalKind decision = IntervalKind::equal_tailed;
    SelectionRule selection = SelectionRule::lasso;
    int lambda_mc_draws = 2000;
    // multiplier on lambda_mc; 2 gives the usual 2E|X'e| rule for the half-scaled objective
    double lambda_scale = 2.0;
    // chain used by the carving test when n1 < n
    int chain_samples = 2000;
    int chain_burn_in = 500;
    int chain_thin = 5;
    int threads = 1;

    void validate() const;
    static CarvingConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

struct MetricsRow {
    std::string label;
    int n1 = 0;
    CarveMode mode = CarveMode::carve;
    int replicates = 0;
    int screened = 0;
    Estimate p_screen;
    Estimate e_v;
    Estimate e_r_minus_v;
    double e_r = 0.0;
    Estimate fdr;
    Estimate power;
    Estimate level;
    long power_tests = 0;
    long level_tests = 0;
    long failures = 0;
    // mean over power tests of the classical z-test power (oracle selection only)
    double analytic_power = 0.0;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;

    static const std::vector<std::string>& columns();
    void write_csv(std::ostream& os) const;
    nlohmann::json to_json() const;
};

MetricsTable run_carving_experiment(const CarvingConfig& config);

// Split and carve at the same n1, sharing every replicate's data and selection.
MetricsTable run_carving_pair(const CarvingConfig& config);

struct TradeoffPoint {
    int n1 = 0;
    MetricsRow split;
    MetricsRow carve;
};

// Split and carve rows for each n1; the product p_screen * power is in to_json.
std::vector<TradeoffPoint> tradeoff_sweep(const CarvingConfig& base, const std::vector<int>& n1_grid);
nlohmann::json tradeoff_to_json(const std::vector<TradeoffPoint>& sweep);

enum class AggregateKind { discipline, fcr, fwer };
enum class DisciplineTest { selective, nominal, trivial };

struct AggregateConfig {
    long effects = 100000;       // discipline: number of effects
    double null_fraction = 0.8;  // share of effects with mean zero
    double effect_size = 3.0;    // mean of the non-null effects
    double threshold = 1.0;      // selection: |Y| > threshold
    double alpha = 0.05;
    DisciplineTest test = DisciplineTest::selective;
    int experiments = 2000;      // fcr and fwer
    int m = 50;                  // effects per experiment
    std::uint64_t seed = 7;

    static AggregateConfig from_json(const nlohmann::json& j);
};

struct AggregateReport {
    AggregateKind kind = AggregateKind::discipline;
    double ratio = 0.0;
    double se = 0.0;
    long numerator = 0;
    long denominator = 0;
    nlohmann::json to_json() const;
};

AggregateReport aggregate_error_check(AggregateKind kind, const AggregateConfig& config);

// Numerical content of the worked examples: "ex2", "ex3" or "ex4".
nlohmann::json example_gallery(const std::string& which, std::uint64_t seed = 1);

// Example 3 helpers: S = Y1 + Y2 with Y1, Y2 ~ N(mu, 1) independent, given Y1 > threshold.
double carving_sum_cdf(double s, double mu, double threshold);
std::pair<double, double> carving_sum_interval(double s, double threshold, double alpha);
double carving_sum_expected_length(double mu, double threshold, double alpha, int nodes = 64);

} // namespace selektor
