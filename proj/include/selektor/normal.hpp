#pragma once

#include "selektor/rng.hpp"

#include <limits>

namespace selektor {

class IntervalUnion;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double norm_pdf(double x);
double log_norm_pdf(double x);
double norm_cdf(double x);
double norm_sf(double x);

// log P(Z > x) for Z ~ N(0,1). Uses erfc up to x = 8 and the Mills-ratio
// continued fraction beyond, so it stays finite for any finite x.
double log_norm_sf(double x);
double log_norm_cdf(double x);

// Mills ratio R(x) = P(Z > x) / phi(x).
double mills_ratio(double x);

// log(Phi(b) - Phi(a)) for a < b, either endpoint possibly infinite.
double log_norm_interval_mass(double a, double b);

double norm_quantile(double p);

// log(exp(a) + exp(b)) and log(exp(a) - exp(b)) for a >= b.
double log_add_exp(double a, double b);
double log_sub_exp(double a, double b);

// Standard normal restricted to [a, b]; exact rejection samplers
// (normal, uniform or translated-exponential proposal depending on geometry).
double sample_truncated_standard_normal(double a, double b, Rng& rng);

// N(mean, sd^2) restricted to a union of intervals.
double sample_truncated_normal(double mean, double sd, const IntervalUnion& support, Rng& rng);

} // namespace selektor
