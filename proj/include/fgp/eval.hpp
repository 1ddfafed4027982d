#pragma once

#include <array>
#include <map>
#include <span>
#include <string>

#include "fgp/common.hpp"

namespace fgp::eval {

// Bundled indicators for one test set: point-estimate quality (rmse, q2)
// plus the coverage curve over interval half-width multipliers.
struct MetricReport {
    double rmse = 0.0;
    double q2 = 0.0;
    std::map<double, double> ca;  // multiplier c -> proportion covered
    std::size_t n_test = 0;
};

// Computes every indicator at once; the overload without multipliers uses
// the coverage curve at c = 1, 2, 3.
MetricReport metric_report(std::span<const double> test, std::span<const double> predicted_mean,
                           std::span<const double> predicted_sd,
                           std::span<const double> ca_multipliers);
MetricReport metric_report(std::span<const double> test, std::span<const double> predicted_mean,
                           std::span<const double> predicted_sd);

// Root mean square error.
double rmse(std::span<const double> test, std::span<const double> predicted);

// Q2 = 1 - SSE / SStot with SStot about the test mean. Requires a
// nondegenerate test variance; no-variance folds should use q2_pooled.
double q2(std::span<const double> test, std::span<const double> predicted);

// Q2 variant normalized by an externally pooled variance, defined even for
// zero-variance test vectors.
double q2_pooled(std::span<const double> test, std::span<const double> predicted,
                 double pooled_variance);

// Coverage accuracy: fraction of test points inside the +-c sd interval.
double ca(std::span<const double> test, std::span<const double> predicted_mean,
          std::span<const double> predicted_sd, double c);

enum class FloodCategory { Minor = 0, Moderate = 1, Serious = 2, Severe = 3 };

std::string to_string(FloodCategory category);

// minor: h <= 0.5, moderate: 0.5 < h <= 1, serious: 1 < h <= 1.5,
// severe: h > 1.5 (meters).
FloodCategory classify_flood(double h_max);

// Normalized histogram over the four flood categories.
std::array<double, 4> category_proportions(std::span<const double> values);

}  // namespace fgp::eval
