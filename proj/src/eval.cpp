#include "fgp/eval.hpp"

#include <cmath>

#include "fgp/common.hpp"

namespace fgp::eval {

MetricReport metric_report(std::span<const double> test, std::span<const double> predicted_mean,
                           std::span<const double> predicted_sd,
                           std::span<const double> ca_multipliers) {
    MetricReport report;
    report.n_test = test.size();
    report.rmse = rmse(test, predicted_mean);
    report.q2 = q2(test, predicted_mean);
    for (double c : ca_multipliers) report.ca[c] = ca(test, predicted_mean, predicted_sd, c);
    return report;
}

MetricReport metric_report(std::span<const double> test, std::span<const double> predicted_mean,
                           std::span<const double> predicted_sd) {
    static constexpr std::array<double, 3> kDefault{1.0, 2.0, 3.0};
    return metric_report(test, predicted_mean, predicted_sd, kDefault);
}

double rmse(std::span<const double> test, std::span<const double> predicted) {
    if (test.size() != predicted.size()) throw shape_error("rmse: length mismatch");
    if (test.empty()) throw data_error("rmse: empty input");
    double sse = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double d = test[i] - predicted[i];
        sse += d * d;
    }
    return std::sqrt(sse / static_cast<double>(test.size()));
}

double q2(std::span<const double> test, std::span<const double> predicted) {
    if (test.size() != predicted.size()) throw shape_error("q2: length mismatch");
    if (test.size() < 2) throw data_error("q2: needs at least two test points");
    double mean = 0.0;
    for (double v : test) mean += v;
    mean /= static_cast<double>(test.size());
    double sse = 0.0;
    double sstot = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double e = test[i] - predicted[i];
        const double d = test[i] - mean;
        sse += e * e;
        sstot += d * d;
    }
    if (!(sstot > 0.0))
        throw data_error("q2: degenerate test variance; use q2_pooled instead");
    return 1.0 - sse / sstot;
}

double q2_pooled(std::span<const double> test, std::span<const double> predicted,
                 double pooled_variance) {
    if (test.size() != predicted.size()) throw shape_error("q2_pooled: length mismatch");
    if (test.empty()) throw data_error("q2_pooled: empty input");
    if (!(pooled_variance > 0.0))
        throw parameter_error("q2_pooled: pooled variance must be positive");
    double mse = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double e = test[i] - predicted[i];
        mse += e * e;
    }
    mse /= static_cast<double>(test.size());
    return 1.0 - mse / pooled_variance;
}

double ca(std::span<const double> test, std::span<const double> predicted_mean,
          std::span<const double> predicted_sd, double c) {
    if (test.size() != predicted_mean.size() || test.size() != predicted_sd.size())
        throw shape_error("ca: length mismatch");
    if (test.empty()) throw data_error("ca: empty input");
    if (c < 0.0) throw parameter_error("ca: interval multiplier must be nonnegative");
    std::size_t inside = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (predicted_sd[i] < 0.0) throw data_error("ca: negative standard deviation");
        if (std::abs(test[i] - predicted_mean[i]) <= c * predicted_sd[i]) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(test.size());
}

std::string to_string(FloodCategory category) {
    switch (category) {
        case FloodCategory::Minor: return "minor";
        case FloodCategory::Moderate: return "moderate";
        case FloodCategory::Serious: return "serious";
        case FloodCategory::Severe: return "severe";
    }
    throw parameter_error("unknown flood category");
}

FloodCategory classify_flood(double h_max) {
    if (h_max < 0.0) throw data_error("classify_flood: negative water height");
    if (h_max <= 0.5) return FloodCategory::Minor;
    if (h_max <= 1.0) return FloodCategory::Moderate;
    if (h_max <= 1.5) return FloodCategory::Serious;
    return FloodCategory::Severe;
}

std::array<double, 4> category_proportions(std::span<const double> values) {
    if (values.empty()) throw data_error("category_proportions: empty input");
    std::array<double, 4> counts{0.0, 0.0, 0.0, 0.0};
    for (double v : values) counts[static_cast<std::size_t>(classify_flood(v))] += 1.0;
    for (double& c : counts) c /= static_cast<double>(values.size());
    return counts;
}

}  // namespace fgp::eval
