#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fgp/linalg.hpp"

namespace fgp::funspace {

using linalg::Matrix;

// One discretized time-series channel: values sampled on a shared,
// strictly increasing, uniformly spaced grid.
struct FunctionalInput {
    std::string channel_id;
    std::vector<double> grid;
    std::vector<double> values;
};

// R scenarios, each carrying the same Q channels on identical grids.
// Storage is channel-major: channel c holds an R x tau value matrix.
struct ScenarioInputs {
    struct Channel {
        std::string id;
        std::vector<double> grid;
        Matrix values;  // R x tau
    };
    std::vector<Channel> channels;

    std::size_t scenario_count() const {
        return channels.empty() ? 0 : channels.front().values.rows();
    }
    std::size_t channel_count() const { return channels.size(); }

    FunctionalInput scenario_channel(std::size_t scenario, std::size_t channel) const;
    void validate() const;
};

// Orthonormal principal-component basis for one channel.
struct PcaBasis {
    std::string channel_id;
    std::vector<double> mean_curve;
    Matrix basis;                    // tau x p, orthonormal columns
    std::vector<double> eigenvalues; // retained, nonincreasing
    double total_variance = 0.0;     // sum of all tau eigenvalues
    double inertia_target = 1.0;

    std::size_t component_count() const { return basis.cols(); }
    std::size_t grid_size() const { return mean_curve.size(); }
    double dropped_eigenvalue_sum() const;
};

// Coefficient representation of all scenarios: channel c holds an R x p_c
// coefficient matrix plus the basis that produced it.
struct ProjectedInputs {
    std::vector<PcaBasis> bases;
    std::vector<Matrix> coefficients;  // per channel, R x p_c

    std::size_t scenario_count() const {
        return coefficients.empty() ? 0 : coefficients.front().rows();
    }
    std::size_t channel_count() const { return bases.size(); }
    std::vector<std::size_t> p_vector() const;

    // Coefficient rows of one scenario across all channels.
    std::vector<std::vector<double>> scenario_coefficients(std::size_t scenario) const;
};

// Principal components of the replicate matrix (rows = replicates). The
// covariance is (1/R) Fc^T Fc; components are kept until the cumulative
// inertia reaches the target. A channel whose centered variance is
// negligible (below 1e-12 * (max|entry|^2 + 1)) yields p = 0.
// Column signs are fixed so each column's largest-magnitude entry is
// positive.
PcaBasis fit_pca(const Matrix& replicates, double inertia_target,
                 std::string channel_id = {});

// alpha = Phi^T (curve - mean)
std::vector<double> project(const PcaBasis& basis, std::span<const double> curve);

// curve = mean + Phi alpha
std::vector<double> reconstruct(const PcaBasis& basis, std::span<const double> coefficients);

// Fit per-channel bases and project every scenario.
ProjectedInputs project_scenarios(const ScenarioInputs& inputs, double inertia_target);

// Project a new scenario (Q curves on the training grids) with stored bases.
std::vector<std::vector<double>> project_new_scenario(
    const std::vector<PcaBasis>& bases, const std::vector<std::vector<double>>& curves);

// Squared weighted distance between two projected scenarios:
//   sum_c ||alpha_c - alpha'_c||^2 / ell_c^2.
// The coefficient inner product is the unit-weight discrete one; grid
// spacing is absorbed into the length-scales (see lengthscale_for_grid).
double functional_distance_sq(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b,
                              std::span<const double> lengthscales);

// A length-scale quoted against the continuous integral on a grid with
// spacing dt corresponds to ell / sqrt(dt) in the unit-weight form.
inline double lengthscale_for_grid(double integral_scale_ell, double dt) {
    return integral_scale_ell / std::sqrt(dt);
}

// Nautical-convention polar-to-Cartesian: returns
// (m sin(theta), m cos(theta)) with theta in degrees from north.
std::pair<double, double> preprocess_cartesian(double magnitude, double direction_deg);

// Still water level: pointwise MSL + tide + surge.
std::vector<double> derive_swl(std::span<const double> msl, std::span<const double> tide,
                               std::span<const double> surge);

}  // namespace fgp::funspace
