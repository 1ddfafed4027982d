#include "fgp/funspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fgp::funspace {

FunctionalInput ScenarioInputs::scenario_channel(std::size_t scenario,
                                                 std::size_t channel) const {
    const Channel& ch = channels.at(channel);
    FunctionalInput f;
    f.channel_id = ch.id;
    f.grid = ch.grid;
    f.values.assign(ch.values.row(scenario).begin(), ch.values.row(scenario).end());
    return f;
}

void ScenarioInputs::validate() const {
    if (channels.empty()) throw data_error("ScenarioInputs: no channels");
    const std::size_t r = channels.front().values.rows();
    if (r == 0) throw data_error("ScenarioInputs: no scenarios");
    for (const Channel& ch : channels) {
        if (ch.values.rows() != r)
            throw shape_error("ScenarioInputs: channel '" + ch.id +
                              "' has a different scenario count");
        if (ch.values.cols() != ch.grid.size())
            throw shape_error("ScenarioInputs: channel '" + ch.id +
                              "' grid/value length mismatch");
        if (ch.grid.size() < 2)
            throw data_error("ScenarioInputs: channel '" + ch.id + "' needs at least 2 samples");
        for (std::size_t t = 1; t < ch.grid.size(); ++t)
            if (!(ch.grid[t] > ch.grid[t - 1]))
                throw data_error("ScenarioInputs: channel '" + ch.id +
                                 "' grid is not strictly increasing");
        for (std::size_t i = 0; i < ch.values.size(); ++i)
            if (!std::isfinite(ch.values.data()[i]))
                throw data_error("ScenarioInputs: channel '" + ch.id +
                                 "' contains non-finite values");
    }
}

double PcaBasis::dropped_eigenvalue_sum() const {
    double kept = 0.0;
    for (double v : eigenvalues) kept += v;
    return std::max(0.0, total_variance - kept);
}

std::vector<std::size_t> ProjectedInputs::p_vector() const {
    std::vector<std::size_t> p;
    p.reserve(bases.size());
    for (const PcaBasis& b : bases) p.push_back(b.component_count());
    return p;
}

std::vector<std::vector<double>> ProjectedInputs::scenario_coefficients(
    std::size_t scenario) const {
    std::vector<std::vector<double>> out(coefficients.size());
    for (std::size_t c = 0; c < coefficients.size(); ++c) {
        auto row = coefficients[c].row(scenario);
        out[c].assign(row.begin(), row.end());
    }
    return out;
}

PcaBasis fit_pca(const Matrix& replicates, double inertia_target, std::string channel_id) {
    if (!(inertia_target > 0.0) || inertia_target > 1.0)
        throw parameter_error("fit_pca: inertia target must lie in (0, 1]");
    const std::size_t r = replicates.rows();
    const std::size_t tau = replicates.cols();
    if (r == 0 || tau == 0) throw data_error("fit_pca: empty replicate matrix");

    double max_abs = 0.0;
    for (std::size_t i = 0; i < replicates.size(); ++i) {
        const double v = replicates.data()[i];
        if (!std::isfinite(v)) throw data_error("fit_pca: non-finite replicate entry");
        max_abs = std::max(max_abs, std::abs(v));
    }

    PcaBasis out;
    out.channel_id = std::move(channel_id);
    out.inertia_target = inertia_target;
    out.mean_curve.assign(tau, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t t = 0; t < tau; ++t) out.mean_curve[t] += replicates(i, t);
    for (double& m : out.mean_curve) m /= static_cast<double>(r);

    Matrix centered(r, tau);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t t = 0; t < tau; ++t)
            centered(i, t) = replicates(i, t) - out.mean_curve[t];

    // covariance (1/R) Fc^T Fc
    Matrix cov(tau, tau);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t s = 0; s < tau; ++s) {
            const double cis = centered(i, s);
            if (cis == 0.0) continue;
            for (std::size_t t = s; t < tau; ++t) cov(s, t) += cis * centered(i, t);
        }
    for (std::size_t s = 0; s < tau; ++s)
        for (std::size_t t = s; t < tau; ++t) {
            const double v = cov(s, t) / static_cast<double>(r);
            cov(s, t) = v;
            cov(t, s) = v;
        }

    double total = 0.0;
    for (std::size_t t = 0; t < tau; ++t) total += cov(t, t);
    out.total_variance = total;

    if (total < 1e-12 * (max_abs * max_abs + 1.0)) {
        out.basis = Matrix(tau, 0);
        return out;  // constant channel: mean only
    }

    linalg::EighResult eig = linalg::jacobi_eigh(cov);

    std::size_t p = 0;
    double cum = 0.0;
    for (; p < tau; ) {
        cum += std::max(0.0, eig.values[p]);
        ++p;
        if (cum >= inertia_target * total) break;
    }

    out.eigenvalues.assign(eig.values.begin(), eig.values.begin() + p);
    for (double& v : out.eigenvalues) v = std::max(0.0, v);

    out.basis = Matrix(tau, p);
    for (std::size_t j = 0; j < p; ++j) {
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t t = 0; t < tau; ++t) {
            const double a = std::abs(eig.vectors(t, j));
            if (a > best) {
                best = a;
                arg = t;
            }
        }
        const double sign = eig.vectors(arg, j) < 0.0 ? -1.0 : 1.0;
        for (std::size_t t = 0; t < tau; ++t) out.basis(t, j) = sign * eig.vectors(t, j);
    }
    return out;
}

std::vector<double> project(const PcaBasis& basis, std::span<const double> curve) {
    if (curve.size() != basis.grid_size())
        throw shape_error("project: curve length does not match basis grid");
    const std::size_t p = basis.component_count();
    std::vector<double> alpha(p, 0.0);
    for (std::size_t t = 0; t < curve.size(); ++t) {
        const double d = curve[t] - basis.mean_curve[t];
        if (d == 0.0) continue;
        for (std::size_t j = 0; j < p; ++j) alpha[j] += basis.basis(t, j) * d;
    }
    return alpha;
}

std::vector<double> reconstruct(const PcaBasis& basis, std::span<const double> coefficients) {
    if (coefficients.size() != basis.component_count())
        throw shape_error("reconstruct: coefficient length does not match basis");
    std::vector<double> curve = basis.mean_curve;
    for (std::size_t j = 0; j < coefficients.size(); ++j) {
        const double a = coefficients[j];
        if (a == 0.0) continue;
        for (std::size_t t = 0; t < curve.size(); ++t) curve[t] += basis.basis(t, j) * a;
    }
    return curve;
}

ProjectedInputs project_scenarios(const ScenarioInputs& inputs, double inertia_target) {
    inputs.validate();
    ProjectedInputs out;
    const std::size_t r = inputs.scenario_count();
    for (const ScenarioInputs::Channel& ch : inputs.channels) {
        PcaBasis basis = fit_pca(ch.values, inertia_target, ch.id);
        Matrix coeffs(r, basis.component_count());
        for (std::size_t i = 0; i < r; ++i) {
            std::vector<double> a = project(basis, ch.values.row(i));
            std::copy(a.begin(), a.end(), coeffs.row(i).begin());
        }
        out.bases.push_back(std::move(basis));
        out.coefficients.push_back(std::move(coeffs));
    }
    return out;
}

std::vector<std::vector<double>> project_new_scenario(
    const std::vector<PcaBasis>& bases, const std::vector<std::vector<double>>& curves) {
    if (curves.size() != bases.size())
        throw shape_error("project_new_scenario: channel count mismatch");
    std::vector<std::vector<double>> coeffs(bases.size());
    for (std::size_t c = 0; c < bases.size(); ++c)
        coeffs[c] = project(bases[c], curves[c]);
    return coeffs;
}

double functional_distance_sq(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b,
                              std::span<const double> lengthscales) {
    if (a.size() != b.size() || a.size() != lengthscales.size())
        throw shape_error("functional_distance_sq: channel count mismatch");
    double total = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double ell = lengthscales[c];
        if (!(ell > 0.0)) throw parameter_error("functional_distance_sq: length-scale must be positive");
        if (a[c].size() != b[c].size())
            throw shape_error("functional_distance_sq: coefficient length mismatch");
        double ss = 0.0;
        for (std::size_t j = 0; j < a[c].size(); ++j) {
            const double d = a[c][j] - b[c][j];
            ss += d * d;
        }
        total += ss / (ell * ell);
    }
    return total;
}

std::pair<double, double> preprocess_cartesian(double magnitude, double direction_deg) {
    if (magnitude < 0.0) throw data_error("preprocess_cartesian: negative magnitude");
    const double theta = direction_deg * std::numbers::pi / 180.0;
    return {magnitude * std::sin(theta), magnitude * std::cos(theta)};
}

std::vector<double> derive_swl(std::span<const double> msl, std::span<const double> tide,
                               std::span<const double> surge) {
    if (msl.size() != tide.size() || msl.size() != surge.size())
        throw shape_error("derive_swl: curve lengths differ");
    std::vector<double> swl(msl.size());
    for (std::size_t t = 0; t < msl.size(); ++t) swl[t] = msl[t] + tide[t] + surge[t];
    return swl;
}

}  // namespace fgp::funspace
