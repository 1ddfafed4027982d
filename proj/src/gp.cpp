#include "fgp/gp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "fgp/eval.hpp"
#include "fgp/neldermead.hpp"
#include "fgp/prng.hpp"

namespace fgp::gp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

kernels::FunctionalKernelSpec Hyperparameters::functional_spec() const {
    return {functional_kind, functional_lengthscales};
}

kernels::SpatialKernelSpec Hyperparameters::spatial_spec(bool unit_variance) const {
    return {spatial_kind, spatial_lengthscales[0], spatial_lengthscales[1],
            unit_variance ? 1.0 : spatial_variance};
}

void Hyperparameters::validate(std::size_t channel_count) const {
    if (functional_lengthscales.size() != channel_count)
        throw shape_error("hyperparameters: functional length-scale count mismatch");
    for (double ell : functional_lengthscales)
        if (!(ell > 0.0) || !std::isfinite(ell))
            throw parameter_error("hyperparameters: functional length-scales must be positive");
    for (double ell : spatial_lengthscales)
        if (!(ell > 0.0) || !std::isfinite(ell))
            throw parameter_error("hyperparameters: spatial length-scales must be positive");
    if (!(spatial_variance > 0.0) || !std::isfinite(spatial_variance))
        throw parameter_error("hyperparameters: spatial variance must be positive");
}

void TensorTrainingSet::validate() const {
    if (observations.rows() != inputs.scenario_count())
        throw shape_error("tensor training set: observation rows != scenario count");
    if (observations.cols() != locations.rows())
        throw shape_error("tensor training set: observation columns != location count");
    if (locations.cols() != 2) throw shape_error("tensor training set: locations must be S x 2");
    if (observations.size() == 0) throw data_error("tensor training set: empty");
    for (std::size_t i = 0; i < observations.size(); ++i)
        if (!std::isfinite(observations.data()[i]))
            throw data_error("tensor training set: non-finite observation");
}

TensorTrainingSet TensorTrainingSet::subset(const std::vector<std::size_t>& idx) const {
    TensorTrainingSet out;
    out.locations = locations;
    out.inputs.bases = inputs.bases;
    out.inputs.coefficients.reserve(inputs.coefficients.size());
    for (const Matrix& c : inputs.coefficients) {
        Matrix sub(idx.size(), c.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            std::copy(c.row(idx[i]).begin(), c.row(idx[i]).end(), sub.row(i).begin());
        out.inputs.coefficients.push_back(std::move(sub));
    }
    out.observations = Matrix(idx.size(), observations.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(observations.row(idx[i]).begin(), observations.row(idx[i]).end(),
                  out.observations.row(i).begin());
    return out;
}

TensorTrainingSet TensorTrainingSet::drop_scenario(std::size_t scenario) const {
    std::vector<std::size_t> keep;
    keep.reserve(scenario_count() - 1);
    for (std::size_t r = 0; r < scenario_count(); ++r)
        if (r != scenario) keep.push_back(r);
    return subset(keep);
}

void DenseTrainingSet::validate() const {
    if (points.empty()) throw data_error("dense training set: empty");
    if (noise_variance < 0.0)
        throw parameter_error("dense training set: negative noise variance");
    const std::size_t r = inputs.scenario_count();
    for (const DenseObservation& p : points) {
        if (p.scenario >= r) throw shape_error("dense training set: scenario index out of range");
        if (!std::isfinite(p.value)) throw data_error("dense training set: non-finite value");
    }
}

// ---------------------------------------------------------------------------
// likelihood internals

namespace {

struct TensorFactors {
    kronlin::CholeskyFactor l_f;
    kronlin::CholeskyFactor l_x;
    double quadratic = 0.0;
    double logdet = 0.0;
};

// Factors of the unit-variance covariance K_f (x) K~_x; the caller rescales.
TensorFactors tensor_factors_unit(const Hyperparameters& hyp, const TensorTrainingSet& train) {
    TensorFactors out;
    Matrix k_f = kernels::gram_functional(hyp.functional_spec(), train.inputs);
    Matrix k_x = kernels::gram_spatial(hyp.spatial_spec(/*unit_variance=*/true),
                                       train.locations);
    out.l_f = kronlin::cholesky(k_f, {}, "K_f");
    out.l_x = kronlin::cholesky(k_x, {}, "K_x");
    out.quadratic = kronlin::kron_quadratic(out.l_f.lower, out.l_x.lower, train.observations);
    out.logdet = kronlin::kron_logdet(out.l_f, out.l_x);
    return out;
}

// Dense covariance matrix over the observation tuples. The functional Gram
// over the R referenced scenarios is computed once and looked up per pair.
Matrix dense_covariance(const Hyperparameters& hyp, const DenseTrainingSet& train,
                        bool unit_variance) {
    const Matrix k_f = kernels::gram_functional(hyp.functional_spec(), train.inputs);
    const kernels::SpatialKernelSpec sspec = hyp.spatial_spec(unit_variance);
    const std::size_t n = train.points.size();
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const DenseObservation& pi = train.points[i];
        k(i, i) = sspec.variance + train.noise_variance;
        for (std::size_t j = i + 1; j < n; ++j) {
            const DenseObservation& pj = train.points[j];
            const double v = k_f(pi.scenario, pj.scenario) *
                             kernels::spatial_cov(sspec, pi.location, pj.location);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

struct DenseFactors {
    kronlin::CholeskyFactor l;
    double quadratic = 0.0;
    double logdet = 0.0;
};

DenseFactors dense_factors(const Hyperparameters& hyp, const DenseTrainingSet& train,
                           bool unit_variance) {
    DenseFactors out;
    Matrix k = dense_covariance(hyp, train, unit_variance);
    out.l = kronlin::cholesky(k, {}, "K");
    std::vector<double> y(train.points.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = train.points[i].value;
    const std::vector<double> a = linalg::forward_solve_vec(out.l.lower, y);
    out.quadratic = linalg::dot(a, a);
    out.logdet = out.l.log_det_twice();
    return out;
}

double gaussian_ll(double quadratic, double logdet, std::size_t n) {
    return -0.5 * quadratic - 0.5 * logdet - 0.5 * static_cast<double>(n) * kLog2Pi;
}

}  // namespace

double log_marginal_likelihood(const Hyperparameters& hyp, const TensorTrainingSet& train) {
    train.validate();
    hyp.validate(train.inputs.channel_count());
    const TensorFactors f = tensor_factors_unit(hyp, train);
    const std::size_t n = train.scenario_count() * train.location_count();
    // rescale unit-variance factors: z/sigma^2, logdet + N log sigma^2
    const double s2 = hyp.spatial_variance;
    return gaussian_ll(f.quadratic / s2, f.logdet + static_cast<double>(n) * std::log(s2), n);
}

double log_marginal_likelihood(const Hyperparameters& hyp, const DenseTrainingSet& train) {
    train.validate();
    hyp.validate(train.inputs.channel_count());
    const DenseFactors f = dense_factors(hyp, train, /*unit_variance=*/false);
    return gaussian_ll(f.quadratic, f.logdet, train.points.size());
}

// ---------------------------------------------------------------------------
// initialization heuristics

namespace {

std::vector<double> median_channel_distances(const ProjectedInputs& inputs) {
    const std::size_t r = inputs.scenario_count();
    const std::size_t q = inputs.channel_count();
    std::vector<double> out(q, 1.0);
    for (std::size_t c = 0; c < q; ++c) {
        const Matrix& coef = inputs.coefficients[c];
        if (coef.cols() == 0 || r < 2) continue;
        std::vector<double> dists;
        dists.reserve(r * (r - 1) / 2);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = i + 1; j < r; ++j) {
                double ss = 0.0;
                for (std::size_t k = 0; k < coef.cols(); ++k) {
                    const double d = coef(i, k) - coef(j, k);
                    ss += d * d;
                }
                dists.push_back(std::sqrt(ss));
            }
        const double med = median_of(std::move(dists));
        if (std::isfinite(med) && med > 0.0) out[c] = med;
    }
    return out;
}

double half_domain_diagonal(const Matrix& locations) {
    if (locations.rows() == 0) return 1.0;
    double lo1 = locations(0, 0), hi1 = lo1, lo2 = locations(0, 1), hi2 = lo2;
    for (std::size_t i = 1; i < locations.rows(); ++i) {
        lo1 = std::min(lo1, locations(i, 0));
        hi1 = std::max(hi1, locations(i, 0));
        lo2 = std::min(lo2, locations(i, 1));
        hi2 = std::max(hi2, locations(i, 1));
    }
    const double d = 0.5 * std::hypot(hi1 - lo1, hi2 - lo2);
    return d > 0.0 ? d : 1.0;
}

double observation_variance(std::span<const double> values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return var > 0.0 ? var : 1.0;
}

}  // namespace

Hyperparameters default_init(const TensorTrainingSet& train, KernelKind functional_kind,
                             KernelKind spatial_kind) {
    train.validate();
    Hyperparameters hyp;
    hyp.functional_kind = functional_kind;
    hyp.spatial_kind = spatial_kind;
    hyp.functional_lengthscales = median_channel_distances(train.inputs);
    const double ell_x = half_domain_diagonal(train.locations);
    hyp.spatial_lengthscales = {ell_x, ell_x};
    hyp.spatial_variance =
        observation_variance({train.observations.data(), train.observations.size()});
    return hyp;
}

Hyperparameters default_init(const DenseTrainingSet& train, KernelKind functional_kind,
                             KernelKind spatial_kind) {
    train.validate();
    Hyperparameters hyp;
    hyp.functional_kind = functional_kind;
    hyp.spatial_kind = spatial_kind;
    hyp.functional_lengthscales = median_channel_distances(train.inputs);
    Matrix locs(train.points.size(), 2);
    std::vector<double> values(train.points.size());
    for (std::size_t i = 0; i < train.points.size(); ++i) {
        locs(i, 0) = train.points[i].location.x1;
        locs(i, 1) = train.points[i].location.x2;
        values[i] = train.points[i].value;
    }
    const double ell_x = half_domain_diagonal(locs);
    hyp.spatial_lengthscales = {ell_x, ell_x};
    hyp.spatial_variance = observation_variance(values);
    return hyp;
}

// ---------------------------------------------------------------------------
// conditioning

FittedModel condition(const TensorTrainingSet& train, const Hyperparameters& hyp) {
    train.validate();
    hyp.validate(train.inputs.channel_count());
    FittedModel model;
    model.path = ModelPath::Kronecker;
    model.hyperparameters = hyp;
    model.tensor = train;

    Matrix k_f = kernels::gram_functional(hyp.functional_spec(), train.inputs);
    Matrix k_x = kernels::gram_spatial(hyp.spatial_spec(), train.locations);
    model.chol_f = kronlin::cholesky(k_f, {}, "K_f");
    model.chol_x = kronlin::cholesky(k_x, {}, "K_x");
    model.solve_matrix =
        kronlin::kron_tri_solve(model.chol_f.lower, model.chol_x.lower, train.observations);
    model.diagnostics.log_likelihood = gaussian_ll(
        [&] {
            double z = 0.0;
            for (std::size_t i = 0; i < model.solve_matrix.size(); ++i)
                z += model.solve_matrix.data()[i] * model.solve_matrix.data()[i];
            return z;
        }(),
        kronlin::kron_logdet(model.chol_f, model.chol_x),
        train.scenario_count() * train.location_count());
    return model;
}

FittedModel condition(const DenseTrainingSet& train, const Hyperparameters& hyp) {
    train.validate();
    hyp.validate(train.inputs.channel_count());
    FittedModel model;
    model.path = ModelPath::Dense;
    model.hyperparameters = hyp;
    model.dense = train;

    const DenseFactors f = dense_factors(hyp, train, /*unit_variance=*/false);
    model.chol_n = f.l;
    std::vector<double> y(train.points.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = train.points[i].value;
    const std::vector<double> a = linalg::forward_solve_vec(model.chol_n.lower, y);
    model.weights = linalg::backward_solve_transposed_vec(model.chol_n.lower, a);
    model.diagnostics.log_likelihood = gaussian_ll(f.quadratic, f.logdet, train.points.size());
    return model;
}

double FittedModel::recompute_log_likelihood() const {
    return path == ModelPath::Kronecker ? log_marginal_likelihood(hyperparameters, tensor)
                                        : log_marginal_likelihood(hyperparameters, dense);
}

// ---------------------------------------------------------------------------
// maximum-likelihood fitting

namespace {

struct SearchSpace {
    std::size_t channel_count = 0;
    bool profile_variance = true;  // closed-form sigma^2 = z/N

    std::vector<double> pack(const Hyperparameters& hyp) const {
        std::vector<double> theta;
        theta.reserve(channel_count + 3);
        for (double ell : hyp.functional_lengthscales) theta.push_back(std::log(ell));
        theta.push_back(std::log(hyp.spatial_lengthscales[0]));
        theta.push_back(std::log(hyp.spatial_lengthscales[1]));
        if (!profile_variance) theta.push_back(std::log(hyp.spatial_variance));
        return theta;
    }

    Hyperparameters unpack(const std::vector<double>& theta,
                           const Hyperparameters& reference) const {
        Hyperparameters hyp = reference;
        for (std::size_t c = 0; c < channel_count; ++c)
            hyp.functional_lengthscales[c] = std::exp(theta[c]);
        hyp.spatial_lengthscales[0] = std::exp(theta[channel_count]);
        hyp.spatial_lengthscales[1] = std::exp(theta[channel_count + 1]);
        if (!profile_variance) hyp.spatial_variance = std::exp(theta[channel_count + 2]);
        return hyp;
    }
};

// Profiled negative log-likelihood plus the profiled variance for a tensor set.
struct ProfiledValue {
    double negative_ll = std::numeric_limits<double>::infinity();
    double variance = 1.0;
};

ProfiledValue tensor_profiled_objective(const Hyperparameters& hyp,
                                        const TensorTrainingSet& train) {
    ProfiledValue out;
    const std::size_t n = train.scenario_count() * train.location_count();
    try {
        const TensorFactors f = tensor_factors_unit(hyp, train);
        const double nd = static_cast<double>(n);
        if (!(f.quadratic > 0.0)) return out;  // all-zero observations: degenerate profile
        out.variance = f.quadratic / nd;
        const double pll =
            -0.5 * nd - 0.5 * nd * std::log(2.0 * std::numbers::pi * out.variance) -
            0.5 * f.logdet;
        out.negative_ll = -pll;
    } catch (const factorization_error&) {
    }
    return out;
}

ProfiledValue dense_profiled_objective(const Hyperparameters& hyp,
                                       const DenseTrainingSet& train, bool profile) {
    ProfiledValue out;
    const std::size_t n = train.points.size();
    try {
        if (profile) {
            const DenseFactors f = dense_factors(hyp, train, /*unit_variance=*/true);
            const double nd = static_cast<double>(n);
            if (!(f.quadratic > 0.0)) return out;
            out.variance = f.quadratic / nd;
            out.negative_ll = 0.5 * nd + 0.5 * nd * std::log(2.0 * std::numbers::pi * out.variance) +
                              0.5 * f.logdet;
        } else {
            const DenseFactors f = dense_factors(hyp, train, /*unit_variance=*/false);
            out.variance = hyp.spatial_variance;
            out.negative_ll = -gaussian_ll(f.quadratic, f.logdet, n);
        }
    } catch (const factorization_error&) {
    }
    return out;
}

template <typename Objective>
FitDiagnostics run_restarts(const SearchSpace& space, const Hyperparameters& init,
                            const OptimizerConfig& config, const Objective& objective,
                            std::vector<double>& best_theta) {
    FitDiagnostics diag;
    const std::vector<double> theta0 = space.pack(init);
    rng::SplitMix64 stream(rng::SplitMix64::mix(config.seed ^ 0x66697453747265ULL));

    optim::NelderMeadOptions nm;
    nm.max_evaluations = std::max(1, config.max_evaluations);
    nm.x_tolerance = config.tolerance;
    nm.f_tolerance = config.tolerance * 1e-2;

    const int restarts = std::max(1, config.restarts);
    double best = std::numeric_limits<double>::infinity();
    for (int t = 0; t < restarts; ++t) {
        std::vector<double> start = theta0;
        if (t > 0) {
            rng::SplitMix64 jitter = stream.split(static_cast<std::uint64_t>(t));
            for (double& v : start) v += config.restart_jitter_sd * jitter.normal();
        }
        const optim::NelderMeadResult res = optim::nelder_mead_minimize(objective, start, nm);
        RestartRecord rec;
        rec.evaluations = res.evaluations;
        rec.converged = res.converged;
        rec.failed = !std::isfinite(res.value);
        rec.log_likelihood = rec.failed ? -std::numeric_limits<double>::infinity() : -res.value;
        diag.restart_table.push_back(rec);
        diag.evaluations += res.evaluations;
        ++diag.restarts_run;
        if (res.value < best) {
            best = res.value;
            best_theta = res.x;
            diag.converged = res.converged;
        }
    }
    if (!std::isfinite(best))
        throw fit_error("fit_ml: every restart failed to factorize the covariance");
    diag.log_likelihood = -best;
    return diag;
}

}  // namespace

FittedModel fit_ml(const TensorTrainingSet& train, const Hyperparameters& init,
                   const OptimizerConfig& config) {
    train.validate();
    init.validate(train.inputs.channel_count());

    SearchSpace space{train.inputs.channel_count(), /*profile_variance=*/true};
    auto objective = [&](const std::vector<double>& theta) {
        return tensor_profiled_objective(space.unpack(theta, init), train).negative_ll;
    };

    std::vector<double> best_theta;
    FitDiagnostics diag = run_restarts(space, init, config, objective, best_theta);

    Hyperparameters best = space.unpack(best_theta, init);
    best.spatial_variance = tensor_profiled_objective(best, train).variance;

    FittedModel model = condition(train, best);
    diag.log_likelihood = model.diagnostics.log_likelihood;
    model.diagnostics = diag;
    return model;
}

FittedModel fit_ml(const DenseTrainingSet& train, const Hyperparameters& init,
                   const OptimizerConfig& config) {
    train.validate();
    init.validate(train.inputs.channel_count());

    const bool profile = train.noise_variance == 0.0;
    SearchSpace space{train.inputs.channel_count(), profile};
    auto objective = [&](const std::vector<double>& theta) {
        return dense_profiled_objective(space.unpack(theta, init), train, profile).negative_ll;
    };

    std::vector<double> best_theta;
    FitDiagnostics diag = run_restarts(space, init, config, objective, best_theta);

    Hyperparameters best = space.unpack(best_theta, init);
    if (profile) best.spatial_variance = dense_profiled_objective(best, train, true).variance;

    FittedModel model = condition(train, best);
    diag.log_likelihood = model.diagnostics.log_likelihood;
    model.diagnostics = diag;
    return model;
}

// ---------------------------------------------------------------------------
// prediction

namespace {

void apply_clamp(MapPrediction& pred, bool clamp) {
    pred.clamped.assign(pred.mean.size(), 0);
    if (!clamp) return;
    for (std::size_t i = 0; i < pred.mean.size(); ++i)
        if (pred.mean[i] < 0.0) {
            pred.mean[i] = 0.0;
            pred.clamped[i] = 1;
        }
}

std::vector<double> functional_cross(const FittedModel& model,
                                     const std::vector<std::vector<double>>& coefficients) {
    const ProjectedInputs& inputs = model.projected_inputs();
    const kernels::FunctionalKernelSpec fspec = model.hyperparameters.functional_spec();
    const std::size_t r = inputs.scenario_count();
    std::vector<double> k_f_star(r);
    for (std::size_t i = 0; i < r; ++i)
        k_f_star[i] =
            kernels::functional_corr(fspec, coefficients, inputs.scenario_coefficients(i));
    return k_f_star;
}

MapPrediction predict_scenario_kron(const FittedModel& model,
                                    const std::vector<std::vector<double>>& coefficients,
                                    const Matrix& locations, const PredictOptions& opts) {
    const std::size_t s_train = model.tensor.location_count();
    const std::size_t nq = locations.rows();
    const kernels::SpatialKernelSpec sspec = model.hyperparameters.spatial_spec();
    const double prior = model.hyperparameters.spatial_variance;

    const std::vector<double> k_f_star = functional_cross(model, coefficients);
    const std::vector<double> b_f = linalg::forward_solve_vec(model.chol_f.lower, k_f_star);
    const double bf_norm2 = linalg::dot(b_f, b_f);

    // g = A^T b_f, so that mu(x) = g^T b_x
    std::vector<double> g(s_train, 0.0);
    for (std::size_t i = 0; i < b_f.size(); ++i) {
        const double w = b_f[i];
        if (w == 0.0) continue;
        auto row = model.solve_matrix.row(i);
        for (std::size_t j = 0; j < s_train; ++j) g[j] += w * row[j];
    }

    MapPrediction pred;
    pred.mean.resize(nq);
    pred.variance.assign(nq, 0.0);

    std::vector<double> k_x_star(s_train);
    for (std::size_t q = 0; q < nq; ++q) {
        const kernels::Point2 xq{locations(q, 0), locations(q, 1)};
        for (std::size_t j = 0; j < s_train; ++j)
            k_x_star[j] = kernels::spatial_cov(
                sspec, xq, {model.tensor.locations(j, 0), model.tensor.locations(j, 1)});
        const std::vector<double> b_x = linalg::forward_solve_vec(model.chol_x.lower, k_x_star);
        pred.mean[q] = linalg::dot(g, b_x);
        if (opts.compute_variance) {
            const double v = prior - bf_norm2 * linalg::dot(b_x, b_x);
            if (v >= 0.0)
                pred.variance[q] = v;
            else if (v >= -1e-10 * prior)
                pred.variance[q] = 0.0;
            else
                throw numeric_error("predict: posterior variance negative beyond clamp band");
        }
    }
    apply_clamp(pred, opts.clamp_negative);
    return pred;
}

MapPrediction predict_scenario_dense(const FittedModel& model,
                                     const std::vector<std::vector<double>>& coefficients,
                                     const Matrix& locations, const PredictOptions& opts) {
    const std::size_t n = model.dense.points.size();
    const std::size_t nq = locations.rows();
    const kernels::SpatialKernelSpec sspec = model.hyperparameters.spatial_spec();
    const double prior = model.hyperparameters.spatial_variance;
    const std::vector<double> k_f_star = functional_cross(model, coefficients);

    MapPrediction pred;
    pred.mean.resize(nq);
    pred.variance.assign(nq, 0.0);

    std::vector<double> k(n);
    for (std::size_t q = 0; q < nq; ++q) {
        const kernels::Point2 xq{locations(q, 0), locations(q, 1)};
        for (std::size_t j = 0; j < n; ++j) {
            const DenseObservation& p = model.dense.points[j];
            k[j] = k_f_star[p.scenario] * kernels::spatial_cov(sspec, xq, p.location);
        }
        pred.mean[q] = linalg::dot(k, model.weights);
        if (opts.compute_variance) {
            const std::vector<double> b = linalg::forward_solve_vec(model.chol_n.lower, k);
            const double v = prior - linalg::dot(b, b);
            if (v >= 0.0)
                pred.variance[q] = v;
            else if (v >= -1e-10 * prior)
                pred.variance[q] = 0.0;
            else
                throw numeric_error("predict: posterior variance negative beyond clamp band");
        }
    }
    apply_clamp(pred, opts.clamp_negative);
    return pred;
}

}  // namespace

MapPrediction predict_scenario(const FittedModel& model,
                               const std::vector<std::vector<double>>& coefficients,
                               const Matrix& locations, const PredictOptions& opts) {
    if (locations.cols() != 2) throw shape_error("predict: locations must be n x 2");
    const std::vector<std::size_t> p = model.projected_inputs().p_vector();
    if (coefficients.size() != p.size())
        throw shape_error("predict: query channel count does not match the model");
    for (std::size_t c = 0; c < p.size(); ++c)
        if (coefficients[c].size() != p[c])
            throw shape_error("predict: query coefficient length does not match the model basis");
    return model.path == ModelPath::Kronecker
               ? predict_scenario_kron(model, coefficients, locations, opts)
               : predict_scenario_dense(model, coefficients, locations, opts);
}

MapPrediction predict(const FittedModel& model, const std::vector<Query>& queries,
                      const PredictOptions& opts) {
    MapPrediction out;
    out.mean.reserve(queries.size());
    out.variance.reserve(queries.size());
    out.clamped.reserve(queries.size());
    for (const Query& q : queries) {
        Matrix loc(1, 2);
        loc(0, 0) = q.location.x1;
        loc(0, 1) = q.location.x2;
        MapPrediction one = predict_scenario(model, q.coefficients, loc, opts);
        out.mean.push_back(one.mean[0]);
        out.variance.push_back(one.variance[0]);
        out.clamped.push_back(one.clamped[0]);
    }
    return out;
}

MapPrediction forecast_map(const FittedModel& model,
                           const std::vector<std::vector<double>>& curves,
                           const Matrix& locations, const PredictOptions& opts) {
    const std::vector<std::vector<double>> coeffs =
        funspace::project_new_scenario(model.projected_inputs().bases, curves);
    return predict_scenario(model, coeffs, locations, opts);
}

// ---------------------------------------------------------------------------
// leave-one-out

namespace {

struct PooledStats {
    double variance = 0.0;
    std::vector<std::size_t> wet_locations;
};

PooledStats pooled_variance_over_wet(const Matrix& observations, double wet_threshold) {
    PooledStats out;
    const std::size_t r = observations.rows();
    const std::size_t s = observations.cols();
    for (std::size_t j = 0; j < s; ++j) {
        bool wet = false;
        for (std::size_t i = 0; i < r; ++i)
            if (observations(i, j) > wet_threshold) {
                wet = true;
                break;
            }
        if (wet) out.wet_locations.push_back(j);
    }
    if (out.wet_locations.empty())  // signed synthetic data: pool over everything
        for (std::size_t j = 0; j < s; ++j) out.wet_locations.push_back(j);

    double mean = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j : out.wet_locations) {
            mean += observations(i, j);
            ++n;
        }
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j : out.wet_locations) {
            const double d = observations(i, j) - mean;
            out.variance += d * d;
        }
    out.variance /= static_cast<double>(n);
    return out;
}

}  // namespace

LooResult loo(const TensorTrainingSet& train, const LooConfig& config) {
    train.validate();
    const std::size_t r = train.scenario_count();
    if (r < 2) throw data_error("loo: needs at least two scenarios");

    LooResult result;
    const PooledStats pooled = pooled_variance_over_wet(train.observations, config.wet_threshold);
    result.pooled_variance = pooled.variance;
    result.pooled_location_count = pooled.wet_locations.size();
    result.folds.resize(r);

    Hyperparameters shared;
    bool have_shared = false;
    if (config.reuse_hyperparameters) {
        const Hyperparameters init = default_init(train);
        const FittedModel full = fit_ml(train, init, config.optimizer);
        shared = full.hyperparameters;
        have_shared = true;
        result.fits_run = 1;
    }

    std::atomic<int> fits{0};
    auto run_fold = [&](std::size_t fold) {
        LooFold& out = result.folds[fold];
        out.fold = fold;
        try {
            const TensorTrainingSet sub = train.drop_scenario(fold);
            FittedModel model = [&] {
                if (have_shared) return condition(sub, shared);
                OptimizerConfig cfg = config.optimizer;
                cfg.seed = rng::SplitMix64::mix(config.optimizer.seed ^ (0x1009 + fold));
                ++fits;
                return fit_ml(sub, default_init(sub), cfg);
            }();
            out.fitted_log_likelihood = model.diagnostics.log_likelihood;

            PredictOptions popts;
            popts.clamp_negative = config.clamp_negative;
            out.prediction =
                predict_scenario(model, train.inputs.scenario_coefficients(fold),
                                 train.locations, popts);

            const auto truth = train.observations.row(fold);
            out.rmse = eval::rmse(truth, out.prediction.mean);

            double mean = 0.0;
            for (double v : truth) mean += v;
            mean /= static_cast<double>(truth.size());
            double sstot = 0.0;
            for (double v : truth) sstot += (v - mean) * (v - mean);
            if (sstot > 0.0) out.q2 = eval::q2(truth, out.prediction.mean);

            std::vector<double> wet_truth, wet_pred;
            wet_truth.reserve(pooled.wet_locations.size());
            for (std::size_t j : pooled.wet_locations) {
                wet_truth.push_back(truth[j]);
                wet_pred.push_back(out.prediction.mean[j]);
            }
            out.q2_pooled = eval::q2_pooled(wet_truth, wet_pred, pooled.variance);

            std::vector<double> sd(out.prediction.variance.size());
            for (std::size_t j = 0; j < sd.size(); ++j)
                sd[j] = std::sqrt(std::max(0.0, out.prediction.variance[j]));
            out.ca = eval::ca(truth, out.prediction.mean, sd, config.ca_multiplier);
        } catch (const error& e) {
            out.fit_failed = true;
            out.error = e.what();
        }
    };

    const int workers = std::max(1, config.workers);
    if (workers == 1) {
        for (std::size_t fold = 0; fold < r; ++fold) run_fold(fold);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t fold = next.fetch_add(1); fold < r; fold = next.fetch_add(1))
                    run_fold(fold);
            });
        for (std::thread& t : pool) t.join();
    }
    result.fits_run += fits.load();

    std::vector<double> rmses, q2s, pooled_q2s, cas;
    for (const LooFold& f : result.folds) {
        if (f.fit_failed) continue;
        rmses.push_back(f.rmse);
        if (std::isfinite(f.q2)) q2s.push_back(f.q2);
        pooled_q2s.push_back(f.q2_pooled);
        cas.push_back(f.ca);
    }
    result.median_rmse = median_of(std::move(rmses));
    result.median_q2 = median_of(std::move(q2s));
    result.median_q2_pooled = median_of(std::move(pooled_q2s));
    result.median_ca = median_of(std::move(cas));
    return result;
}

}  // namespace fgp::gp
