#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fgp/funspace.hpp"
#include "fgp/kernels.hpp"
#include "fgp/kronlin.hpp"

namespace fgp::gp {

using funspace::ProjectedInputs;
using kernels::KernelKind;
using kernels::Point2;
using linalg::Matrix;

struct Hyperparameters {
    KernelKind functional_kind = KernelKind::Matern52;
    KernelKind spatial_kind = KernelKind::Matern52;
    std::vector<double> functional_lengthscales;
    std::array<double, 2> spatial_lengthscales{1.0, 1.0};
    double spatial_variance = 1.0;

    kernels::FunctionalKernelSpec functional_spec() const;
    kernels::SpatialKernelSpec spatial_spec(bool unit_variance = false) const;
    void validate(std::size_t channel_count) const;
};

// Complete R x S grid of observations: every scenario shares the S locations.
struct TensorTrainingSet {
    ProjectedInputs inputs;
    Matrix locations;     // S x 2
    Matrix observations;  // R x S

    std::size_t scenario_count() const { return observations.rows(); }
    std::size_t location_count() const { return observations.cols(); }
    void validate() const;

    TensorTrainingSet subset(const std::vector<std::size_t>& scenario_indices) const;
    TensorTrainingSet drop_scenario(std::size_t scenario) const;
};

// Unstructured (scenario, location, value) tuples; no tensor structure assumed.
struct DenseObservation {
    std::size_t scenario = 0;
    Point2 location;
    double value = 0.0;
};

struct DenseTrainingSet {
    ProjectedInputs inputs;
    std::vector<DenseObservation> points;
    double noise_variance = 0.0;

    std::size_t sample_count() const { return points.size(); }
    void validate() const;
};

struct OptimizerConfig {
    int max_evaluations = 400;      // per restart
    int restarts = 3;               // first restart starts from the given init
    std::uint64_t seed = 0;
    double tolerance = 1e-7;
    double restart_jitter_sd = 0.7; // log-space sd of restart perturbations
};

struct RestartRecord {
    double log_likelihood = -std::numeric_limits<double>::infinity();
    int evaluations = 0;
    bool converged = false;
    bool failed = false;
};

struct FitDiagnostics {
    double log_likelihood = -std::numeric_limits<double>::infinity();
    long evaluations = 0;
    int restarts_run = 0;
    bool converged = false;
    std::vector<RestartRecord> restart_table;
};

enum class ModelPath { Kronecker, Dense };

// Conditioned GP with cached factorizations. Immutable after construction.
struct FittedModel {
    ModelPath path = ModelPath::Kronecker;
    Hyperparameters hyperparameters;

    TensorTrainingSet tensor;  // populated on the Kronecker path
    DenseTrainingSet dense;    // populated on the dense path

    // Kronecker caches: L_x carries the spatial variance.
    kronlin::CholeskyFactor chol_f;
    kronlin::CholeskyFactor chol_x;
    Matrix solve_matrix;  // A = L_f^{-1} Y L_x^{-T}

    // Dense caches.
    kronlin::CholeskyFactor chol_n;
    std::vector<double> weights;  // K^{-1} y

    FitDiagnostics diagnostics;

    const ProjectedInputs& projected_inputs() const {
        return path == ModelPath::Kronecker ? tensor.inputs : dense.inputs;
    }

    // Recomputes the marginal likelihood from the stored training data.
    double recompute_log_likelihood() const;
};

// Gaussian log marginal likelihood: -z/2 - log|K|/2 - (N/2) log 2 pi.
double log_marginal_likelihood(const Hyperparameters& hyp, const TensorTrainingSet& train);
double log_marginal_likelihood(const Hyperparameters& hyp, const DenseTrainingSet& train);

// Scale-free defaults: per-channel median pairwise coefficient distance for
// the functional length-scales, half the domain diagonal for the spatial ones.
Hyperparameters default_init(const TensorTrainingSet& train,
                             KernelKind functional_kind = KernelKind::Matern52,
                             KernelKind spatial_kind = KernelKind::Matern52);
Hyperparameters default_init(const DenseTrainingSet& train,
                             KernelKind functional_kind = KernelKind::Matern52,
                             KernelKind spatial_kind = KernelKind::Matern52);

// Condition on the training data at fixed hyperparameters (no optimization).
FittedModel condition(const TensorTrainingSet& train, const Hyperparameters& hyp);
FittedModel condition(const DenseTrainingSet& train, const Hyperparameters& hyp);

// Maximum-likelihood fit over log length-scales with a derivative-free
// simplex search and jittered restarts. The spatial variance is profiled in
// closed form (sigma^2 = z/N) whenever the noise variance is zero; with a
// nonzero dense-path noise variance it joins the search space instead.
// Deterministic for a fixed seed.
FittedModel fit_ml(const TensorTrainingSet& train, const Hyperparameters& init,
                   const OptimizerConfig& config = {});
FittedModel fit_ml(const DenseTrainingSet& train, const Hyperparameters& init,
                   const OptimizerConfig& config = {});

struct PredictOptions {
    bool clamp_negative = false;
    bool compute_variance = true;
};

struct MapPrediction {
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<std::uint8_t> clamped;
};

// One projected scenario evaluated at many locations.
MapPrediction predict_scenario(const FittedModel& model,
                               const std::vector<std::vector<double>>& coefficients,
                               const Matrix& locations, const PredictOptions& opts = {});

struct Query {
    std::vector<std::vector<double>> coefficients;
    Point2 location;
};

MapPrediction predict(const FittedModel& model, const std::vector<Query>& queries,
                      const PredictOptions& opts = {});

// Projects raw curves with the stored bases, then predicts a whole map.
MapPrediction forecast_map(const FittedModel& model,
                           const std::vector<std::vector<double>>& curves,
                           const Matrix& locations, const PredictOptions& opts = {});

struct LooConfig {
    OptimizerConfig optimizer;
    bool reuse_hyperparameters = false;  // true: one fit on the full set
    bool clamp_negative = false;
    double ca_multiplier = 2.0;
    double wet_threshold = 0.0;
    int workers = 1;
};

struct LooFold {
    std::size_t fold = 0;
    MapPrediction prediction;
    double rmse = 0.0;
    double q2 = std::numeric_limits<double>::quiet_NaN();  // NaN when fold variance is 0
    double q2_pooled = 0.0;
    double ca = 0.0;
    double fitted_log_likelihood = 0.0;
    bool fit_failed = false;
    std::string error;
};

struct LooResult {
    std::vector<LooFold> folds;
    double pooled_variance = 0.0;
    std::size_t pooled_location_count = 0;
    double median_rmse = 0.0;
    double median_q2 = 0.0;
    double median_q2_pooled = 0.0;
    double median_ca = 0.0;
    int fits_run = 0;
};

// Leave-one-scenario-out cross-validation. Folds either refit (default) or
// share one set of hyperparameters fitted on the full data. Fit failures are
// recorded per fold without aborting the sweep. Fold results merge in fold
// order whatever the worker count.
LooResult loo(const TensorTrainingSet& train, const LooConfig& config);

}  // namespace fgp::gp
