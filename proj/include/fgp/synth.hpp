#pragma once

#include <cstdint>
#include <vector>

#include "fgp/funspace.hpp"
#include "fgp/kernels.hpp"
#include "fgp/linalg.hpp"

namespace fgp::synth {

using funspace::ScenarioInputs;
using kernels::KernelKind;
using linalg::Matrix;

// Generator settings for the synthetic studies. Input curves live on a
// uniform time grid over [0,1]; per-channel mean draws use
// (sigma2_mean[i], ell_mean[i]) and replicate draws wiggle around the mean
// with (sigma2_obs, ell_obs). `centered` pins every channel mean to zero,
// with replicates still drawn from (sigma2_obs, ell_obs). Map stacks are
// joint draws under the separable kernel; map_functional_lengthscales are
// quoted on the integral scale of the time grid.
struct SynthConfig {
    std::size_t channels = 8;
    std::size_t scenarios = 20;
    std::size_t time_points = 37;

    KernelKind input_kind = KernelKind::Matern52;
    double sigma2_obs = 2.5e-3;
    double ell_obs = 0.8;
    std::vector<double> sigma2_mean;  // default 1/2 per channel
    std::vector<double> ell_mean;     // default (i+1)/10 per channel
    bool centered = false;

    kernels::SpatialKernelSpec map_spatial{KernelKind::Matern52, 0.2, 0.2, 1.0};
    KernelKind map_functional_kind = KernelKind::Matern52;
    std::vector<double> map_functional_lengthscales;  // default 2 per channel
    double inertia_target = 0.999;

    std::uint64_t seed = 0;

    void fill_defaults();
    std::vector<double> time_grid() const;
    double time_step() const;
};

// One GP draw on a 1D grid: mean + L xi with L the jittered Cholesky factor
// of the grid Gram matrix.
std::vector<double> sample_gp_curve(KernelKind kind, double variance, double lengthscale,
                                    const std::vector<double>& grid,
                                    const std::vector<double>& mean_curve, std::uint64_t seed);

// Hierarchically sampled functional inputs: R replicates of Q channels.
ScenarioInputs gen_inputs(const SynthConfig& config);

// Joint map stack (R x S) under the separable kernel: the Kronecker factor
// L_f (x) L_x applied to an RS standard normal vector. K_f comes from the
// PCA projection of `inputs` with the configured functional kernel.
Matrix gen_maps(const ScenarioInputs& inputs, const Matrix& locations,
                const SynthConfig& config, std::uint64_t seed);

// Equispaced nx x ny grid on [0,1]^2.
Matrix unit_grid(std::size_t nx, std::size_t ny);

}  // namespace fgp::synth
