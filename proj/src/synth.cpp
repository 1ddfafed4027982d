#include "fgp/synth.hpp"

#include <cmath>
#include <string>

#include "fgp/kronlin.hpp"
#include "fgp/prng.hpp"

namespace fgp::synth {

void SynthConfig::fill_defaults() {
    if (sigma2_mean.empty()) sigma2_mean.assign(channels, 0.5);
    if (ell_mean.empty()) {
        ell_mean.resize(channels);
        for (std::size_t i = 0; i < channels; ++i)
            ell_mean[i] = static_cast<double>(i + 1) / 10.0;
    }
    if (map_functional_lengthscales.empty()) map_functional_lengthscales.assign(channels, 2.0);
    if (sigma2_mean.size() != channels || ell_mean.size() != channels ||
        map_functional_lengthscales.size() != channels)
        throw parameter_error("synth config: per-channel parameter count mismatch");
    for (double v : sigma2_mean)
        if (!(v > 0.0)) throw parameter_error("synth config: sigma2_mean must be positive");
    for (double v : ell_mean)
        if (!(v > 0.0)) throw parameter_error("synth config: ell_mean must be positive");
    if (!(sigma2_obs > 0.0) || !(ell_obs > 0.0))
        throw parameter_error("synth config: observation-level parameters must be positive");
    if (time_points < 2) throw parameter_error("synth config: need at least 2 time points");
    if (scenarios == 0) throw parameter_error("synth config: need at least 1 scenario");
}

std::vector<double> SynthConfig::time_grid() const {
    std::vector<double> grid(time_points);
    for (std::size_t t = 0; t < time_points; ++t)
        grid[t] = static_cast<double>(t) / static_cast<double>(time_points - 1);
    return grid;
}

double SynthConfig::time_step() const { return 1.0 / static_cast<double>(time_points - 1); }

std::vector<double> sample_gp_curve(KernelKind kind, double variance, double lengthscale,
                                    const std::vector<double>& grid,
                                    const std::vector<double>& mean_curve, std::uint64_t seed) {
    if (!(variance > 0.0) || !(lengthscale > 0.0))
        throw parameter_error("sample_gp_curve: variance and length-scale must be positive");
    const std::size_t tau = grid.size();
    if (mean_curve.size() != tau) throw shape_error("sample_gp_curve: mean length mismatch");

    Matrix gram(tau, tau);
    for (std::size_t i = 0; i < tau; ++i) {
        gram(i, i) = variance;
        for (std::size_t j = i + 1; j < tau; ++j) {
            const double v = kernels::stationary_value(
                kind, std::abs(grid[i] - grid[j]) / lengthscale, variance);
            gram(i, j) = v;
            gram(j, i) = v;
        }
    }
    const kronlin::CholeskyFactor l = kronlin::cholesky(gram, {}, "curve gram");

    rng::SplitMix64 stream(rng::SplitMix64::mix(seed ^ 0x637572766573ULL));
    std::vector<double> xi(tau);
    for (double& v : xi) v = stream.normal();

    std::vector<double> curve = mean_curve;
    for (std::size_t i = 0; i < tau; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j <= i; ++j) s += l.lower(i, j) * xi[j];
        curve[i] += s;
    }
    return curve;
}

ScenarioInputs gen_inputs(const SynthConfig& config) {
    SynthConfig cfg = config;
    cfg.fill_defaults();
    const std::vector<double> grid = cfg.time_grid();
    const std::vector<double> zero(grid.size(), 0.0);
    rng::SplitMix64 root(rng::SplitMix64::mix(cfg.seed ^ 0x696e70757473ULL));

    ScenarioInputs out;
    out.channels.resize(cfg.channels);
    for (std::size_t c = 0; c < cfg.channels; ++c) {
        ScenarioInputs::Channel& ch = out.channels[c];
        ch.id = "ch" + std::to_string(c);
        ch.grid = grid;
        ch.values = Matrix(cfg.scenarios, grid.size());

        rng::SplitMix64 channel_stream = root.split(c);
        if (cfg.centered) {
            // centered variant: mu_i == 0, replicates drawn with the
            // observation-level kernel around the zero mean
            for (std::size_t r = 0; r < cfg.scenarios; ++r) {
                const std::vector<double> f =
                    sample_gp_curve(cfg.input_kind, cfg.sigma2_obs, cfg.ell_obs, grid, zero,
                                    channel_stream.split(1000 + r).next_u64());
                std::copy(f.begin(), f.end(), ch.values.row(r).begin());
            }
        } else {
            const std::vector<double> mean =
                sample_gp_curve(cfg.input_kind, cfg.sigma2_mean[c], cfg.ell_mean[c], grid, zero,
                                channel_stream.split(0).next_u64());
            for (std::size_t r = 0; r < cfg.scenarios; ++r) {
                const std::vector<double> f =
                    sample_gp_curve(cfg.input_kind, cfg.sigma2_obs, cfg.ell_obs, grid, mean,
                                    channel_stream.split(1000 + r).next_u64());
                std::copy(f.begin(), f.end(), ch.values.row(r).begin());
            }
        }
    }
    return out;
}

Matrix gen_maps(const ScenarioInputs& inputs, const Matrix& locations,
                const SynthConfig& config, std::uint64_t seed) {
    SynthConfig cfg = config;
    cfg.fill_defaults();
    inputs.validate();
    const std::size_t r = inputs.scenario_count();
    const std::size_t s = locations.rows();
    if (locations.cols() != 2) throw shape_error("gen_maps: locations must be S x 2");

    const funspace::ProjectedInputs projected =
        funspace::project_scenarios(inputs, cfg.inertia_target);
    kernels::FunctionalKernelSpec fspec;
    fspec.kind = cfg.map_functional_kind;
    fspec.lengthscales.resize(cfg.channels);
    const double dt = inputs.channels.front().grid[1] - inputs.channels.front().grid[0];
    for (std::size_t c = 0; c < cfg.channels; ++c)
        fspec.lengthscales[c] =
            funspace::lengthscale_for_grid(cfg.map_functional_lengthscales[c], dt);

    const Matrix k_f = kernels::gram_functional(fspec, projected);
    const Matrix k_x = kernels::gram_spatial(cfg.map_spatial, locations);
    const kronlin::CholeskyFactor l_f = kronlin::cholesky(k_f, {}, "K_f");
    const kronlin::CholeskyFactor l_x = kronlin::cholesky(k_x, {}, "K_x");

    rng::SplitMix64 stream(rng::SplitMix64::mix(seed ^ 0x6d617073ULL));
    std::vector<double> xi(r * s);
    for (double& v : xi) v = stream.normal();

    // stack = L_f Xi L_x^T via the Kronecker factor, never forming RS x RS
    const std::vector<double> flat = kronlin::kron_apply(l_x.lower, l_f.lower, xi);
    Matrix maps(r, s);
    for (std::size_t j = 0; j < s; ++j)
        for (std::size_t i = 0; i < r; ++i) maps(i, j) = flat[j * r + i];
    return maps;
}

Matrix unit_grid(std::size_t nx, std::size_t ny) {
    if (nx < 1 || ny < 1) throw parameter_error("unit_grid: grid sides must be positive");
    Matrix grid(nx * ny, 2);
    std::size_t row = 0;
    for (std::size_t iy = 0; iy < ny; ++iy)
        for (std::size_t ix = 0; ix < nx; ++ix) {
            grid(row, 0) = nx == 1 ? 0.5 : static_cast<double>(ix) / static_cast<double>(nx - 1);
            grid(row, 1) = ny == 1 ? 0.5 : static_cast<double>(iy) / static_cast<double>(ny - 1);
            ++row;
        }
    return grid;
}

}  // namespace fgp::synth
