#include "fgp/kernels.hpp"

#include <cmath>

namespace fgp::kernels {

namespace {

// Floating-point noise in coefficient subtraction can leave a spurious
// positive distance between identical inputs; snap it to zero.
constexpr double kDistanceFloor = 1e-15;

double guarded(double d) { return d < kDistanceFloor ? 0.0 : d; }

}  // namespace

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::SquaredExponential: return "squared_exponential";
        case KernelKind::Matern52: return "matern52";
        case KernelKind::Matern32: return "matern32";
        case KernelKind::Exponential: return "exponential";
    }
    throw parameter_error("unknown kernel kind");
}

KernelKind kernel_kind_from_string(const std::string& name) {
    if (name == "squared_exponential" || name == "se") return KernelKind::SquaredExponential;
    if (name == "matern52") return KernelKind::Matern52;
    if (name == "matern32") return KernelKind::Matern32;
    if (name == "exponential") return KernelKind::Exponential;
    throw parameter_error("unknown kernel kind '" + name + "'");
}

double stationary_value(KernelKind kind, double normed_distance, double variance) {
    if (!(normed_distance >= 0.0))
        throw parameter_error("stationary_value: distance must be nonnegative");
    if (!(variance > 0.0)) throw parameter_error("stationary_value: variance must be positive");
    const double r = guarded(normed_distance);
    switch (kind) {
        case KernelKind::SquaredExponential:
            return variance * std::exp(-0.5 * r * r);
        case KernelKind::Matern52: {
            const double s = std::sqrt(5.0) * r;
            return variance * (1.0 + s + (5.0 / 3.0) * r * r) * std::exp(-s);
        }
        case KernelKind::Matern32: {
            const double s = std::sqrt(3.0) * r;
            return variance * (1.0 + s) * std::exp(-s);
        }
        case KernelKind::Exponential:
            return variance * std::exp(-r);
    }
    throw parameter_error("unknown kernel kind");
}

double functional_corr(const FunctionalKernelSpec& spec,
                       const std::vector<std::vector<double>>& a,
                       const std::vector<std::vector<double>>& b) {
    const double d2 = funspace::functional_distance_sq(a, b, spec.lengthscales);
    return stationary_value(spec.kind, std::sqrt(d2), 1.0);
}

double spatial_cov(const SpatialKernelSpec& spec, const Point2& x, const Point2& y) {
    if (!(spec.lengthscale_x1 > 0.0) || !(spec.lengthscale_x2 > 0.0))
        throw parameter_error("spatial_cov: length-scales must be positive");
    if (!std::isfinite(x.x1) || !std::isfinite(x.x2) || !std::isfinite(y.x1) ||
        !std::isfinite(y.x2))
        throw data_error("spatial_cov: non-finite coordinates");
    const double d1 = (x.x1 - y.x1) / spec.lengthscale_x1;
    const double d2 = (x.x2 - y.x2) / spec.lengthscale_x2;
    return stationary_value(spec.kind, std::sqrt(d1 * d1 + d2 * d2), spec.variance);
}

Matrix gram_functional(const FunctionalKernelSpec& spec, const ProjectedInputs& projected) {
    const std::size_t r = projected.scenario_count();
    if (r == 0) throw data_error("gram_functional: empty projection");
    std::vector<std::vector<std::vector<double>>> coeffs(r);
    for (std::size_t i = 0; i < r; ++i) coeffs[i] = projected.scenario_coefficients(i);
    Matrix k(r, r);
    for (std::size_t i = 0; i < r; ++i) {
        k(i, i) = 1.0;
        for (std::size_t j = i + 1; j < r; ++j) {
            const double v = functional_corr(spec, coeffs[i], coeffs[j]);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Matrix gram_spatial(const SpatialKernelSpec& spec, const Matrix& locations) {
    const std::size_t s = locations.rows();
    if (s == 0 || locations.cols() != 2) throw shape_error("gram_spatial: locations must be S x 2");
    Matrix k(s, s);
    for (std::size_t i = 0; i < s; ++i) {
        k(i, i) = spec.variance;
        const Point2 xi{locations(i, 0), locations(i, 1)};
        for (std::size_t j = i + 1; j < s; ++j) {
            const Point2 xj{locations(j, 0), locations(j, 1)};
            const double v = spatial_cov(spec, xi, xj);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

double separable_cov(const FunctionalKernelSpec& fspec, const SpatialKernelSpec& sspec,
                     const std::vector<std::vector<double>>& fa, const Point2& xa,
                     const std::vector<std::vector<double>>& fb, const Point2& xb) {
    return functional_corr(fspec, fa, fb) * spatial_cov(sspec, xa, xb);
}

CoregionalizationView::CoregionalizationView(const Matrix& k_f) : k_f_(&k_f) {
    const std::size_t r = k_f.rows();
    if (k_f.cols() != r) throw shape_error("coregionalization view: matrix not square");
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = i + 1; j < r; ++j) {
            const double diff = std::abs(k_f(i, j) - k_f(j, i));
            const double scale = std::max({std::abs(k_f(i, j)), std::abs(k_f(j, i)), 1.0});
            if (diff > 1e-12 * scale)
                throw data_error("coregionalization view: matrix is not symmetric");
        }
    }
}

}  // namespace fgp::kernels
