#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "fgp/funspace.hpp"
#include "fgp/linalg.hpp"

namespace fgp::kernels {

using funspace::ProjectedInputs;
using linalg::Matrix;

enum class KernelKind { SquaredExponential, Matern52, Matern32, Exponential };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

struct Point2 {
    double x1 = 0.0;
    double x2 = 0.0;
};

// Correlation kernel over functional inputs (variance pinned at 1).
struct FunctionalKernelSpec {
    KernelKind kind = KernelKind::Matern52;
    std::vector<double> lengthscales;  // one per channel
};

// Anisotropic spatial kernel over R^2.
struct SpatialKernelSpec {
    KernelKind kind = KernelKind::Matern52;
    double lengthscale_x1 = 1.0;
    double lengthscale_x2 = 1.0;
    double variance = 1.0;
};

// Stationary kernel value at a normalized distance. Equals `variance` at
// distance zero and decreases strictly with distance.
double stationary_value(KernelKind kind, double normed_distance, double variance);

// k_f between two projected scenarios; value in (0, 1].
double functional_corr(const FunctionalKernelSpec& spec,
                       const std::vector<std::vector<double>>& a,
                       const std::vector<std::vector<double>>& b);

double spatial_cov(const SpatialKernelSpec& spec, const Point2& x, const Point2& y);

// R x R correlation matrix over scenarios.
Matrix gram_functional(const FunctionalKernelSpec& spec, const ProjectedInputs& projected);

// S x S covariance matrix over rows of a S x 2 location matrix.
Matrix gram_spatial(const SpatialKernelSpec& spec, const Matrix& locations);

// Separable kernel: functional correlation attenuated by spatial covariance.
double separable_cov(const FunctionalKernelSpec& fspec, const SpatialKernelSpec& sspec,
                     const std::vector<std::vector<double>>& fa, const Point2& xa,
                     const std::vector<std::vector<double>>& fb, const Point2& xb);

// Read-only intrinsic-coregionalization view of a functional Gram matrix:
// b_{i,j} = K_f[i,j], so k_{i,j}(x, x') = b_{i,j} k_x(x, x').
class CoregionalizationView {
public:
    explicit CoregionalizationView(const Matrix& k_f);
    double operator()(std::size_t i, std::size_t j) const { return (*k_f_)(i, j); }
    std::size_t output_count() const { return k_f_->rows(); }

private:
    const Matrix* k_f_;
};

}  // namespace fgp::kernels
