#pragma once

#include <cstdint>
#include <vector>

#include "fgp/funspace.hpp"
#include "fgp/linalg.hpp"

namespace fgp::design {

using funspace::ScenarioInputs;
using linalg::Matrix;

// Per-location fraction of scenarios whose map value exceeds the threshold.
// `values` is R x G (scenarios by grid locations).
std::vector<double> compute_efp(const Matrix& values, double wet_threshold = 0.0);

struct KMeansResult {
    Matrix centroids;              // k x d
    std::vector<std::size_t> assignments;
    double inertia = 0.0;
    int iterations = 0;
};

// Lloyd iterations with probabilistic distance-squared seeding. Iteration cap
// 300, convergence at 1e-9 relative inertia change. Deterministic per seed.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed);

struct DoeResult {
    std::vector<std::size_t> selected;     // grid indices, de-duplicated
    std::vector<int> class_labels;         // 1, 2, or 0 for mandatory extras
    std::vector<std::size_t> mandatory;    // indices that were forced in
};

// EFP-stratified spatial design: class 1 holds locations with
// efp >= efp_split, class 2 holds efp in (0, efp_split). Each class is
// clustered on (x1, x2, EFP) with coordinates min-max normalized to [0,1];
// the class point nearest each cluster centroid is selected. Mandatory
// locations are always included.
DoeResult select_doe(const Matrix& locations, const std::vector<double>& efp,
                     std::size_t kappa1, std::size_t kappa2, double efp_split,
                     const std::vector<std::size_t>& mandatory, std::uint64_t seed);

// Maximin Latin hypercube design on [0,1]^dims: the best of `restarts`
// random stratified designs by minimum pairwise distance. When
// `candidates_out` is given (test hook), every examined design is retained.
Matrix maximin_lhd(std::size_t n, std::size_t dims, std::size_t restarts, std::uint64_t seed,
                   std::vector<Matrix>* candidates_out = nullptr);

// (max, mean) of every channel of one scenario: 2Q raw features.
std::vector<double> scalar_summaries(const std::vector<std::vector<double>>& scenario_curves);

// R x 2Q feature matrix over all scenarios, each column standardized to
// zero mean and unit variance (columns with no spread stay zero).
Matrix standardized_features(const ScenarioInputs& inputs);

// Cluster the non-excluded feature rows into k groups and return the
// scenario nearest each centroid. Previously selected indices can be passed
// as `exclude` to enrich an existing selection.
std::vector<std::size_t> select_scenarios(const Matrix& features, std::size_t k,
                                          std::uint64_t seed,
                                          const std::vector<std::size_t>& exclude = {});

}  // namespace fgp::design
