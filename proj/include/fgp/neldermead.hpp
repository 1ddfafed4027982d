#pragma once

#include <functional>
#include <vector>

namespace fgp::optim {

struct NelderMeadOptions {
    int max_evaluations = 400;
    double x_tolerance = 1e-7;   // simplex spread
    double f_tolerance = 1e-9;   // value spread
    double initial_step = 0.5;   // per-coordinate simplex offset
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

// Derivative-free simplex minimizer with the dimension-adaptive expansion
// and contraction coefficients. Objectives may return +inf for infeasible
// points. Fully deterministic.
NelderMeadResult nelder_mead_minimize(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x0, const NelderMeadOptions& opts = {});

}  // namespace fgp::optim
