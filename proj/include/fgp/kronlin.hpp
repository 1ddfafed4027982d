#pragma once

#include <span>
#include <string>
#include <vector>

#include "fgp/linalg.hpp"

namespace fgp::kronlin {

using linalg::Matrix;

// Lower Cholesky factor with the diagonal jitter that was needed to reach it.
struct CholeskyFactor {
    Matrix lower;
    double jitter_applied = 0.0;

    std::size_t order() const { return lower.rows(); }
    double log_det_twice() const;  // 2 * sum(log(diag))
};

struct JitterPolicy {
    double initial_ratio = 1e-10;  // of mean diagonal
    double max_ratio = 1e-4;
    double growth = 10.0;
};

// Cholesky with escalating diagonal jitter. Jitter starts at
// initial_ratio * mean(diag) and grows by `growth` until max_ratio; a matrix
// still not positive definite raises a factorization error naming `label`.
CholeskyFactor cholesky(const Matrix& sym, const JitterPolicy& policy = {},
                        const std::string& label = "matrix");

// -----------------------------------------------------------------------
// Kronecker conventions.
//
// Training observations form an R x S matrix Y (row r = scenario r's map
// over the S shared locations). The vector APIs flatten Y scenario-major
// (all S locations of scenario 1 first), under which the covariance of the
// flattened vector is K_f (x) K_x entrywise: Cov(y[rS+s], y[r'S+s']) =
// K_f[r,r'] * K_x[s,s']. Every operation below works on the R x S shape and
// never forms an RS x RS array; the dense-oracle tests lock the convention.
// -----------------------------------------------------------------------

// (A (x) B) u for A: M x N, B: P x Q, u of length N*Q, computed as
// V = B U A^T with u/v column-indexed as Q x N and P x M matrices.
std::vector<double> kron_apply(const Matrix& a, const Matrix& b, std::span<const double> u);

// Whitened observations: solves (L_f (x) L_x) vec(A) = vec(Y) in matrix
// shape, i.e. A = L_f^{-1} Y L_x^{-T}. Working storage stays R x max(R,S).
Matrix kron_tri_solve(const Matrix& l_f, const Matrix& l_x, const Matrix& y);

// Vector form of the above; y and the result are scenario-major.
std::vector<double> kron_tri_solve_vec(const Matrix& l_f, const Matrix& l_x,
                                       std::span<const double> y);

// Quadratic form y^T (K_f (x) K_x)^{-1} y = ||A||_F^2.
double kron_quadratic(const Matrix& l_f, const Matrix& l_x, const Matrix& y);

// log det(K_f (x) K_x) = S log det(K_f) + R log det(K_x).
double kron_logdet(const CholeskyFactor& l_f, const CholeskyFactor& l_x);

// Posterior mean at one query: mu = b_f^T A b_x with b_f = L_f^{-1} k_f*,
// b_x = L_x^{-1} k_x* and A the solve matrix from kron_tri_solve.
double kron_posterior_mean(const Matrix& l_f, const Matrix& l_x, const Matrix& solve_matrix,
                           std::span<const double> k_f_star, std::span<const double> k_x_star);

// Posterior covariance between two queries:
// c = k - (b_f^T b'_f)(b_x^T b'_x).
double kron_posterior_cov(const Matrix& l_f, const Matrix& l_x, double prior_cov,
                          std::span<const double> k_f_star_a, std::span<const double> k_x_star_a,
                          std::span<const double> k_f_star_b, std::span<const double> k_x_star_b);

// Posterior variance of a single query; tiny negative values (within
// 1e-10 * prior) are clamped to zero, anything more negative is an error.
double kron_posterior_var(const Matrix& l_f, const Matrix& l_x, double prior_var,
                          std::span<const double> k_f_star, std::span<const double> k_x_star);

}  // namespace fgp::kronlin
