#include "fgp/kronlin.hpp"

#include <cmath>

namespace fgp::kronlin {

double CholeskyFactor::log_det_twice() const {
    double s = 0.0;
    for (std::size_t i = 0; i < lower.rows(); ++i) {
        const double d = lower(i, i);
        if (!(d > 0.0)) throw factorization_error("Cholesky factor has nonpositive diagonal");
        s += std::log(d);
    }
    return 2.0 * s;
}

CholeskyFactor cholesky(const Matrix& sym, const JitterPolicy& policy, const std::string& label) {
    const std::size_t n = sym.rows();
    if (sym.cols() != n) throw shape_error("cholesky: '" + label + "' is not square");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double scale = std::max({std::abs(sym(i, j)), std::abs(sym(j, i)), 1.0});
            if (std::abs(sym(i, j) - sym(j, i)) > 1e-12 * scale)
                throw data_error("cholesky: '" + label + "' is not symmetric");
        }

    double mean_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_diag += sym(i, i);
    mean_diag /= static_cast<double>(n > 0 ? n : 1);

    double jitter = 0.0;
    double ratio = policy.initial_ratio;
    while (true) {
        Matrix work = sym;
        if (jitter > 0.0)
            for (std::size_t i = 0; i < n; ++i) work(i, i) += jitter;
        if (linalg::cholesky_lower_in_place(work))
            return CholeskyFactor{std::move(work), jitter};
        if (jitter > 0.0 && ratio > policy.max_ratio)
            throw factorization_error("cholesky: '" + label +
                                      "' not positive definite after jitter escalation");
        jitter = ratio * std::abs(mean_diag);
        if (jitter == 0.0) jitter = ratio;  // zero-diagonal corner
        ratio *= policy.growth;
    }
}

std::vector<double> kron_apply(const Matrix& a, const Matrix& b, std::span<const double> u) {
    const std::size_t m = a.rows(), n = a.cols();
    const std::size_t p = b.rows(), q = b.cols();
    if (u.size() != n * q) throw shape_error("kron_apply: vector length must be N*Q");

    // u column-indexed as U (Q x N): U[j, i] = u[i*Q + j]
    Matrix u_mat(q, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) u_mat(j, i) = u[i * q + j];

    Matrix bu = linalg::matmul(b, u_mat);        // P x N
    Matrix v_mat = linalg::matmul_abt(bu, a);    // P x M = (B U) A^T

    std::vector<double> v(m * p);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) v[i * p + j] = v_mat(j, i);
    return v;
}

Matrix kron_tri_solve(const Matrix& l_f, const Matrix& l_x, const Matrix& y) {
    const std::size_t r = l_f.rows();
    const std::size_t s = l_x.rows();
    if (y.rows() != r || y.cols() != s)
        throw shape_error("kron_tri_solve: observation matrix must be R x S");
    for (std::size_t i = 0; i < r; ++i)
        if (!(l_f(i, i) > 0.0)) throw factorization_error("kron_tri_solve: singular L_f");
    for (std::size_t i = 0; i < s; ++i)
        if (!(l_x(i, i) > 0.0)) throw factorization_error("kron_tri_solve: singular L_x");

    Matrix b = linalg::forward_solve(l_f, y);                 // R x S, L_f B = Y
    Matrix a_t = linalg::forward_solve(l_x, b.transposed());  // S x R, L_x A^T = B^T
    return a_t.transposed();                                  // R x S
}

std::vector<double> kron_tri_solve_vec(const Matrix& l_f, const Matrix& l_x,
                                       std::span<const double> y) {
    const std::size_t r = l_f.rows();
    const std::size_t s = l_x.rows();
    if (y.size() != r * s) throw shape_error("kron_tri_solve_vec: vector length must be R*S");
    Matrix y_mat(r, s);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < s; ++j) y_mat(i, j) = y[i * s + j];
    Matrix a = kron_tri_solve(l_f, l_x, y_mat);
    std::vector<double> out(r * s);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < s; ++j) out[i * s + j] = a(i, j);
    return out;
}

double kron_quadratic(const Matrix& l_f, const Matrix& l_x, const Matrix& y) {
    Matrix a = kron_tri_solve(l_f, l_x, y);
    double z = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) z += a.data()[i] * a.data()[i];
    return z;
}

double kron_logdet(const CholeskyFactor& l_f, const CholeskyFactor& l_x) {
    const double r = static_cast<double>(l_f.order());
    const double s = static_cast<double>(l_x.order());
    return s * l_f.log_det_twice() + r * l_x.log_det_twice();
}

double kron_posterior_mean(const Matrix& l_f, const Matrix& l_x, const Matrix& solve_matrix,
                           std::span<const double> k_f_star, std::span<const double> k_x_star) {
    if (k_f_star.size() != l_f.rows() || k_x_star.size() != l_x.rows())
        throw shape_error("kron_posterior_mean: cross-covariance length mismatch");
    const std::vector<double> b_f = linalg::forward_solve_vec(l_f, k_f_star);
    const std::vector<double> b_x = linalg::forward_solve_vec(l_x, k_x_star);
    // mu = b_f^T A b_x
    double mu = 0.0;
    for (std::size_t i = 0; i < b_f.size(); ++i) {
        if (b_f[i] == 0.0) continue;
        mu += b_f[i] * linalg::dot(solve_matrix.row(i), b_x);
    }
    return mu;
}

double kron_posterior_cov(const Matrix& l_f, const Matrix& l_x, double prior_cov,
                          std::span<const double> k_f_star_a, std::span<const double> k_x_star_a,
                          std::span<const double> k_f_star_b, std::span<const double> k_x_star_b) {
    const std::vector<double> bfa = linalg::forward_solve_vec(l_f, k_f_star_a);
    const std::vector<double> bfb = linalg::forward_solve_vec(l_f, k_f_star_b);
    const std::vector<double> bxa = linalg::forward_solve_vec(l_x, k_x_star_a);
    const std::vector<double> bxb = linalg::forward_solve_vec(l_x, k_x_star_b);
    return prior_cov - linalg::dot(bfa, bfb) * linalg::dot(bxa, bxb);
}

double kron_posterior_var(const Matrix& l_f, const Matrix& l_x, double prior_var,
                          std::span<const double> k_f_star, std::span<const double> k_x_star) {
    const double c = kron_posterior_cov(l_f, l_x, prior_var, k_f_star, k_x_star, k_f_star,
                                        k_x_star);
    if (c >= 0.0) return c;
    if (c >= -1e-10 * std::abs(prior_var)) return 0.0;
    throw numeric_error("kron_posterior_var: variance negative beyond clamp band");
}

}  // namespace fgp::kronlin
