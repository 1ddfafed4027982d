#pragma once

#include <atomic>
#include <cstddef>
#include <cstring>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "fgp/common.hpp"

namespace fgp::linalg {

// Byte accounting for dense matrix storage. Every Matrix allocation is
// registered here, which lets tests pin the promise that Kronecker-path
// operations never materialize an RS x RS array.
struct AllocStats {
    static std::atomic<std::size_t> current_bytes;
    static std::atomic<std::size_t> peak_bytes;
    static std::atomic<std::size_t> peak_single_alloc;

    static void reset();
    static void on_alloc(std::size_t bytes);
    static void on_free(std::size_t bytes);
};

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, double fill);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    Matrix(const Matrix& other);
    Matrix& operator=(const Matrix& other);
    Matrix(Matrix&& other) noexcept;
    Matrix& operator=(Matrix&& other) noexcept;
    ~Matrix();

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return rows_ * cols_; }
    bool empty() const { return size() == 0; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_; }
    const double* data() const { return data_; }
    std::span<double> row(std::size_t i) { return {data_ + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_ + i * cols_, cols_}; }

    static Matrix identity(std::size_t n);
    Matrix transposed() const;

private:
    void allocate(std::size_t rows, std::size_t cols);
    void release();

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    double* data_ = nullptr;
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T  (rows of A dotted with rows of B; contiguous access)
Matrix matmul_abt(const Matrix& a, const Matrix& b);
// y = A * x
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

// In-place lower Cholesky of a symmetric matrix. Returns false if a
// nonpositive pivot is met; the matrix content is then unspecified.
bool cholesky_lower_in_place(Matrix& a);

// Solve L X = B for lower-triangular L; B is n x m, overwritten answer returned.
Matrix forward_solve(const Matrix& lower, const Matrix& b);
// Solve L^T X = B for lower-triangular L.
Matrix backward_solve_transposed(const Matrix& lower, const Matrix& b);
std::vector<double> forward_solve_vec(const Matrix& lower, std::span<const double> b);
std::vector<double> backward_solve_transposed_vec(const Matrix& lower, std::span<const double> b);

struct EighResult {
    std::vector<double> values;  // nonincreasing
    Matrix vectors;              // columns are eigenvectors, matching values
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenpairs are
// sorted by nonincreasing eigenvalue; ties keep the solver's rotation order,
// giving a reproducible basis.
EighResult jacobi_eigh(const Matrix& sym, int max_sweeps = 64);

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace fgp::linalg
