#include "fgp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fgp::linalg {

std::atomic<std::size_t> AllocStats::current_bytes{0};
std::atomic<std::size_t> AllocStats::peak_bytes{0};
std::atomic<std::size_t> AllocStats::peak_single_alloc{0};

void AllocStats::reset() {
    current_bytes = 0;
    peak_bytes = 0;
    peak_single_alloc = 0;
}

void AllocStats::on_alloc(std::size_t bytes) {
    const std::size_t cur = current_bytes.fetch_add(bytes) + bytes;
    std::size_t peak = peak_bytes.load();
    while (cur > peak && !peak_bytes.compare_exchange_weak(peak, cur)) {
    }
    std::size_t single = peak_single_alloc.load();
    while (bytes > single && !peak_single_alloc.compare_exchange_weak(single, bytes)) {
    }
}

void AllocStats::on_free(std::size_t bytes) { current_bytes.fetch_sub(bytes); }

void Matrix::allocate(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    const std::size_t n = rows * cols;
    if (n == 0) {
        data_ = nullptr;
        return;
    }
    data_ = new double[n];
    AllocStats::on_alloc(n * sizeof(double));
}

void Matrix::release() {
    if (data_ != nullptr) {
        AllocStats::on_free(rows_ * cols_ * sizeof(double));
        delete[] data_;
        data_ = nullptr;
    }
    rows_ = cols_ = 0;
}

Matrix::Matrix(std::size_t rows, std::size_t cols) {
    allocate(rows, cols);
    std::fill_n(data_, rows * cols, 0.0);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) {
    allocate(rows, cols);
    std::fill_n(data_, rows * cols, fill);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r > 0 ? rows.begin()->size() : 0;
    allocate(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw shape_error("Matrix initializer rows have unequal lengths");
        std::copy(row.begin(), row.end(), data_ + i * c);
        ++i;
    }
}

Matrix::Matrix(const Matrix& other) {
    allocate(other.rows_, other.cols_);
    if (data_ != nullptr) std::memcpy(data_, other.data_, size() * sizeof(double));
}

Matrix& Matrix::operator=(const Matrix& other) {
    if (this == &other) return *this;
    release();
    allocate(other.rows_, other.cols_);
    if (data_ != nullptr) std::memcpy(data_, other.data_, size() * sizeof(double));
    return *this;
}

Matrix::Matrix(Matrix&& other) noexcept
    : rows_(other.rows_), cols_(other.cols_), data_(other.data_) {
    other.rows_ = other.cols_ = 0;
    other.data_ = nullptr;
}

Matrix& Matrix::operator=(Matrix&& other) noexcept {
    if (this == &other) return *this;
    release();
    rows_ = other.rows_;
    cols_ = other.cols_;
    data_ = other.data_;
    other.rows_ = other.cols_ = 0;
    other.data_ = nullptr;
    return *this;
}

Matrix::~Matrix() { release(); }

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw shape_error("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.data() + i * c.cols();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* bk = b.data() + k * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix matmul_abt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw shape_error("matmul_abt: column counts differ");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
    return c;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw shape_error("matvec: dimension mismatch");
    std::vector<double> y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

bool cholesky_lower_in_place(Matrix& a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw shape_error("cholesky: matrix not square");
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j) - dot(a.row(j).subspan(0, j), a.row(j).subspan(0, j));
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        a(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            const double s = a(i, j) - dot(a.row(i).subspan(0, j), a.row(j).subspan(0, j));
            a(i, j) = s / ljj;
        }
    }
    // zero strict upper triangle so the factor is usable as a plain matrix
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = 0.0;
    return true;
}

Matrix forward_solve(const Matrix& lower, const Matrix& b) {
    const std::size_t n = lower.rows();
    if (lower.cols() != n || b.rows() != n) throw shape_error("forward_solve: dimension mismatch");
    Matrix x = b;
    const std::size_t m = x.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* xi = x.data() + i * m;
        for (std::size_t k = 0; k < i; ++k) {
            const double lik = lower(i, k);
            if (lik == 0.0) continue;
            const double* xk = x.data() + k * m;
            for (std::size_t j = 0; j < m; ++j) xi[j] -= lik * xk[j];
        }
        const double d = lower(i, i);
        for (std::size_t j = 0; j < m; ++j) xi[j] /= d;
    }
    return x;
}

Matrix backward_solve_transposed(const Matrix& lower, const Matrix& b) {
    const std::size_t n = lower.rows();
    if (lower.cols() != n || b.rows() != n)
        throw shape_error("backward_solve_transposed: dimension mismatch");
    Matrix x = b;
    const std::size_t m = x.cols();
    for (std::size_t ii = n; ii-- > 0;) {
        double* xi = x.data() + ii * m;
        for (std::size_t k = ii + 1; k < n; ++k) {
            const double lki = lower(k, ii);
            if (lki == 0.0) continue;
            const double* xk = x.data() + k * m;
            for (std::size_t j = 0; j < m; ++j) xi[j] -= lki * xk[j];
        }
        const double d = lower(ii, ii);
        for (std::size_t j = 0; j < m; ++j) xi[j] /= d;
    }
    return x;
}

std::vector<double> forward_solve_vec(const Matrix& lower, std::span<const double> b) {
    const std::size_t n = lower.rows();
    if (b.size() != n) throw shape_error("forward_solve_vec: dimension mismatch");
    std::vector<double> x(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        const double s = dot(lower.row(i).subspan(0, i), {x.data(), i});
        x[i] = (x[i] - s) / lower(i, i);
    }
    return x;
}

std::vector<double> backward_solve_transposed_vec(const Matrix& lower, std::span<const double> b) {
    const std::size_t n = lower.rows();
    if (b.size() != n) throw shape_error("backward_solve_transposed_vec: dimension mismatch");
    std::vector<double> x(b.begin(), b.end());
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * x[k];
        x[ii] = s / lower(ii, ii);
    }
    return x;
}

namespace {

double offdiag_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
}

}  // namespace

EighResult jacobi_eigh(const Matrix& sym, int max_sweeps) {
    const std::size_t n = sym.rows();
    if (sym.cols() != n) throw shape_error("jacobi_eigh: matrix not square");
    Matrix a = sym;
    Matrix v = Matrix::identity(n);

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
    const double tol = 1e-14 * std::max(scale, 1.0) * static_cast<double>(n);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (offdiag_norm(a) <= tol) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0)
                                     ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                                     : 1.0 / (theta - std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

    EighResult out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = diag[order[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

}  // namespace fgp::linalg
