#include <doctest.h>

#include <chrono>
#include <cmath>

#include "fgp/kronlin.hpp"
#include "fgp/prng.hpp"

using namespace fgp;
using linalg::Matrix;

namespace {

// dense oracle: K[r*S+s, r'*S+s'] = K_f(r,r') * K_x(s,s') (scenario-major)
Matrix dense_kron(const Matrix& k_f, const Matrix& k_x) {
    const std::size_t r = k_f.rows();
    const std::size_t s = k_x.rows();
    Matrix k(r * s, r * s);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t a = 0; a < s; ++a)
            for (std::size_t j = 0; j < r; ++j)
                for (std::size_t b = 0; b < s; ++b)
                    k(i * s + a, j * s + b) = k_f(i, j) * k_x(a, b);
    return k;
}

// generic dense Kronecker A (x) B for the kron_apply oracle
Matrix dense_kron_general(const Matrix& a, const Matrix& b) {
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t p = 0; p < b.rows(); ++p)
                for (std::size_t q = 0; q < b.cols(); ++q)
                    k(i * b.rows() + p, j * b.cols() + q) = a(i, j) * b(p, q);
    return k;
}

Matrix random_spd(std::size_t n, rng::SplitMix64& stream) {
    Matrix a(n, n);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = stream.normal();
    Matrix spd = linalg::matmul_abt(a, a);
    for (std::size_t i = 0; i < n; ++i) spd(i, i) += static_cast<double>(n) * 0.2 + 0.5;
    return spd;
}

Matrix random_matrix(std::size_t r, std::size_t c, rng::SplitMix64& stream) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = stream.normal();
    return m;
}

}  // namespace

TEST_CASE("cholesky wrapper: identity, hand 2x2, and rank-deficient jitter") {
    const kronlin::CholeskyFactor id = kronlin::cholesky(Matrix::identity(3));
    CHECK(id.jitter_applied == 0.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(id.lower(i, i) == 1.0);

    // [[4,2],[2,3]] -> [[2,0],[1,sqrt(2)]]
    const kronlin::CholeskyFactor f = kronlin::cholesky(Matrix{{4.0, 2.0}, {2.0, 3.0}});
    CHECK(f.lower(0, 0) == doctest::Approx(2.0));
    CHECK(f.lower(1, 0) == doctest::Approx(1.0));
    CHECK(f.lower(1, 1) == doctest::Approx(std::sqrt(2.0)));
    CHECK(f.lower(0, 1) == 0.0);

    // rank-1 matrix succeeds only with jitter
    const kronlin::CholeskyFactor r1 = kronlin::cholesky(Matrix{{1.0, 1.0}, {1.0, 1.0}});
    CHECK(r1.jitter_applied > 0.0);
    CHECK(r1.jitter_applied <= 1e-4);

    // hopeless matrix: factorization error naming the label
    CHECK_THROWS_AS(kronlin::cholesky(Matrix{{1.0, 3.0}, {3.0, 1.0}}, {}, "bad"),
                    factorization_error);
    CHECK_THROWS_AS(kronlin::cholesky(Matrix{{1.0, 0.5}, {0.2, 1.0}}), data_error);
}

TEST_CASE("kron_apply against the dense oracle") {
    rng::SplitMix64 stream(101);

    SUBCASE("identity factors leave the vector unchanged") {
        std::vector<double> u{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
        const std::vector<double> v = kronlin::kron_apply(Matrix::identity(2),
                                                          Matrix::identity(3), u);
        CHECK(v == u);
    }

    SUBCASE("random rectangular factors") {
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t m = 1 + stream.below(4), n = 1 + stream.below(4);
            const std::size_t p = 1 + stream.below(4), q = 1 + stream.below(4);
            const Matrix a = random_matrix(m, n, stream);
            const Matrix b = random_matrix(p, q, stream);
            std::vector<double> u(n * q);
            for (double& x : u) x = stream.normal();

            const std::vector<double> got = kronlin::kron_apply(a, b, u);
            const std::vector<double> want = linalg::matvec(dense_kron_general(a, b), u);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i)
                CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
        }
    }

    SUBCASE("scalar first factor scales B u") {
        const Matrix c{{2.5}};
        const Matrix b = random_matrix(3, 3, stream);
        std::vector<double> u{0.5, -1.0, 2.0};
        const std::vector<double> got = kronlin::kron_apply(c, b, u);
        const std::vector<double> bu = linalg::matvec(b, u);
        for (std::size_t i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(2.5 * bu[i]));
    }

    SUBCASE("product identity (A (x) B)(A' (x) B') u = (AA' (x) BB') u") {
        for (int trial = 0; trial < 5; ++trial) {
            const std::size_t n = 2 + stream.below(3), q = 2 + stream.below(3);
            const Matrix a = random_matrix(n, n, stream), a2 = random_matrix(n, n, stream);
            const Matrix b = random_matrix(q, q, stream), b2 = random_matrix(q, q, stream);
            std::vector<double> u(n * q);
            for (double& x : u) x = stream.normal();

            const std::vector<double> lhs =
                kronlin::kron_apply(a, b, kronlin::kron_apply(a2, b2, u));
            const std::vector<double> rhs =
                kronlin::kron_apply(linalg::matmul(a, a2), linalg::matmul(b, b2), u);
            for (std::size_t i = 0; i < lhs.size(); ++i)
                CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("kron_tri_solve against the dense 6x6 factor") {
    rng::SplitMix64 stream(202);
    const std::size_t r = 2, s = 3;
    const kronlin::CholeskyFactor l_f = kronlin::cholesky(random_spd(r, stream));
    const kronlin::CholeskyFactor l_x = kronlin::cholesky(random_spd(s, stream));

    Matrix y(r, s);
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = stream.normal();
    std::vector<double> y_vec(r * s);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < s; ++j) y_vec[i * s + j] = y(i, j);

    const std::vector<double> a = kronlin::kron_tri_solve_vec(l_f.lower, l_x.lower, y_vec);

    const Matrix l_dense = dense_kron(l_f.lower, l_x.lower);  // lower triangular
    const std::vector<double> a_dense = linalg::forward_solve_vec(l_dense, y_vec);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(a_dense[i]).epsilon(1e-11));

    // identity factors: a = y; zero vector stays zero
    const std::vector<double> same =
        kronlin::kron_tri_solve_vec(Matrix::identity(r), Matrix::identity(s), y_vec);
    for (std::size_t i = 0; i < same.size(); ++i) CHECK(same[i] == doctest::Approx(y_vec[i]));
    const std::vector<double> zeros(r * s, 0.0);
    for (double v : kronlin::kron_tri_solve_vec(l_f.lower, l_x.lower, zeros)) CHECK(v == 0.0);
}

TEST_CASE("quadratic form, log-determinant, posterior mean/cov dense equivalence") {
    rng::SplitMix64 stream(303);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t r = 1 + stream.below(6);
        const std::size_t s = 1 + stream.below(8);
        const Matrix k_f = random_spd(r, stream);
        const Matrix k_x = random_spd(s, stream);
        const kronlin::CholeskyFactor l_f = kronlin::cholesky(k_f);
        const kronlin::CholeskyFactor l_x = kronlin::cholesky(k_x);
        REQUIRE(l_f.jitter_applied == 0.0);
        REQUIRE(l_x.jitter_applied == 0.0);

        Matrix y(r, s);
        for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = stream.normal();
        std::vector<double> y_vec(r * s);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < s; ++j) y_vec[i * s + j] = y(i, j);

        const Matrix k_dense = dense_kron(k_f, k_x);
        Matrix l_dense = k_dense;
        REQUIRE(linalg::cholesky_lower_in_place(l_dense));

        // quadratic form
        const double z = kronlin::kron_quadratic(l_f.lower, l_x.lower, y);
        const std::vector<double> a_dense = linalg::forward_solve_vec(l_dense, y_vec);
        const double z_dense = linalg::dot(a_dense, a_dense);
        CHECK(z == doctest::Approx(z_dense).epsilon(1e-10));

        // log-determinant
        double logdet_dense = 0.0;
        for (std::size_t i = 0; i < r * s; ++i) logdet_dense += 2.0 * std::log(l_dense(i, i));
        CHECK(kronlin::kron_logdet(l_f, l_x) == doctest::Approx(logdet_dense).epsilon(1e-10));

        // posterior mean and covariance at random queries
        std::vector<double> kf1(r), kx1(s), kf2(r), kx2(s);
        for (double& v : kf1) v = stream.normal();
        for (double& v : kx1) v = stream.normal();
        for (double& v : kf2) v = stream.normal();
        for (double& v : kx2) v = stream.normal();

        std::vector<double> k1(r * s), k2(r * s);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < s; ++j) {
                k1[i * s + j] = kf1[i] * kx1[j];
                k2[i * s + j] = kf2[i] * kx2[j];
            }

        const Matrix solve = kronlin::kron_tri_solve(l_f.lower, l_x.lower, y);
        const double mu = kronlin::kron_posterior_mean(l_f.lower, l_x.lower, solve, kf1, kx1);
        // dense: mu = k1^T K^{-1} y
        const std::vector<double> w =
            linalg::backward_solve_transposed_vec(l_dense, a_dense);  // K^{-1} y
        const double mu_dense = linalg::dot(k1, w);
        CHECK(mu == doctest::Approx(mu_dense).epsilon(1e-10));

        const double prior = 1.7;
        const double cov =
            kronlin::kron_posterior_cov(l_f.lower, l_x.lower, prior, kf1, kx1, kf2, kx2);
        const std::vector<double> b1 = linalg::forward_solve_vec(l_dense, k1);
        const std::vector<double> b2 = linalg::forward_solve_vec(l_dense, k2);
        const double cov_dense = prior - linalg::dot(b1, b2);
        CHECK(cov == doctest::Approx(cov_dense).epsilon(1e-10));
    }
}

TEST_CASE("quadratic form scaling and identity special cases") {
    rng::SplitMix64 stream(404);
    Matrix y(2, 3);
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = stream.normal();

    // identity covariances: z = ||y||^2
    double norm2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) norm2 += y.data()[i] * y.data()[i];
    CHECK(kronlin::kron_quadratic(Matrix::identity(2), Matrix::identity(3), y) ==
          doctest::Approx(norm2).epsilon(1e-14));

    // scaling K_x by c scales z by 1/c
    const Matrix k_f = random_spd(2, stream);
    Matrix k_x = random_spd(3, stream);
    const kronlin::CholeskyFactor l_f = kronlin::cholesky(k_f);
    const kronlin::CholeskyFactor l_x = kronlin::cholesky(k_x);
    const double z1 = kronlin::kron_quadratic(l_f.lower, l_x.lower, y);
    Matrix k_x4 = k_x;
    for (std::size_t i = 0; i < k_x4.size(); ++i) k_x4.data()[i] *= 4.0;
    const kronlin::CholeskyFactor l_x4 = kronlin::cholesky(k_x4);
    const double z4 = kronlin::kron_quadratic(l_f.lower, l_x4.lower, y);
    CHECK(z4 == doctest::Approx(z1 / 4.0).epsilon(1e-12));
}

TEST_CASE("kron_logdet scalar case") {
    const kronlin::CholeskyFactor l_f = kronlin::cholesky(Matrix{{4.0}});
    const kronlin::CholeskyFactor l_x = kronlin::cholesky(Matrix::identity(3));
    CHECK(kronlin::kron_logdet(l_f, l_x) == doctest::Approx(3.0 * std::log(4.0)).epsilon(1e-14));
    CHECK(kronlin::kron_logdet(kronlin::cholesky(Matrix::identity(2)),
                               kronlin::cholesky(Matrix::identity(5))) == 0.0);
}

TEST_CASE("posterior mean interpolates noise-free training data") {
    rng::SplitMix64 stream(505);
    const std::size_t r = 3, s = 4;
    const Matrix k_f = random_spd(r, stream);
    const Matrix k_x = random_spd(s, stream);
    const kronlin::CholeskyFactor l_f = kronlin::cholesky(k_f);
    const kronlin::CholeskyFactor l_x = kronlin::cholesky(k_x);
    Matrix y(r, s);
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = stream.normal();
    const Matrix solve = kronlin::kron_tri_solve(l_f.lower, l_x.lower, y);

    double y_max = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) y_max = std::max(y_max, std::abs(y.data()[i]));

    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < s; ++j) {
            std::vector<double> kf(r), kx(s);
            for (std::size_t t = 0; t < r; ++t) kf[t] = k_f(i, t);
            for (std::size_t t = 0; t < s; ++t) kx[t] = k_x(j, t);
            const double mu = kronlin::kron_posterior_mean(l_f.lower, l_x.lower, solve, kf, kx);
            CHECK(std::abs(mu - y(i, j)) <= 1e-8 * y_max);
            const double prior = k_f(i, i) * k_x(j, j);
            const double var = kronlin::kron_posterior_var(l_f.lower, l_x.lower, prior, kf, kx);
            CHECK(var >= 0.0);
            CHECK(var <= 1e-8 * prior);
        }

    // zero cross-covariance: mean 0, prior variance recovered
    const std::vector<double> kf0(r, 0.0), kx0(s, 0.0);
    CHECK(kronlin::kron_posterior_mean(l_f.lower, l_x.lower, solve, kf0, kx0) == 0.0);
    CHECK(kronlin::kron_posterior_var(l_f.lower, l_x.lower, 2.2, kf0, kx0) == 2.2);
}

TEST_CASE("memory contract at R=100, S=1000") {
    rng::SplitMix64 stream(606);
    const std::size_t r = 100, s = 1000;

    // covariance-like factors with fast off-diagonal decay
    Matrix k_f(r, r);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
            const double d = static_cast<double>(i) - static_cast<double>(j);
            k_f(i, j) = std::exp(-0.5 * d * d / 25.0);
        }
    Matrix k_x(s, s);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) {
            const double d = static_cast<double>(i) - static_cast<double>(j);
            k_x(i, j) = 2.0 * std::exp(-0.5 * d * d / 100.0);
        }

    Matrix y(r, s);
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = stream.normal();

    linalg::AllocStats::reset();
    const auto start = std::chrono::steady_clock::now();

    const kronlin::CholeskyFactor l_f = kronlin::cholesky(k_f, {}, "K_f");
    const kronlin::CholeskyFactor l_x = kronlin::cholesky(k_x, {}, "K_x");
    const double z = kronlin::kron_quadratic(l_f.lower, l_x.lower, y);
    const double logdet = kronlin::kron_logdet(l_f, l_x);
    CHECK(std::isfinite(z));
    CHECK(std::isfinite(logdet));
    CHECK(z > 0.0);

    // full-map posterior for a fresh scenario at every location
    const Matrix solve = kronlin::kron_tri_solve(l_f.lower, l_x.lower, y);
    std::vector<double> kf(r), kx(s);
    for (std::size_t i = 0; i < r; ++i) kf[i] = std::exp(-0.5 * static_cast<double>(i * i) / 25.0);
    double checksum = 0.0;
    for (std::size_t q = 0; q < s; ++q) {
        for (std::size_t j = 0; j < s; ++j) {
            const double d = static_cast<double>(q) - static_cast<double>(j);
            kx[j] = 2.0 * std::exp(-0.5 * d * d / 100.0);
        }
        checksum += kronlin::kron_posterior_mean(l_f.lower, l_x.lower, solve, kf, kx);
        checksum += kronlin::kron_posterior_var(l_f.lower, l_x.lower, 2.0, kf, kx);
    }
    CHECK(std::isfinite(checksum));

    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start).count();

    // never an RS x RS allocation; the biggest block is the S x S spatial factor
    const std::size_t rs = static_cast<std::size_t>(r) * s;
    CHECK(linalg::AllocStats::peak_single_alloc.load() <= 2 * s * s * sizeof(double));
    CHECK(linalg::AllocStats::peak_single_alloc.load() < rs * rs * sizeof(double) / 1000);
    CHECK(linalg::AllocStats::peak_single_alloc.load() >= s * s * sizeof(double));
    CHECK(seconds < 60.0);
}
