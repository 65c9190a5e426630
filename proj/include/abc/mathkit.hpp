#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace abc {

using Vector = std::vector<double>;

/// Dense square matrix, row-major. Dimensions in this project stay small (d <= 6).
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t dim, double fill = 0.0) : dim_(dim), data_(dim * dim, fill) {}

    static Matrix identity(std::size_t dim);
    static Matrix diagonal(std::span<const double> diag);

    std::size_t dim() const { return dim_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }

    double trace() const;
    double max_abs() const;
    bool is_symmetric(double tol) const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator*=(double s);
    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    /// this += w * v v^T
    void add_outer(std::span<const double> v, double w = 1.0);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

/// Seeded random stream. Two streams built from the same (seed, stream_id) produce
/// identical sequences; streams are never shared between workers.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id);

    /// Stream for one proposal inside one generation of a run.
    static RandomStream for_proposal(std::uint64_t run_seed, std::uint64_t generation,
                                     std::uint64_t counter);

    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    double normal();                        // N(0, 1)
    double normal(double mean, double sd);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

Vector weighted_mean(std::span<const Vector> particles, std::span<const double> weights);

/// Second moment about `center`: sum_i w_i (x_i - c)(x_i - c)^T. No bias correction.
Matrix weighted_covariance(std::span<const Vector> particles, std::span<const double> weights,
                           std::span<const double> center);

/// Per-component weighted standard deviation about the weighted mean.
Vector weighted_std(std::span<const Vector> particles, std::span<const double> weights);

struct CholeskyFactor {
    Matrix lower;
    double ridge = 0.0;   // total diagonal shift that made the factorization succeed
};

/// Lower Cholesky factor of m + ridge*I. If that fails, an extra shift starting at
/// 1e-8*max(1, trace/d) is added and escalated x10 up to 1e-2*max(1, trace/d).
/// Throws std::domain_error when no shift in that range works.
CholeskyFactor cholesky(const Matrix& m, double ridge = 0.0);

/// Single factorization attempt without escalation; empty optional-like result via bool.
bool try_cholesky(const Matrix& m, Matrix& lower);

/// Symmetric positive definite matrix with its Cholesky factor.
class SpdMatrix {
public:
    SpdMatrix() = default;

    /// Factorizes `m`, regularizing with a diagonal ridge when needed.
    static SpdMatrix regularized(const Matrix& m);

    /// Factorizes `m` exactly; throws std::domain_error if not positive definite.
    static SpdMatrix exact(const Matrix& m);

    std::size_t dim() const { return entries_.dim(); }
    const Matrix& entries() const { return entries_; }
    const Matrix& chol() const { return chol_; }
    double ridge() const { return ridge_; }
    double log_det() const { return log_det_; }

    /// (x)^T S^{-1} (x)
    double mahalanobis_sq(std::span<const double> x) const;

    Matrix inverse() const;

private:
    SpdMatrix(Matrix entries, Matrix chol, double ridge);

    Matrix entries_;
    Matrix chol_;
    double ridge_ = 0.0;
    double log_det_ = 0.0;
};

/// mean + L z, z ~ N(0, I).
Vector mvn_sample(std::span<const double> mean, const Matrix& lower, RandomStream& rng);

double mvn_log_density(std::span<const double> x, std::span<const double> mean, const SpdMatrix& cov);

/// Indices of the M particles nearest to `theta` under the metric
/// sum_j ((theta_j - p_j) / scales_j)^2, ties broken by lower index.
std::vector<std::size_t> nearest_neighbors(std::span<const Vector> particles,
                                           std::span<const double> theta, std::size_t m,
                                           std::span<const double> scales);

std::size_t weighted_draw(std::span<const double> weights, RandomStream& rng);

/// Cumulative table for repeated draws from one weight vector.
class DiscreteSampler {
public:
    explicit DiscreteSampler(std::span<const double> weights);
    std::size_t draw(RandomStream& rng) const;

private:
    std::vector<double> cumulative_;
};

double log_sum_exp(std::span<const double> values);

}  // namespace abc
