#include "abc/mathkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace abc {

Matrix Matrix::identity(std::size_t dim) {
    Matrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
    Matrix m(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

double Matrix::trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool Matrix::is_symmetric(double tol) const {
    for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    return true;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    if (other.dim_ != dim_) throw std::invalid_argument("matrix dimension mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

void Matrix::add_outer(std::span<const double> v, double w) {
    for (std::size_t r = 0; r < dim_; ++r) {
        const double wr = w * v[r];
        double* row = &data_[r * dim_];
        for (std::size_t c = 0; c < dim_; ++c) row[c] += wr * v[c];
    }
}

Matrix multiply(const Matrix& a, const Matrix& b) {
    const std::size_t n = a.dim();
    Matrix out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j) out(i, j) += a(i, k) * b(k, j);
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < a.dim(); ++j) out(j, i) = a(i, j);
    return out;
}

// splitmix64 finalizer
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : engine_(mix_seed(mix_seed(seed, 0), stream_id)) {}

RandomStream RandomStream::for_proposal(std::uint64_t run_seed, std::uint64_t generation,
                                        std::uint64_t counter) {
    return RandomStream(mix_seed(run_seed, generation), counter);
}

double RandomStream::uniform() { return unit_(engine_); }

double RandomStream::uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }

double RandomStream::normal() { return normal_(engine_); }

double RandomStream::normal(double mean, double sd) { return mean + sd * normal_(engine_); }

Vector weighted_mean(std::span<const Vector> particles, std::span<const double> weights) {
    if (particles.empty()) throw std::invalid_argument("weighted_mean: empty population");
    if (weights.size() != particles.size())
        throw std::invalid_argument("weighted_mean: weight count mismatch");
    Vector mean(particles.front().size(), 0.0);
    for (std::size_t i = 0; i < particles.size(); ++i)
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += weights[i] * particles[i][j];
    return mean;
}

Matrix weighted_covariance(std::span<const Vector> particles, std::span<const double> weights,
                           std::span<const double> center) {
    Matrix cov(center.size());
    Vector diff(center.size());
    for (std::size_t i = 0; i < particles.size(); ++i) {
        for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = particles[i][j] - center[j];
        cov.add_outer(diff, weights[i]);
    }
    return cov;
}

Vector weighted_std(std::span<const Vector> particles, std::span<const double> weights) {
    const Vector mean = weighted_mean(particles, weights);
    Vector sd(mean.size(), 0.0);
    for (std::size_t i = 0; i < particles.size(); ++i)
        for (std::size_t j = 0; j < sd.size(); ++j) {
            const double d = particles[i][j] - mean[j];
            sd[j] += weights[i] * d * d;
        }
    for (double& v : sd) v = std::sqrt(v);
    return sd;
}

bool try_cholesky(const Matrix& m, Matrix& lower) {
    const std::size_t n = m.dim();
    lower = Matrix(n);
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(m(i, i)));
    const double pivot_floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;

    for (std::size_t j = 0; j < n; ++j) {
        double pivot = m(j, j);
        for (std::size_t k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
        if (!(pivot > pivot_floor) || !std::isfinite(pivot)) return false;
        const double ljj = std::sqrt(pivot);
        lower(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
            lower(i, j) = s / ljj;
        }
    }
    return true;
}

namespace {

Matrix shifted(const Matrix& m, double ridge) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.dim(); ++i) out(i, i) += ridge;
    return out;
}

}  // namespace

CholeskyFactor cholesky(const Matrix& m, double ridge) {
    if (!m.is_symmetric(1e-12 * std::max(1.0, m.max_abs())))
        throw std::invalid_argument("cholesky: matrix is not symmetric");
    CholeskyFactor out;
    if (try_cholesky(shifted(m, ridge), out.lower)) {
        out.ridge = ridge;
        return out;
    }
    const double scale = std::max(1.0, m.trace() / static_cast<double>(m.dim()));
    for (double extra = 1e-8 * scale; extra <= 1e-2 * scale * (1.0 + 1e-9); extra *= 10.0) {
        if (try_cholesky(shifted(m, ridge + extra), out.lower)) {
            out.ridge = ridge + extra;
            return out;
        }
    }
    throw std::domain_error("cholesky: matrix is not positive definite after ridge escalation");
}

SpdMatrix::SpdMatrix(Matrix entries, Matrix chol, double ridge)
    : entries_(std::move(entries)), chol_(std::move(chol)), ridge_(ridge) {
    log_det_ = 0.0;
    for (std::size_t i = 0; i < chol_.dim(); ++i) log_det_ += 2.0 * std::log(chol_(i, i));
}

SpdMatrix SpdMatrix::regularized(const Matrix& m) {
    CholeskyFactor f = cholesky(m, 0.0);
    return SpdMatrix(shifted(m, f.ridge), std::move(f.lower), f.ridge);
}

SpdMatrix SpdMatrix::exact(const Matrix& m) {
    Matrix lower;
    if (!try_cholesky(m, lower)) throw std::domain_error("matrix is not positive definite");
    return SpdMatrix(m, std::move(lower), 0.0);
}

double SpdMatrix::mahalanobis_sq(std::span<const double> x) const {
    // forward substitution L z = x, result |z|^2
    const std::size_t n = dim();
    double z_buf[16];
    std::vector<double> z_heap;
    double* z = z_buf;
    if (n > 16) {
        z_heap.resize(n);
        z = z_heap.data();
    }
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k) s -= chol_(i, k) * z[k];
        z[i] = s / chol_(i, i);
        q += z[i] * z[i];
    }
    return q;
}

Matrix SpdMatrix::inverse() const {
    const std::size_t n = dim();
    // L^{-1} by forward substitution, then S^{-1} = L^{-T} L^{-1}
    Matrix linv(n);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t i = c; i < n; ++i) {
            double s = (i == c) ? 1.0 : 0.0;
            for (std::size_t k = c; k < i; ++k) s -= chol_(i, k) * linv(k, c);
            linv(i, c) = s / chol_(i, i);
        }
    }
    Matrix out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = std::max(i, j); k < n; ++k) s += linv(k, i) * linv(k, j);
            out(i, j) = s;
        }
    return out;
}

Vector mvn_sample(std::span<const double> mean, const Matrix& lower, RandomStream& rng) {
    const std::size_t n = mean.size();
    Vector z(n);
    for (double& v : z) v = rng.normal();
    Vector out(mean.begin(), mean.end());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k <= i; ++k) out[i] += lower(i, k) * z[k];
    return out;
}

double mvn_log_density(std::span<const double> x, std::span<const double> mean, const SpdMatrix& cov) {
    const std::size_t n = mean.size();
    if (x.size() != n || cov.dim() != n) throw std::invalid_argument("mvn_log_density: dimension mismatch");
    double diff_buf[16];
    std::vector<double> diff_heap;
    double* diff = diff_buf;
    if (n > 16) {
        diff_heap.resize(n);
        diff = diff_heap.data();
    }
    for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - mean[i];
    constexpr double kLog2Pi = 1.8378770664093454836;
    return -0.5 * static_cast<double>(n) * kLog2Pi - 0.5 * cov.log_det() -
           0.5 * cov.mahalanobis_sq(std::span<const double>(diff, n));
}

std::vector<std::size_t> nearest_neighbors(std::span<const Vector> particles,
                                           std::span<const double> theta, std::size_t m,
                                           std::span<const double> scales) {
    if (m < 1 || m > particles.size())
        throw std::invalid_argument("nearest_neighbors: M must lie in [1, N]");
    std::vector<std::pair<double, std::size_t>> ranked(particles.size());
    for (std::size_t i = 0; i < particles.size(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double z = (theta[j] - particles[i][j]) / scales[j];
            d += z * z;
        }
        ranked[i] = {d, i};
    }
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(m), ranked.end());
    std::vector<std::size_t> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = ranked[i].second;
    return out;
}

std::size_t weighted_draw(std::span<const double> weights, RandomStream& rng) {
    return DiscreteSampler(weights).draw(rng);
}

DiscreteSampler::DiscreteSampler(std::span<const double> weights) : cumulative_(weights.size()) {
    if (weights.empty()) throw std::invalid_argument("DiscreteSampler: empty weights");
    std::partial_sum(weights.begin(), weights.end(), cumulative_.begin());
    if (!(cumulative_.back() > 0.0)) throw std::invalid_argument("DiscreteSampler: weights sum to zero");
}

std::size_t DiscreteSampler::draw(RandomStream& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    auto idx = static_cast<std::size_t>(it - cumulative_.begin());
    // never land on a trailing zero-weight entry
    while (idx > 0 && cumulative_[idx] == cumulative_[idx - 1]) --idx;
    return idx;
}

double log_sum_exp(std::span<const double> values) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : values) hi = std::max(hi, v);
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (double v : values) s += std::exp(v - hi);
    return hi + std::log(s);
}

}  // namespace abc
