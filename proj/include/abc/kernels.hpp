#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abc/core.hpp"
#include "abc/mathkit.hpp"

namespace abc {

enum class KernelKind {
    Uniform,
    ComponentNormalBeaumont,
    ComponentNormalRefined,
    MvnGlobal,
    MvnKnn,
    MvnOlcm,
    FimGlobalDet,
    FimKnnDet,
};

/// Kernel family plus its tuning parameter. `neighbours` is M for MvnKnn and FimKnnDet;
/// zero means "use the default" (ceil(0.2 N) for FimKnnDet, required for MvnKnn).
struct KernelSpec {
    KernelKind kind = KernelKind::MvnOlcm;
    std::size_t neighbours = 0;

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Canonical names: uniform, component_normal, component_normal_beaumont, mvn, mvn_knn,
/// olcm, fim_global, fim_knn. Parameterized kinds print as e.g. "mvn_knn:50".
std::string kernel_name(KernelSpec spec);
std::optional<KernelKind> kernel_kind_from_name(const std::string& name);
bool kernel_is_local(KernelKind kind);
bool kernel_needs_fim(KernelKind kind);

/// Fisher information I(theta). Must return a symmetric d x d matrix.
using FimProvider = std::function<Matrix(const Particle&)>;

/// Previous-generation particles whose recorded distance already meets the next threshold.
struct TildePopulation {
    std::vector<Particle> particles;
    std::vector<double> weights;             // renormalized
    std::vector<std::size_t> source_index;   // position in the previous population

    std::size_t size() const { return particles.size(); }
    bool empty() const { return particles.empty(); }
};

TildePopulation build_tilde_population(const WeightedPopulation& prev, double epsilon_next);

/// Adapted perturbation kernel for one generation. Immutable once built; sampling and
/// density evaluation are safe to call from several threads.
class KernelState {
public:
    static KernelState uniform(Vector half_widths);
    static KernelState component_normal(KernelKind kind, Vector variances);
    static KernelState global(KernelKind kind, SpdMatrix cov);
    static KernelState local(KernelKind kind, std::vector<SpdMatrix> covs);

    KernelKind kind() const { return kind_; }
    std::size_t dim() const;

    /// Uniform half-widths, or component standard deviations.
    const Vector& scales() const { return scales_; }
    /// Component variances (component-normal kinds only).
    const Vector& variances() const { return variances_; }
    const SpdMatrix& global_cov() const { return global_cov_; }
    const std::vector<SpdMatrix>& local_covs() const { return local_covs_; }

    /// Covariance used around previous particle `index` (normal kinds).
    const SpdMatrix& cov_for(std::size_t index) const;

    /// Unconstrained draw centered at `center`.
    Particle draw(std::size_t center_index, std::span<const double> center, RandomStream& rng) const;

    double log_density(std::size_t from_index, std::span<const double> from, std::span<const double> to) const;
    double density(std::size_t from_index, std::span<const double> from, std::span<const double> to) const;

private:
    KernelKind kind_ = KernelKind::Uniform;
    Vector scales_;
    Vector variances_;
    SpdMatrix global_cov_;
    std::vector<SpdMatrix> local_covs_;
};

constexpr double kScaleFloor = 1e-12;
constexpr int kMaxPriorRedraws = 10000;

Vector adapt_uniform(const WeightedPopulation& prev);
Vector adapt_component_normal_beaumont(const WeightedPopulation& prev);
Vector adapt_component_normal_refined(const WeightedPopulation& prev, double epsilon_next);

/// sum_i sum_k w_i w~_k (t~_k - t_i)(t~_k - t_i)^T, before regularization.
/// Falls back to twice the weighted covariance of `prev` when the tilde set is empty.
Matrix optimal_global_covariance(const WeightedPopulation& prev, const TildePopulation& tilde);

SpdMatrix adapt_mvn_global(const WeightedPopulation& prev, double epsilon_next);

/// Per-component weighted standard deviation of `prev`, floored; the neighbour metric scales.
Vector neighbour_scales(const WeightedPopulation& prev);

/// Unweighted covariance of the M nearest neighbours of every previous particle.
std::vector<SpdMatrix> adapt_mvn_knn(const WeightedPopulation& prev, std::size_t m, std::span<const double> scales);

/// sum_k w~_k (t~_k - t)(t~_k - t)^T for one center t.
Matrix olcm_covariance(const TildePopulation& tilde, std::span<const double> center);

std::vector<SpdMatrix> adapt_mvn_olcm(const WeightedPopulation& prev, double epsilon_next);

struct FimNormalization {
    enum class Reference { GlobalDet, KnnDet } reference = Reference::GlobalDet;
    std::size_t neighbours = 0;   // KnnDet only; 0 -> ceil(0.2 N)
};

/// Inverse Fisher information scaled so its determinant matches the reference covariance.
/// Throws std::runtime_error naming the particle if I(theta) stays singular after the safeguard.
std::vector<SpdMatrix> adapt_fim(const WeightedPopulation& prev, const FimProvider& fim,
                                 FimNormalization normalization, double epsilon_next);

/// Scale c*I^{-1}(theta) with det equal to exp(reference_log_det).
Matrix fim_scaled_covariance(const Matrix& fim_value, double reference_log_det);

std::size_t default_fim_neighbours(std::size_t population_size);

/// Adapts the kernel described by `spec` against the previous population.
KernelState adapt_kernel(KernelSpec spec, const WeightedPopulation& prev, double epsilon_next,
                         const FimProvider* fim = nullptr);

/// Draw from the kernel around `center`, redrawing until the prior density is positive.
/// Throws std::runtime_error after kMaxPriorRedraws consecutive out-of-support draws.
Particle kernel_sample(const KernelState& state, std::size_t center_index, std::span<const double> center,
                       const BoxPrior& prior, RandomStream& rng);

double kernel_density(const KernelState& state, std::size_t from_index, std::span<const double> from,
                      std::span<const double> to);

/// Population estimate sum_i sum_k w_i w~_k log K(t~_k | t_i).
double estimate_q(const KernelState& state, const WeightedPopulation& prev, const TildePopulation& tilde);

}  // namespace abc
