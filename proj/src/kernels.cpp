#include "abc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace abc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct NamedKind {
    const char* name;
    KernelKind kind;
};

constexpr NamedKind kKernelNames[] = {
    {"uniform", KernelKind::Uniform},
    {"component_normal", KernelKind::ComponentNormalRefined},
    {"component_normal_beaumont", KernelKind::ComponentNormalBeaumont},
    {"mvn", KernelKind::MvnGlobal},
    {"mvn_knn", KernelKind::MvnKnn},
    {"olcm", KernelKind::MvnOlcm},
    {"fim_global", KernelKind::FimGlobalDet},
    {"fim_knn", KernelKind::FimKnnDet},
};

Vector component_variance_about_mean(const WeightedPopulation& prev) {
    const Vector sd = weighted_std(prev.particles(), prev.weights());
    Vector var(sd.size());
    for (std::size_t j = 0; j < sd.size(); ++j) var[j] = sd[j] * sd[j];
    return var;
}

Matrix twice_weighted_covariance(const WeightedPopulation& prev) {
    const Vector mean = weighted_mean(prev.particles(), prev.weights());
    return 2.0 * weighted_covariance(prev.particles(), prev.weights(), mean);
}

Matrix neighbourhood_covariance(const WeightedPopulation& prev, std::span<const std::size_t> idx) {
    const std::size_t d = prev.dim();
    Vector mean(d, 0.0);
    for (std::size_t i : idx)
        for (std::size_t j = 0; j < d; ++j) mean[j] += prev.particle(i)[j];
    for (double& v : mean) v /= static_cast<double>(idx.size());
    Matrix cov(d);
    Vector diff(d);
    const double w = 1.0 / static_cast<double>(idx.size());
    for (std::size_t i : idx) {
        for (std::size_t j = 0; j < d; ++j) diff[j] = prev.particle(i)[j] - mean[j];
        cov.add_outer(diff, w);
    }
    return cov;
}

SpdMatrix spd_preserving_det(const Matrix& m) {
    Matrix lower;
    if (try_cholesky(m, lower)) return SpdMatrix::exact(m);
    return SpdMatrix::regularized(m);
}

}  // namespace

std::string kernel_name(KernelSpec spec) {
    for (const auto& nk : kKernelNames) {
        if (nk.kind != spec.kind) continue;
        std::string name = nk.name;
        if ((spec.kind == KernelKind::MvnKnn || spec.kind == KernelKind::FimKnnDet) && spec.neighbours > 0)
            name += ":" + std::to_string(spec.neighbours);
        return name;
    }
    return "unknown";
}

std::optional<KernelKind> kernel_kind_from_name(const std::string& name) {
    for (const auto& nk : kKernelNames)
        if (name == nk.name) return nk.kind;
    return std::nullopt;
}

bool kernel_is_local(KernelKind kind) {
    return kind == KernelKind::MvnKnn || kind == KernelKind::MvnOlcm || kind == KernelKind::FimGlobalDet ||
           kind == KernelKind::FimKnnDet;
}

bool kernel_needs_fim(KernelKind kind) {
    return kind == KernelKind::FimGlobalDet || kind == KernelKind::FimKnnDet;
}

TildePopulation build_tilde_population(const WeightedPopulation& prev, double epsilon_next) {
    TildePopulation tilde;
    double total = 0.0;
    for (std::size_t i = 0; i < prev.size(); ++i) {
        if (prev.distance(i) <= epsilon_next) {
            tilde.particles.push_back(prev.particle(i));
            tilde.weights.push_back(prev.weight(i));
            tilde.source_index.push_back(i);
            total += prev.weight(i);
        }
    }
    if (!tilde.empty() && total > 0.0) {
        for (double& w : tilde.weights) w /= total;
    } else if (!tilde.empty()) {
        // every surviving particle had zero weight; treat them equally
        for (double& w : tilde.weights) w = 1.0 / static_cast<double>(tilde.size());
    }
    return tilde;
}

// ---- KernelState ---------------------------------------------------------------------

KernelState KernelState::uniform(Vector half_widths) {
    KernelState s;
    s.kind_ = KernelKind::Uniform;
    for (double& h : half_widths) h = std::max(h, kScaleFloor);
    s.scales_ = std::move(half_widths);
    return s;
}

KernelState KernelState::component_normal(KernelKind kind, Vector variances) {
    if (kind != KernelKind::ComponentNormalBeaumont && kind != KernelKind::ComponentNormalRefined)
        throw std::invalid_argument("component_normal: wrong kernel kind");
    KernelState s;
    s.kind_ = kind;
    for (double& v : variances) v = std::max(v, kScaleFloor);
    s.scales_.resize(variances.size());
    for (std::size_t j = 0; j < variances.size(); ++j) s.scales_[j] = std::sqrt(variances[j]);
    s.variances_ = std::move(variances);
    return s;
}

KernelState KernelState::global(KernelKind kind, SpdMatrix cov) {
    if (kind != KernelKind::MvnGlobal) throw std::invalid_argument("global: wrong kernel kind");
    KernelState s;
    s.kind_ = kind;
    s.global_cov_ = std::move(cov);
    return s;
}

KernelState KernelState::local(KernelKind kind, std::vector<SpdMatrix> covs) {
    if (!kernel_is_local(kind)) throw std::invalid_argument("local: wrong kernel kind");
    if (covs.empty()) throw std::invalid_argument("local: no covariances");
    KernelState s;
    s.kind_ = kind;
    s.local_covs_ = std::move(covs);
    return s;
}

std::size_t KernelState::dim() const {
    if (!scales_.empty()) return scales_.size();
    if (kind_ == KernelKind::MvnGlobal) return global_cov_.dim();
    return local_covs_.empty() ? 0 : local_covs_.front().dim();
}

const SpdMatrix& KernelState::cov_for(std::size_t index) const {
    if (kind_ == KernelKind::MvnGlobal) return global_cov_;
    if (index >= local_covs_.size()) throw std::out_of_range("kernel: particle index out of range");
    return local_covs_[index];
}

Particle KernelState::draw(std::size_t center_index, std::span<const double> center, RandomStream& rng) const {
    switch (kind_) {
        case KernelKind::Uniform: {
            Particle p(center.begin(), center.end());
            for (std::size_t j = 0; j < p.size(); ++j) p[j] += rng.uniform(-scales_[j], scales_[j]);
            return p;
        }
        case KernelKind::ComponentNormalBeaumont:
        case KernelKind::ComponentNormalRefined: {
            Particle p(center.begin(), center.end());
            for (std::size_t j = 0; j < p.size(); ++j) p[j] += scales_[j] * rng.normal();
            return p;
        }
        default:
            return mvn_sample(center, cov_for(center_index).chol(), rng);
    }
}

double KernelState::log_density(std::size_t from_index, std::span<const double> from,
                                std::span<const double> to) const {
    switch (kind_) {
        case KernelKind::Uniform: {
            double lp = 0.0;
            for (std::size_t j = 0; j < scales_.size(); ++j) {
                if (std::abs(to[j] - from[j]) > scales_[j]) return kNegInf;
                lp -= std::log(2.0 * scales_[j]);
            }
            return lp;
        }
        case KernelKind::ComponentNormalBeaumont:
        case KernelKind::ComponentNormalRefined: {
            double lp = 0.0;
            for (std::size_t j = 0; j < variances_.size(); ++j) {
                const double d = to[j] - from[j];
                lp += -0.5 * (kLog2Pi + std::log(variances_[j])) - 0.5 * d * d / variances_[j];
            }
            return lp;
        }
        default:
            return mvn_log_density(to, from, cov_for(from_index));
    }
}

double KernelState::density(std::size_t from_index, std::span<const double> from,
                            std::span<const double> to) const {
    return std::exp(log_density(from_index, from, to));
}

// ---- adaptation ----------------------------------------------------------------------

Vector adapt_uniform(const WeightedPopulation& prev) {
    const std::size_t d = prev.dim();
    Vector lo(d, std::numeric_limits<double>::infinity());
    Vector hi(d, -std::numeric_limits<double>::infinity());
    for (const auto& p : prev.particles())
        for (std::size_t j = 0; j < d; ++j) {
            lo[j] = std::min(lo[j], p[j]);
            hi[j] = std::max(hi[j], p[j]);
        }
    Vector sigma(d);
    for (std::size_t j = 0; j < d; ++j) sigma[j] = std::max(0.5 * (hi[j] - lo[j]), kScaleFloor);
    return sigma;
}

Vector adapt_component_normal_beaumont(const WeightedPopulation& prev) {
    Vector var = component_variance_about_mean(prev);
    for (double& v : var) v = std::max(2.0 * v, kScaleFloor);
    return var;
}

Vector adapt_component_normal_refined(const WeightedPopulation& prev, double epsilon_next) {
    const TildePopulation tilde = build_tilde_population(prev, epsilon_next);
    if (tilde.empty()) return adapt_component_normal_beaumont(prev);
    const std::size_t d = prev.dim();
    Vector var(d, 0.0);
    for (std::size_t i = 0; i < prev.size(); ++i) {
        const auto& p = prev.particle(i);
        const double wi = prev.weight(i);
        for (std::size_t k = 0; k < tilde.size(); ++k) {
            const double w = wi * tilde.weights[k];
            const auto& q = tilde.particles[k];
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = q[j] - p[j];
                var[j] += w * diff * diff;
            }
        }
    }
    for (double& v : var) v = std::max(v, kScaleFloor);
    return var;
}

Matrix optimal_global_covariance(const WeightedPopulation& prev, const TildePopulation& tilde) {
    if (tilde.empty()) return twice_weighted_covariance(prev);
    const std::size_t d = prev.dim();
    Matrix cov(d);
    Vector diff(d);
    for (std::size_t i = 0; i < prev.size(); ++i) {
        const auto& p = prev.particle(i);
        for (std::size_t k = 0; k < tilde.size(); ++k) {
            const auto& q = tilde.particles[k];
            for (std::size_t j = 0; j < d; ++j) diff[j] = q[j] - p[j];
            cov.add_outer(diff, prev.weight(i) * tilde.weights[k]);
        }
    }
    return cov;
}

SpdMatrix adapt_mvn_global(const WeightedPopulation& prev, double epsilon_next) {
    return SpdMatrix::regularized(optimal_global_covariance(prev, build_tilde_population(prev, epsilon_next)));
}

Vector neighbour_scales(const WeightedPopulation& prev) {
    Vector s = weighted_std(prev.particles(), prev.weights());
    for (double& v : s) v = std::max(v, kScaleFloor);
    return s;
}

std::vector<SpdMatrix> adapt_mvn_knn(const WeightedPopulation& prev, std::size_t m,
                                     std::span<const double> scales) {
    if (m < 2 || m > prev.size()) throw std::invalid_argument("mvn_knn: M must lie in [2, N]");
    std::vector<SpdMatrix> covs;
    covs.reserve(prev.size());
    for (std::size_t l = 0; l < prev.size(); ++l) {
        const auto idx = nearest_neighbors(prev.particles(), prev.particle(l), m, scales);
        covs.push_back(SpdMatrix::regularized(neighbourhood_covariance(prev, idx)));
    }
    return covs;
}

Matrix olcm_covariance(const TildePopulation& tilde, std::span<const double> center) {
    const std::size_t d = center.size();
    Matrix cov(d);
    Vector diff(d);
    for (std::size_t k = 0; k < tilde.size(); ++k) {
        for (std::size_t j = 0; j < d; ++j) diff[j] = tilde.particles[k][j] - center[j];
        cov.add_outer(diff, tilde.weights[k]);
    }
    return cov;
}

std::vector<SpdMatrix> adapt_mvn_olcm(const WeightedPopulation& prev, double epsilon_next) {
    const TildePopulation tilde = build_tilde_population(prev, epsilon_next);
    std::vector<SpdMatrix> covs;
    covs.reserve(prev.size());
    if (tilde.empty()) {
        covs.assign(prev.size(), SpdMatrix::regularized(twice_weighted_covariance(prev)));
        return covs;
    }
    for (std::size_t l = 0; l < prev.size(); ++l)
        covs.push_back(SpdMatrix::regularized(olcm_covariance(tilde, prev.particle(l))));
    return covs;
}

std::size_t default_fim_neighbours(std::size_t population_size) {
    const auto m = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(population_size)));
    return std::clamp<std::size_t>(m, std::min<std::size_t>(2, population_size), population_size);
}

Matrix fim_scaled_covariance(const Matrix& fim_value, double reference_log_det) {
    const std::size_t d = fim_value.dim();
    Matrix lower;
    SpdMatrix info;
    if (try_cholesky(fim_value, lower)) {
        info = SpdMatrix::exact(fim_value);
    } else {
        Matrix safe = fim_value;
        const double shift = 1e-8 * std::abs(fim_value.trace()) / static_cast<double>(d);
        for (std::size_t i = 0; i < d; ++i) safe(i, i) += shift;
        info = SpdMatrix::exact(safe);   // throws domain_error when still singular
    }
    // det(I^{-1}) = 1/det(I); scale c satisfies c^d det(I^{-1}) = det(reference)
    const double log_c = (reference_log_det + info.log_det()) / static_cast<double>(d);
    return std::exp(log_c) * info.inverse();
}

std::vector<SpdMatrix> adapt_fim(const WeightedPopulation& prev, const FimProvider& fim,
                                 FimNormalization normalization, double epsilon_next) {
    if (!fim) throw std::invalid_argument("adapt_fim: no Fisher information available for this model");
    std::vector<double> ref_log_det(prev.size());
    if (normalization.reference == FimNormalization::Reference::GlobalDet) {
        const double ld = adapt_mvn_global(prev, epsilon_next).log_det();
        std::fill(ref_log_det.begin(), ref_log_det.end(), ld);
    } else {
        const std::size_t m = normalization.neighbours > 0 ? normalization.neighbours
                                                           : default_fim_neighbours(prev.size());
        const auto knn = adapt_mvn_knn(prev, m, neighbour_scales(prev));
        for (std::size_t l = 0; l < prev.size(); ++l) ref_log_det[l] = knn[l].log_det();
    }

    std::vector<SpdMatrix> covs;
    covs.reserve(prev.size());
    for (std::size_t l = 0; l < prev.size(); ++l) {
        const Matrix info = fim(prev.particle(l));
        if (info.dim() != prev.dim() || !info.is_symmetric(1e-9 * std::max(1.0, info.max_abs())))
            throw std::runtime_error("adapt_fim: Fisher information at particle " + std::to_string(l) +
                                     " is not a symmetric " + std::to_string(prev.dim()) + "x" +
                                     std::to_string(prev.dim()) + " matrix");
        try {
            covs.push_back(spd_preserving_det(fim_scaled_covariance(info, ref_log_det[l])));
        } catch (const std::domain_error&) {
            throw std::runtime_error("adapt_fim: Fisher information at particle " + std::to_string(l) +
                                     " is singular after the safeguard");
        }
    }
    return covs;
}

KernelState adapt_kernel(KernelSpec spec, const WeightedPopulation& prev, double epsilon_next,
                         const FimProvider* fim) {
    switch (spec.kind) {
        case KernelKind::Uniform:
            return KernelState::uniform(adapt_uniform(prev));
        case KernelKind::ComponentNormalBeaumont:
            return KernelState::component_normal(spec.kind, adapt_component_normal_beaumont(prev));
        case KernelKind::ComponentNormalRefined:
            return KernelState::component_normal(spec.kind, adapt_component_normal_refined(prev, epsilon_next));
        case KernelKind::MvnGlobal:
            return KernelState::global(spec.kind, adapt_mvn_global(prev, epsilon_next));
        case KernelKind::MvnKnn: {
            if (spec.neighbours == 0) throw std::invalid_argument("mvn_knn kernel requires M");
            const std::size_t m = std::min(spec.neighbours, prev.size());
            return KernelState::local(spec.kind, adapt_mvn_knn(prev, m, neighbour_scales(prev)));
        }
        case KernelKind::MvnOlcm:
            return KernelState::local(spec.kind, adapt_mvn_olcm(prev, epsilon_next));
        case KernelKind::FimGlobalDet:
        case KernelKind::FimKnnDet: {
            if (fim == nullptr || !*fim)
                throw std::invalid_argument("kernel " + kernel_name(spec) + " needs a Fisher information provider");
            FimNormalization norm;
            if (spec.kind == KernelKind::FimKnnDet) {
                norm.reference = FimNormalization::Reference::KnnDet;
                norm.neighbours = spec.neighbours == 0 ? 0 : std::min(spec.neighbours, prev.size());
            }
            return KernelState::local(spec.kind, adapt_fim(prev, *fim, norm, epsilon_next));
        }
    }
    throw std::invalid_argument("unknown kernel kind");
}

Particle kernel_sample(const KernelState& state, std::size_t center_index, std::span<const double> center,
                       const BoxPrior& prior, RandomStream& rng) {
    for (int attempt = 0; attempt < kMaxPriorRedraws; ++attempt) {
        Particle p = state.draw(center_index, center, rng);
        if (prior.density(p) > 0.0) return p;
    }
    throw std::runtime_error("kernel_sample: " + std::to_string(kMaxPriorRedraws) +
                             " consecutive draws fell outside the prior support");
}

double kernel_density(const KernelState& state, std::size_t from_index, std::span<const double> from,
                      std::span<const double> to) {
    return state.density(from_index, from, to);
}

double estimate_q(const KernelState& state, const WeightedPopulation& prev, const TildePopulation& tilde) {
    if (prev.size() == 0 || tilde.empty()) throw std::invalid_argument("estimate_q: empty population");
    double q = 0.0;
    for (std::size_t i = 0; i < prev.size(); ++i) {
        for (std::size_t k = 0; k < tilde.size(); ++k) {
            const double w = prev.weight(i) * tilde.weights[k];
            if (w == 0.0) continue;
            const double lk = state.log_density(i, prev.particle(i), tilde.particles[k]);
            if (lk == kNegInf) return kNegInf;
            q += w * lk;
        }
    }
    return q;
}

}  // namespace abc
