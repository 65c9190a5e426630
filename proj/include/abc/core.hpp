#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "abc/mathkit.hpp"

namespace abc {

/// One parameter vector. All entries finite.
using Particle = Vector;

/// Weighted sample passed from one generation to the next. Stores the distance
/// recorded when each particle was accepted instead of its simulated dataset.
class WeightedPopulation {
public:
    WeightedPopulation() = default;

    /// Validates and normalizes `weights`. Throws std::invalid_argument on empty input,
    /// mismatched lengths, negative or non-finite values, or a zero weight sum.
    WeightedPopulation(std::vector<Particle> particles, std::vector<double> weights,
                       std::vector<double> distances, int generation);

    /// Equal weights.
    static WeightedPopulation uniform(std::vector<Particle> particles, std::vector<double> distances,
                                      int generation);

    std::size_t size() const { return particles_.size(); }
    std::size_t dim() const { return particles_.empty() ? 0 : particles_.front().size(); }
    int generation() const { return generation_; }

    std::span<const Particle> particles() const { return particles_; }
    std::span<const double> weights() const { return weights_; }
    std::span<const double> distances() const { return distances_; }

    const Particle& particle(std::size_t i) const { return particles_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }
    double distance(std::size_t i) const { return distances_[i]; }

private:
    std::vector<Particle> particles_;
    std::vector<double> weights_;
    std::vector<double> distances_;
    int generation_ = 0;
};

/// Uniform prior on an axis-aligned box.
class BoxPrior {
public:
    BoxPrior() = default;
    BoxPrior(Vector lower, Vector upper);

    std::size_t dim() const { return lower_.size(); }
    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }

    bool contains(std::span<const double> theta) const;
    double volume() const;

    Particle sample(RandomStream& rng) const;
    double density(std::span<const double> theta) const;

private:
    Vector lower_;
    Vector upper_;
};

Particle prior_sample(const BoxPrior& prior, RandomStream& rng);
double prior_density(const BoxPrior& prior, std::span<const double> theta);

double distance_euclidean(std::span<const double> y, std::span<const double> x);

struct FixedSchedule {
    std::vector<double> epsilons;
};

struct AdaptiveQuantileSchedule {
    double alpha = 0.5;
    double epsilon_final = 0.0;
    double epsilon_initial = 0.0;
};

/// Decreasing threshold sequence: either an explicit list or the alpha-quantile rule.
class EpsilonSchedule {
public:
    /// Throws std::invalid_argument unless the list is non-empty, positive and strictly decreasing.
    static EpsilonSchedule fixed(std::vector<double> epsilons);
    /// Throws std::invalid_argument unless 0 < alpha < 1 and epsilon_initial >= epsilon_final >= 0.
    static EpsilonSchedule adaptive(double alpha, double epsilon_final, double epsilon_initial);

    bool is_fixed() const { return std::holds_alternative<FixedSchedule>(mode_); }
    const std::variant<FixedSchedule, AdaptiveQuantileSchedule>& mode() const { return mode_; }

    /// Threshold at which a run stops (last list entry, or epsilon_final).
    double final_epsilon() const;

    /// Threshold for generation t (1-based). Adaptive mode takes the alpha-quantile of the
    /// previous generation's accepted distances, clamped below by epsilon_final.
    double next(int t, std::span<const double> prev_distances) const;

private:
    explicit EpsilonSchedule(std::variant<FixedSchedule, AdaptiveQuantileSchedule> mode)
        : mode_(std::move(mode)) {}

    std::variant<FixedSchedule, AdaptiveQuantileSchedule> mode_;
};

double next_epsilon(const EpsilonSchedule& schedule, int t, std::span<const double> prev_distances);

/// Lower empirical quantile: element ceil(alpha*N) (1-based) of the sorted values.
double lower_quantile(std::vector<double> values, double alpha);

struct GenerationRecord {
    int t = 0;
    double epsilon = 0.0;
    long long accepted = 0;
    long long proposals = 0;
    long long simulations = 0;
    double acceptance_rate = 0.0;
    double wall_time_ms = 0.0;
};

}  // namespace abc
