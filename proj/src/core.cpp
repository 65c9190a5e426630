#include "abc/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace abc {

WeightedPopulation::WeightedPopulation(std::vector<Particle> particles, std::vector<double> weights,
                                       std::vector<double> distances, int generation)
    : particles_(std::move(particles)),
      weights_(std::move(weights)),
      distances_(std::move(distances)),
      generation_(generation) {
    const std::size_t n = particles_.size();
    if (n == 0) throw std::invalid_argument("population must contain at least one particle");
    if (weights_.size() != n || distances_.size() != n)
        throw std::invalid_argument("population lists must have equal length");
    const std::size_t d = particles_.front().size();
    for (const auto& p : particles_) {
        if (p.size() != d) throw std::invalid_argument("particles must share one dimension");
        for (double v : p)
            if (!std::isfinite(v)) throw std::invalid_argument("particle entries must be finite");
    }
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be finite and non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("weights sum to zero");
    for (double& w : weights_) w /= total;
    for (double dist : distances_)
        if (!(dist >= 0.0)) throw std::invalid_argument("distances must be non-negative");
}

WeightedPopulation WeightedPopulation::uniform(std::vector<Particle> particles, std::vector<double> distances,
                                               int generation) {
    std::vector<double> w(particles.size(), 1.0);
    return WeightedPopulation(std::move(particles), std::move(w), std::move(distances), generation);
}

BoxPrior::BoxPrior(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size() || lower_.empty())
        throw std::invalid_argument("prior bounds must be non-empty and of equal length");
    for (std::size_t j = 0; j < lower_.size(); ++j)
        if (!(lower_[j] < upper_[j]) || !std::isfinite(lower_[j]) || !std::isfinite(upper_[j]))
            throw std::invalid_argument("prior requires lower[" + std::to_string(j) + "] < upper[" +
                                        std::to_string(j) + "]");
}

bool BoxPrior::contains(std::span<const double> theta) const {
    if (theta.size() != lower_.size()) return false;
    for (std::size_t j = 0; j < theta.size(); ++j)
        if (!(theta[j] >= lower_[j] && theta[j] <= upper_[j])) return false;
    return true;
}

double BoxPrior::volume() const {
    double v = 1.0;
    for (std::size_t j = 0; j < lower_.size(); ++j) v *= upper_[j] - lower_[j];
    return v;
}

Particle BoxPrior::sample(RandomStream& rng) const {
    Particle p(lower_.size());
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = rng.uniform(lower_[j], upper_[j]);
    return p;
}

double BoxPrior::density(std::span<const double> theta) const {
    return contains(theta) ? 1.0 / volume() : 0.0;
}

Particle prior_sample(const BoxPrior& prior, RandomStream& rng) { return prior.sample(rng); }

double prior_density(const BoxPrior& prior, std::span<const double> theta) { return prior.density(theta); }

double distance_euclidean(std::span<const double> y, std::span<const double> x) {
    if (y.size() != x.size())
        throw std::invalid_argument("distance_euclidean: length mismatch (" + std::to_string(y.size()) +
                                    " vs " + std::to_string(x.size()) + ")");
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double d = y[k] - x[k];
        s += d * d;
    }
    return std::sqrt(s);
}

EpsilonSchedule EpsilonSchedule::fixed(std::vector<double> epsilons) {
    if (epsilons.empty()) throw std::invalid_argument("fixed schedule must not be empty");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0) || !std::isfinite(epsilons[i]))
            throw std::invalid_argument("schedule thresholds must be positive");
        if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
            throw std::invalid_argument("schedule must be strictly decreasing");
    }
    return EpsilonSchedule(FixedSchedule{std::move(epsilons)});
}

EpsilonSchedule EpsilonSchedule::adaptive(double alpha, double epsilon_final, double epsilon_initial) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
    if (!(epsilon_final >= 0.0) || !(epsilon_initial >= epsilon_final) || !std::isfinite(epsilon_initial))
        throw std::invalid_argument("adaptive schedule requires epsilon_initial >= epsilon_final >= 0");
    return EpsilonSchedule(AdaptiveQuantileSchedule{alpha, epsilon_final, epsilon_initial});
}

double EpsilonSchedule::final_epsilon() const {
    if (const auto* f = std::get_if<FixedSchedule>(&mode_)) return f->epsilons.back();
    return std::get<AdaptiveQuantileSchedule>(mode_).epsilon_final;
}

double lower_quantile(std::vector<double> values, double alpha) {
    if (values.empty()) throw std::invalid_argument("quantile of empty list");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

double EpsilonSchedule::next(int t, std::span<const double> prev_distances) const {
    if (t < 1) throw std::invalid_argument("generation index starts at 1");
    if (const auto* f = std::get_if<FixedSchedule>(&mode_)) {
        if (static_cast<std::size_t>(t) > f->epsilons.size())
            throw std::out_of_range("generation " + std::to_string(t) + " is beyond the fixed schedule");
        return f->epsilons[static_cast<std::size_t>(t) - 1];
    }
    const auto& a = std::get<AdaptiveQuantileSchedule>(mode_);
    if (t == 1) return a.epsilon_initial;
    if (prev_distances.empty()) throw std::invalid_argument("adaptive schedule needs previous distances");
    const double q = lower_quantile({prev_distances.begin(), prev_distances.end()}, a.alpha);
    return std::max(q, a.epsilon_final);
}

double next_epsilon(const EpsilonSchedule& schedule, int t, std::span<const double> prev_distances) {
    return schedule.next(t, prev_distances);
}

}  // namespace abc
