#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "abc/core.hpp"
#include "abc/kernels.hpp"
#include "abc/models.hpp"

namespace abc {

struct RunConfig {
    std::string model_id;
    BoxPrior prior;
    KernelSpec kernel;
    EpsilonSchedule schedule = EpsilonSchedule::fixed({1.0});
    std::size_t population_size = 800;
    std::uint64_t seed = 1;
    long long max_proposals_per_generation = 1'000'000;
    int max_generations = 1000;   // guards adaptive schedules that stall
    unsigned workers = 1;

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;
};

struct RunResult {
    WeightedPopulation final_population;
    std::vector<GenerationRecord> generations;
    long long total_simulations = 0;
};

/// Run failure carrying the telemetry of every generation completed before it.
class EngineError : public std::runtime_error {
public:
    EngineError(const std::string& what, std::vector<GenerationRecord> partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}

    const std::vector<GenerationRecord>& partial_generations() const { return partial_; }

private:
    std::vector<GenerationRecord> partial_;
};

/// ABC SMC. Generation 1 samples the prior; later generations resample the previous
/// population, perturb with the adapted kernel (inside the prior support) and accept when
/// the simulated data fall within epsilon_t of `observed`. Proposal t/c uses the random
/// stream (seed, t, c) and acceptances commit in counter order, so the result does not
/// depend on `workers`.
RunResult run_abc_smc(const RunConfig& config, const GenerativeModel& model, const Vector& observed);

/// pi(theta_i) / sum_j w_j K(theta_i | theta_j), normalized. Evaluated in log space.
std::vector<double> compute_weights(std::span<const Particle> new_particles, const WeightedPopulation& prev,
                                    const KernelState& kernel, const BoxPrior& prior);

struct AcceptancePoint {
    int t = 0;
    double epsilon = 0.0;
    double rate = 0.0;
};

std::vector<AcceptancePoint> acceptance_rate_series(const RunResult& result);

}  // namespace abc
