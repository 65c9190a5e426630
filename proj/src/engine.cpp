#include "abc/engine.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <thread>

namespace abc {

namespace {

struct Proposal {
    Particle theta;
    double distance = 0.0;
    std::exception_ptr error;
};

class Generation {
public:
    Generation(const RunConfig& config, const GenerativeModel& model, const Vector& observed, int t,
               const WeightedPopulation* prev, const KernelState* kernel)
        : config_(config), model_(model), observed_(observed), t_(t), prev_(prev), kernel_(kernel) {
        if (prev_ != nullptr) sampler_.emplace(prev_->weights());
    }

    Proposal evaluate(std::uint64_t counter) const {
        Proposal p;
        try {
            RandomStream rng = RandomStream::for_proposal(config_.seed, static_cast<std::uint64_t>(t_), counter);
            if (prev_ == nullptr) {
                p.theta = config_.prior.sample(rng);
            } else {
                const std::size_t j = sampler_->draw(rng);
                p.theta = kernel_sample(*kernel_, j, prev_->particle(j), config_.prior, rng);
            }
            const Vector y = model_.simulate(p.theta, rng);
            p.distance = distance_euclidean(y, observed_);
        } catch (...) {
            p.error = std::current_exception();
        }
        return p;
    }

private:
    const RunConfig& config_;
    const GenerativeModel& model_;
    const Vector& observed_;
    int t_;
    const WeightedPopulation* prev_;
    const KernelState* kernel_;
    std::optional<DiscreteSampler> sampler_;
};

std::vector<Proposal> evaluate_batch(const Generation& gen, std::uint64_t first, std::size_t count, unsigned workers) {
    std::vector<Proposal> out(count);
    if (workers <= 1 || count <= 1) {
        for (std::size_t b = 0; b < count; ++b) out[b] = gen.evaluate(first + b);
        return out;
    }
    const unsigned used = std::min<unsigned>(workers, static_cast<unsigned>(count));
    {
        std::vector<std::jthread> pool;
        pool.reserve(used);
        for (unsigned w = 0; w < used; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t b = w; b < count; b += used) out[b] = gen.evaluate(first + b);
            });
        }
    }
    return out;
}

}  // namespace

void RunConfig::validate() const {
    if (population_size < 2) throw std::invalid_argument("population_size must be at least 2");
    if (max_proposals_per_generation < static_cast<long long>(population_size))
        throw std::invalid_argument("max_proposals_per_generation must be >= population_size");
    if (prior.dim() == 0) throw std::invalid_argument("prior is empty");
    if (kernel.kind == KernelKind::MvnKnn && kernel.neighbours < 2)
        throw std::invalid_argument("mvn_knn kernel requires M >= 2");
    if (kernel.neighbours > population_size)
        throw std::invalid_argument("kernel neighbour count M exceeds population_size");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (max_generations < 1) throw std::invalid_argument("max_generations must be >= 1");
}

std::vector<double> compute_weights(std::span<const Particle> new_particles, const WeightedPopulation& prev,
                                    const KernelState& kernel, const BoxPrior& prior) {
    const std::size_t n = new_particles.size();
    std::vector<double> log_w(n);
    std::vector<double> terms(prev.size());
    std::vector<double> log_prev_w(prev.size());
    for (std::size_t j = 0; j < prev.size(); ++j)
        log_prev_w[j] = prev.weight(j) > 0.0 ? std::log(prev.weight(j)) : -std::numeric_limits<double>::infinity();

    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double pd = prior.density(new_particles[i]);
        if (!(pd > 0.0)) {
            log_w[i] = -std::numeric_limits<double>::infinity();
            continue;
        }
        for (std::size_t j = 0; j < prev.size(); ++j) {
            terms[j] = log_prev_w[j] == -std::numeric_limits<double>::infinity()
                           ? log_prev_w[j]
                           : log_prev_w[j] + kernel.log_density(j, prev.particle(j), new_particles[i]);
        }
        const double log_den = log_sum_exp(terms);
        log_w[i] = log_den == -std::numeric_limits<double>::infinity() ? -std::numeric_limits<double>::infinity()
                                                                        : std::log(pd) - log_den;
        hi = std::max(hi, log_w[i]);
    }
    if (!std::isfinite(hi)) throw std::runtime_error("compute_weights: all unnormalized weights are zero");
    std::vector<double> w(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(log_w[i] - hi);
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

RunResult run_abc_smc(const RunConfig& config, const GenerativeModel& model, const Vector& observed) {
    config.validate();
    if (observed.size() != model.dim_data)
        throw std::invalid_argument("observed data has " + std::to_string(observed.size()) + " values, model '" +
                                    model.id + "' produces " + std::to_string(model.dim_data));
    if (config.prior.dim() != model.dim_theta)
        throw std::invalid_argument("prior dimension does not match model '" + model.id + "'");
    if (kernel_needs_fim(config.kernel.kind) && !model.fim)
        throw std::invalid_argument("model '" + model.id + "' provides no Fisher information for kernel " +
                                    kernel_name(config.kernel));

    using Clock = std::chrono::steady_clock;
    const std::size_t n = config.population_size;
    const unsigned workers = std::max(1u, config.workers);
    const std::size_t batch = workers == 1 ? 1 : 16 * static_cast<std::size_t>(workers);

    RunResult result;
    std::optional<WeightedPopulation> prev;
    const FimProvider* fim = model.fim ? &model.fim : nullptr;

    for (int t = 1;; ++t) {
        const auto start = Clock::now();
        GenerationRecord rec;
        rec.t = t;
        std::vector<Particle> particles;
        std::vector<double> distances;
        try {
            rec.epsilon = config.schedule.next(t, prev ? prev->distances() : std::span<const double>{});
            std::optional<KernelState> kernel;
            if (prev) kernel = adapt_kernel(config.kernel, *prev, rec.epsilon, fim);

            const Generation gen(config, model, observed, t, prev ? &*prev : nullptr, kernel ? &*kernel : nullptr);
            particles.reserve(n);
            distances.reserve(n);
            std::uint64_t counter = 0;
            while (particles.size() < n) {
                const long long left = config.max_proposals_per_generation - static_cast<long long>(counter);
                if (left <= 0)
                    throw std::runtime_error("generation " + std::to_string(t) + " (epsilon " +
                                             std::to_string(rec.epsilon) + ") exhausted its budget of " +
                                             std::to_string(config.max_proposals_per_generation) +
                                             " proposals with " + std::to_string(particles.size()) + " of " +
                                             std::to_string(n) + " particles accepted");
                const auto count = static_cast<std::size_t>(std::min<long long>(static_cast<long long>(batch), left));
                auto proposals = evaluate_batch(gen, counter, count, workers);
                for (auto& p : proposals) {
                    if (p.error) std::rethrow_exception(p.error);
                    ++counter;
                    if (p.distance <= rec.epsilon) {
                        particles.push_back(std::move(p.theta));
                        distances.push_back(p.distance);
                        if (particles.size() == n) break;
                    }
                }
            }
            rec.accepted = static_cast<long long>(n);
            rec.proposals = static_cast<long long>(counter);
            rec.simulations = rec.proposals;
            rec.acceptance_rate = static_cast<double>(rec.accepted) / static_cast<double>(rec.proposals);

            std::vector<double> weights = prev ? compute_weights(particles, *prev, *kernel, config.prior)
                                               : std::vector<double>(n, 1.0 / static_cast<double>(n));
            prev.emplace(std::move(particles), std::move(weights), std::move(distances), t);
        } catch (const std::exception& e) {
            throw EngineError(e.what(), result.generations);
        }
        rec.wall_time_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        result.total_simulations += rec.simulations;
        result.generations.push_back(rec);

        if (rec.epsilon <= config.schedule.final_epsilon()) break;
        if (t >= config.max_generations)
            throw EngineError("reached max_generations=" + std::to_string(config.max_generations) +
                                  " before the final threshold",
                              result.generations);
    }
    result.final_population = std::move(*prev);
    return result;
}

std::vector<AcceptancePoint> acceptance_rate_series(const RunResult& result) {
    std::vector<AcceptancePoint> out;
    out.reserve(result.generations.size());
    for (const auto& g : result.generations)
        out.push_back({g.t, g.epsilon, static_cast<double>(g.accepted) / static_cast<double>(g.proposals)});
    return out;
}

}  // namespace abc
