#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "abc/core.hpp"
#include "abc/kernels.hpp"
#include "abc/ode.hpp"

namespace abc {

/// Position of one reading inside a model's data vector.
struct ReadingKey {
    double time = 0.0;
    std::size_t component = 0;
};

/// Black-box simulator with its prior, reference data and optional Fisher information.
/// `simulate` is pure given (theta, stream) and may be called from several threads.
struct GenerativeModel {
    std::string id;
    std::size_t dim_theta = 0;
    std::size_t dim_data = 0;
    std::vector<std::string> parameter_names;
    std::function<Vector(const Particle&, RandomStream&)> simulate;
    BoxPrior default_prior;
    Vector observed_default;
    std::vector<ReadingKey> reading_layout;   // one entry per data element
    FimProvider fim;                          // empty when unavailable

    // experiment defaults
    std::size_t default_population = 800;
    std::vector<double> default_schedule;
};

struct ModelOptions {
    std::optional<double> noise_std;      // observation noise override (gaussian, repressilator, hes1)
    bool banana_derived_fim = false;      // use the FIM derived from the stated likelihood
    std::uint64_t data_seed = 20120417;   // synthetic repressilator data
};

std::vector<std::string> model_ids();

/// Throws std::invalid_argument for an unknown id.
GenerativeModel make_model(const std::string& id, const ModelOptions& options = {});

// ---- toy models ----------------------------------------------------------------------

Vector simulate_ellipsoid(const Particle& theta, RandomStream& rng);
Vector simulate_ring(const Particle& theta, RandomStream& rng);
Vector simulate_banana(const Particle& theta, RandomStream& rng);

double ellipsoid_mean(const Particle& theta);
double ring_mean(const Particle& theta);

/// [[1.5, t2], [t2, 2 t2^2]] with t2 = 0 replaced by 1e-4.
Matrix banana_fim(const Particle& theta);
/// J^T Sigma^{-1} J for the banana likelihood: [[3, 4 t2], [4 t2, 8 t2^2]], same t2 safeguard.
Matrix banana_fim_derived(const Particle& theta);

constexpr double kBananaTheta2Floor = 1e-4;

/// y = theta + N(0, sd^2), scalar.
Vector simulate_gaussian(const Particle& theta, RandomStream& rng, double sd);

// ---- ODE models ----------------------------------------------------------------------

/// Six-equation repressilator, theta = (alpha0, n, beta, alpha); mRNAs observed.
OdeSystem repressilator_system(double noise_std = std::sqrt(5.0));
/// Three-equation Hes1 oscillator, theta = (P0, nu, k1, h); mRNA observed every 30 min.
OdeSystem hes1_system(double noise_std = 0.0);

constexpr double kHes1DegradationRate = 0.03;

Vector simulate_repressilator(const Particle& theta, RandomStream& rng, double noise_std = std::sqrt(5.0));
Vector simulate_hes1(const Particle& theta, RandomStream& rng, double noise_std = 0.0);

/// Readings of `system` plus independent N(0, noise_std^2) noise.
Vector simulate_ode_model(const OdeSystem& system, const Particle& theta, RandomStream& rng);

Vector repressilator_true_theta();
Vector hes1_observed_data();

/// Central-difference Fisher information for Gaussian readings:
/// S[k][j] = d reading_k / d theta_j with step step_rel*|theta_j|; I = S^T S / noise_std^2.
Matrix numeric_fim(const std::function<Vector(const Particle&)>& readings, const Particle& theta,
                   double noise_std, double step_rel = 1e-4);

/// Integrates at rtol 1e-10 / atol 1e-12 so the difference quotients are not dominated by solver error.
Matrix ode_fim_numeric(const OdeSystem& system, const Particle& theta, double step_rel = 1e-4);

// ---- observed-data files -------------------------------------------------------------

/// Reads a CSV with header "time,component,value" and orders the readings by
/// (component, time) into a data vector. Throws std::runtime_error on malformed input.
Vector read_observed_csv(const std::string& path);
void write_observed_csv(const std::string& path, const Vector& data, const std::vector<ReadingKey>& layout);

}  // namespace abc
