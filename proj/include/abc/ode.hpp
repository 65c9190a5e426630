#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "abc/mathkit.hpp"

namespace abc {

/// dy/dt = f(t, y); writes into `dydt`.
using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

struct OdeOptions {
    double rtol = 1e-6;
    double atol = 1e-8;
    long max_steps = 200000;
};

class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dormand-Prince 5(4) with adaptive step size. Returns the state at every requested time
/// (ascending, all >= t0). Throws IntegrationError on step-size underflow, non-finite
/// states or when max_steps is exhausted.
std::vector<Vector> integrate(const OdeRhs& rhs, Vector y0, double t0, std::span<const double> times,
                              const OdeOptions& options = {});

/// Parameterized ODE model observed at fixed times through a subset of its state.
struct OdeSystem {
    std::size_t dim_state = 0;
    std::function<void(double t, std::span<const double> y, std::span<const double> theta, std::span<double> dydt)> rhs;
    Vector initial_state;
    std::vector<double> observation_times;
    std::vector<std::size_t> observed_components;
    double noise_std = 0.0;
};

/// Full state trajectory of `system` at the times in `t_grid` (integration starts at t=0).
/// Integration failures are rethrown with the offending parameter vector in the message.
std::vector<Vector> integrate_ode(const OdeSystem& system, std::span<const double> theta,
                                  std::span<const double> t_grid, const OdeOptions& options = {});

/// Noiseless readings: observed components at observation times, grouped by component
/// (all times of the first observed component, then the second, ...).
Vector ode_readings(const OdeSystem& system, std::span<const double> theta, const OdeOptions& options = {});

}  // namespace abc
