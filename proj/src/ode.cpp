#include "abc/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace abc {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b*
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double error_norm(std::span<const double> err, std::span<const double> y, std::span<const double> y_new,
                  const OdeOptions& o) {
    double s = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double sc = o.atol + o.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
        const double r = err[i] / sc;
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(err.size()));
}

double initial_step(const OdeRhs& rhs, double t0, std::span<const double> y0, std::span<const double> f0,
                    const OdeOptions& o) {
    const std::size_t n = y0.size();
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sc = o.atol + o.rtol * std::abs(y0[i]);
        d0 += (y0[i] / sc) * (y0[i] / sc);
        d1 += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    Vector y1(n), f1(n);
    for (std::size_t i = 0; i < n; ++i) y1[i] = y0[i] + h0 * f0[i];
    rhs(t0 + h0, y1, f1);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sc = o.atol + o.rtol * std::abs(y0[i]);
        d2 += ((f1[i] - f0[i]) / sc) * ((f1[i] - f0[i]) / sc);
    }
    d2 = std::sqrt(d2 / n) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
    return std::min(100.0 * h0, h1);
}

}  // namespace

std::vector<Vector> integrate(const OdeRhs& rhs, Vector y, double t0, std::span<const double> times,
                              const OdeOptions& options) {
    const std::size_t n = y.size();
    std::vector<Vector> out;
    out.reserve(times.size());
    if (times.empty()) return out;
    if (times.front() < t0) throw std::invalid_argument("integrate: output times must be >= t0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1]) throw std::invalid_argument("integrate: output times must be ascending");

    Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n), err(n);
    double t = t0;
    rhs(t, y, k1);
    double h = 0.0;
    long steps = 0;

    for (double t_out : times) {
        while (t < t_out) {
            if (h == 0.0) h = initial_step(rhs, t, y, k1, options);
            const double remaining = t_out - t;
            bool hits_output = false;
            double h_step = h;
            if (h_step >= remaining) {
                h_step = remaining;
                hits_output = true;
            }
            if (h_step < 1e-14 * std::max(1.0, std::abs(t)))
                throw IntegrationError("step size underflow at t=" + std::to_string(t));
            if (++steps > options.max_steps) throw IntegrationError("maximum number of steps exceeded");

            for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h_step * a21 * k1[i];
            rhs(t + c2 * h_step, tmp, k2);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h_step * (a31 * k1[i] + a32 * k2[i]);
            rhs(t + c3 * h_step, tmp, k3);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h_step * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
            rhs(t + c4 * h_step, tmp, k4);
            for (std::size_t i = 0; i < n; ++i)
                tmp[i] = y[i] + h_step * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
            rhs(t + c5 * h_step, tmp, k5);
            for (std::size_t i = 0; i < n; ++i)
                tmp[i] = y[i] + h_step * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
            rhs(t + h_step, tmp, k6);
            for (std::size_t i = 0; i < n; ++i)
                y_new[i] = y[i] + h_step * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
            rhs(t + h_step, y_new, k7);
            for (std::size_t i = 0; i < n; ++i)
                err[i] = h_step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

            double en = error_norm(err, y, y_new, options);
            if (!std::isfinite(en)) {
                h = 0.25 * h_step;
                continue;
            }
            if (en <= 1.0) {
                t = hits_output ? t_out : t + h_step;
                y.swap(y_new);
                k1.swap(k7);
                const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
                // keep the unclipped step when this one was shortened to land on t_out
                h = hits_output ? std::max(h, h_step * factor) : h_step * factor;
            } else {
                h = h_step * std::clamp(0.9 * std::pow(en, -0.2), 0.1, 1.0);
            }
        }
        for (double v : y)
            if (!std::isfinite(v)) throw IntegrationError("non-finite state at t=" + std::to_string(t));
        out.push_back(y);
    }
    return out;
}

std::vector<Vector> integrate_ode(const OdeSystem& system, std::span<const double> theta,
                                  std::span<const double> t_grid, const OdeOptions& options) {
    Vector params(theta.begin(), theta.end());
    OdeRhs rhs = [&system, &params](double t, std::span<const double> y, std::span<double> dydt) {
        system.rhs(t, y, params, dydt);
    };
    try {
        return integrate(rhs, system.initial_state, 0.0, t_grid, options);
    } catch (const IntegrationError& e) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "ODE integration failed for theta=(";
        for (std::size_t j = 0; j < params.size(); ++j) msg << (j ? "," : "") << params[j];
        msg << "): " << e.what();
        throw IntegrationError(msg.str());
    }
}

Vector ode_readings(const OdeSystem& system, std::span<const double> theta, const OdeOptions& options) {
    const auto traj = integrate_ode(system, theta, system.observation_times, options);
    Vector out;
    out.reserve(system.observed_components.size() * traj.size());
    for (std::size_t c : system.observed_components)
        for (const auto& state : traj) out.push_back(state[c]);
    return out;
}

}  // namespace abc
