#include "abc/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace abc {

namespace {

const std::vector<double> kToySchedule = {160, 120, 80, 60, 40, 30, 20, 15, 10, 8, 6, 4, 3, 2, 1};
const std::vector<double> kRepressilatorSchedule = {160, 150, 140, 130, 120, 100, 80, 50, 40, 37, 35};
const std::vector<double> kHes1Schedule = {20, 13, 10, 6, 5, 4, 3, 2.8, 2.7, 2.6, 2.5};
const std::vector<double> kRepressilatorTimes = {0.0,  0.6,  4.2,  6.2,  8.6,  13.4, 16.0,
                                                 21.4, 27.6, 34.4, 39.8, 40.6, 45.2};

void check_dim(const Particle& theta, std::size_t d, const char* model) {
    if (theta.size() != d)
        throw std::invalid_argument(std::string(model) + ": expected " + std::to_string(d) + " parameters, got " +
                                    std::to_string(theta.size()));
}

std::vector<ReadingKey> layout_for(const OdeSystem& sys) {
    std::vector<ReadingKey> keys;
    for (std::size_t c = 0; c < sys.observed_components.size(); ++c)
        for (double t : sys.observation_times) keys.push_back({t, c});
    return keys;
}

double banana_theta2(const Particle& theta) {
    return theta[1] == 0.0 ? kBananaTheta2Floor : theta[1];
}

GenerativeModel toy_model(std::string id, std::size_t dim_data,
                          std::function<Vector(const Particle&, RandomStream&)> sim) {
    GenerativeModel m;
    m.id = std::move(id);
    m.dim_theta = 2;
    m.dim_data = dim_data;
    m.parameter_names = {"theta1", "theta2"};
    m.simulate = std::move(sim);
    m.default_prior = BoxPrior({-50.0, -50.0}, {50.0, 50.0});
    m.observed_default = Vector(dim_data, 0.0);
    for (std::size_t c = 0; c < dim_data; ++c) m.reading_layout.push_back({0.0, c});
    m.default_population = 800;
    m.default_schedule = kToySchedule;
    return m;
}

GenerativeModel ode_model(std::string id, OdeSystem sys, std::vector<std::string> names, BoxPrior prior) {
    GenerativeModel m;
    m.id = std::move(id);
    m.dim_theta = names.size();
    m.parameter_names = std::move(names);
    m.dim_data = sys.observed_components.size() * sys.observation_times.size();
    m.reading_layout = layout_for(sys);
    m.default_prior = std::move(prior);
    // the FIM only enters the kernels through a determinant-normalized inverse, so any
    // positive noise scale gives the same kernel; a noiseless simulator uses unit scale
    OdeSystem fim_sys = sys;
    if (!(fim_sys.noise_std > 0.0)) fim_sys.noise_std = 1.0;
    m.fim = [fim_sys](const Particle& theta) { return ode_fim_numeric(fim_sys, theta); };
    m.simulate = [sys = std::move(sys)](const Particle& theta, RandomStream& rng) {
        return simulate_ode_model(sys, theta, rng);
    };
    return m;
}

}  // namespace

std::vector<std::string> model_ids() { return {"ellipsoid", "ring", "banana", "gaussian", "repressilator", "hes1"}; }

GenerativeModel make_model(const std::string& id, const ModelOptions& options) {
    if (id == "ellipsoid") return toy_model(id, 1, simulate_ellipsoid);
    if (id == "ring") return toy_model(id, 1, simulate_ring);
    if (id == "banana") {
        GenerativeModel m = toy_model(id, 2, simulate_banana);
        if (options.banana_derived_fim)
            m.fim = banana_fim_derived;
        else
            m.fim = banana_fim;
        return m;
    }
    if (id == "gaussian") {
        const double sd = options.noise_std.value_or(0.1);
        if (!(sd > 0.0)) throw std::invalid_argument("gaussian: noise_std must be positive");
        GenerativeModel m;
        m.id = id;
        m.dim_theta = 1;
        m.dim_data = 1;
        m.parameter_names = {"theta"};
        m.simulate = [sd](const Particle& theta, RandomStream& rng) { return simulate_gaussian(theta, rng, sd); };
        m.default_prior = BoxPrior({-1.0}, {1.0});
        m.observed_default = {0.3};
        m.reading_layout = {{0.0, 0}};
        m.fim = [sd](const Particle&) { return (1.0 / (sd * sd)) * Matrix::identity(1); };
        m.default_population = 500;
        m.default_schedule = {1.0, 0.5, 0.2, 0.1, 0.05};
        return m;
    }
    if (id == "repressilator") {
        const double sd = options.noise_std.value_or(std::sqrt(5.0));
        if (!(sd >= 0.0)) throw std::invalid_argument("repressilator: noise_std must be non-negative");
        GenerativeModel m = ode_model(id, repressilator_system(sd), {"alpha0", "n", "beta", "alpha"},
                                      BoxPrior({0.1, 0.5, 0.5, 100.0}, {10.0, 5.0, 20.0, 5000.0}));
        // observed data always carry the variance-5 measurement noise of the protocol
        RandomStream data_rng(options.data_seed, 0);
        m.observed_default = simulate_repressilator(repressilator_true_theta(), data_rng, std::sqrt(5.0));
        m.default_population = 1000;
        m.default_schedule = kRepressilatorSchedule;
        return m;
    }
    if (id == "hes1") {
        const double sd = options.noise_std.value_or(0.0);
        if (!(sd >= 0.0)) throw std::invalid_argument("hes1: noise_std must be non-negative");
        GenerativeModel m = ode_model(id, hes1_system(sd), {"P0", "nu", "k1", "h"},
                                      BoxPrior({0.1, 0.01, 0.001, 1.0}, {10.0, 5.0, 1.0, 10.0}));
        m.observed_default = hes1_observed_data();
        m.default_population = 1000;
        m.default_schedule = kHes1Schedule;
        return m;
    }
    throw std::invalid_argument("unknown model id '" + id + "'");
}

double ellipsoid_mean(const Particle& theta) {
    const double a = theta[0] - 2.0 * theta[1];
    const double b = theta[1] - 4.0;
    return a * a + b * b;
}

double ring_mean(const Particle& theta) { return theta[0] * theta[0] + theta[1] * theta[1]; }

Vector simulate_ellipsoid(const Particle& theta, RandomStream& rng) {
    check_dim(theta, 2, "ellipsoid");
    return {rng.normal(ellipsoid_mean(theta), 1.0)};
}

Vector simulate_ring(const Particle& theta, RandomStream& rng) {
    check_dim(theta, 2, "ring");
    return {rng.normal(ring_mean(theta), std::sqrt(0.5))};
}

Vector simulate_banana(const Particle& theta, RandomStream& rng) {
    check_dim(theta, 2, "banana");
    const double x1 = rng.normal(theta[0], 1.0);
    const double x2 = rng.normal(theta[0] + theta[1] * theta[1], std::sqrt(0.5));
    return {x1, x2};
}

Matrix banana_fim(const Particle& theta) {
    check_dim(theta, 2, "banana");
    const double t2 = banana_theta2(theta);
    Matrix m(2);
    m(0, 0) = 1.5;
    m(0, 1) = m(1, 0) = t2;
    m(1, 1) = 2.0 * t2 * t2;
    return m;
}

Matrix banana_fim_derived(const Particle& theta) {
    check_dim(theta, 2, "banana");
    const double t2 = banana_theta2(theta);
    Matrix m(2);
    m(0, 0) = 3.0;
    m(0, 1) = m(1, 0) = 4.0 * t2;
    m(1, 1) = 8.0 * t2 * t2;
    return m;
}

Vector simulate_gaussian(const Particle& theta, RandomStream& rng, double sd) {
    check_dim(theta, 1, "gaussian");
    return {rng.normal(theta[0], sd)};
}

OdeSystem repressilator_system(double noise_std) {
    OdeSystem s;
    s.dim_state = 6;
    s.rhs = [](double, std::span<const double> y, std::span<const double> th, std::span<double> dy) {
        const double alpha0 = th[0], n = th[1], beta = th[2], alpha = th[3];
        const double m1 = y[0], p1 = y[1], m2 = y[2], p2 = y[3], m3 = y[4], p3 = y[5];
        auto repress = [&](double p) { return alpha / (1.0 + std::pow(std::max(p, 0.0), n)); };
        dy[0] = -m1 + repress(p3) + alpha0;
        dy[1] = -beta * (p1 - m1);
        dy[2] = -m2 + repress(p1) + alpha0;
        dy[3] = -beta * (p2 - m2);
        dy[4] = -m3 + repress(p2) + alpha0;
        dy[5] = -beta * (p3 - m3);
    };
    s.initial_state = {0.0, 2.0, 0.0, 1.0, 0.0, 3.0};
    s.observation_times = kRepressilatorTimes;
    s.observed_components = {0, 2, 4};
    s.noise_std = noise_std;
    return s;
}

OdeSystem hes1_system(double noise_std) {
    OdeSystem s;
    s.dim_state = 3;
    s.rhs = [](double, std::span<const double> y, std::span<const double> th, std::span<double> dy) {
        const double p0 = th[0], nu = th[1], k1 = th[2], h = th[3];
        const double m = y[0], p1 = y[1], p2 = y[2];
        constexpr double kdeg = kHes1DegradationRate;
        dy[0] = -kdeg * m + 1.0 / (1.0 + std::pow(std::max(p2, 0.0) / p0, h));
        dy[1] = -kdeg * p1 + nu * m - k1 * p1;
        dy[2] = -kdeg * p2 + k1 * p1;
    };
    s.initial_state = {2.0, 5.0, 3.0};
    for (int k = 0; k < 9; ++k) s.observation_times.push_back(30.0 * k);
    s.observed_components = {0};
    s.noise_std = noise_std;
    return s;
}

Vector simulate_ode_model(const OdeSystem& system, const Particle& theta, RandomStream& rng) {
    Vector y = ode_readings(system, theta);
    if (system.noise_std > 0.0)
        for (double& v : y) v += rng.normal(0.0, system.noise_std);
    return y;
}

Vector simulate_repressilator(const Particle& theta, RandomStream& rng, double noise_std) {
    check_dim(theta, 4, "repressilator");
    if (!(theta[1] > 0.0 && theta[2] > 0.0 && theta[3] >= 0.0 && theta[0] >= 0.0))
        throw std::invalid_argument("repressilator: requires n > 0, beta > 0, alpha >= 0, alpha0 >= 0");
    return simulate_ode_model(repressilator_system(noise_std), theta, rng);
}

Vector simulate_hes1(const Particle& theta, RandomStream& rng, double noise_std) {
    check_dim(theta, 4, "hes1");
    if (!(theta[0] > 0.0 && theta[1] >= 0.0 && theta[2] >= 0.0 && theta[3] > 0.0))
        throw std::invalid_argument("hes1: requires P0 > 0, nu >= 0, k1 >= 0, h > 0");
    return simulate_ode_model(hes1_system(noise_std), theta, rng);
}

Vector repressilator_true_theta() { return {1.0, 2.0, 5.0, 1000.0}; }

Vector hes1_observed_data() { return {2.0, 1.20, 5.90, 4.58, 2.64, 5.38, 6.42, 5.60, 4.48}; }

Matrix numeric_fim(const std::function<Vector(const Particle&)>& readings, const Particle& theta,
                   double noise_std, double step_rel) {
    if (!(noise_std > 0.0)) throw std::invalid_argument("numeric_fim: noise_std must be positive");
    const std::size_t d = theta.size();
    std::vector<Vector> sens(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double h = step_rel * (theta[j] != 0.0 ? std::abs(theta[j]) : 1.0);
        Particle up = theta, down = theta;
        up[j] += h;
        down[j] -= h;
        const Vector yu = readings(up);
        const Vector yd = readings(down);
        sens[j].resize(yu.size());
        for (std::size_t k = 0; k < yu.size(); ++k) sens[j][k] = (yu[k] - yd[k]) / (2.0 * h);
    }
    Matrix info(d);
    const double inv_var = 1.0 / (noise_std * noise_std);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            double s = 0.0;
            for (std::size_t k = 0; k < sens[a].size(); ++k) s += sens[a][k] * sens[b][k];
            info(a, b) = info(b, a) = s * inv_var;
        }
    return info;
}

Matrix ode_fim_numeric(const OdeSystem& system, const Particle& theta, double step_rel) {
    const OdeOptions tight{1e-10, 1e-12, 2000000};
    return numeric_fim([&](const Particle& th) { return ode_readings(system, th, tight); }, theta, system.noise_std,
                       step_rel);
}

Vector read_observed_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open observed-data file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "time,component,value")
        throw std::runtime_error(path + ":1: expected header 'time,component,value'");
    std::vector<std::tuple<long, double, double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f_time, f_comp, f_value;
        if (!std::getline(ss, f_time, ',') || !std::getline(ss, f_comp, ',') || !std::getline(ss, f_value))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected three fields");
        try {
            std::size_t used = 0;
            const long comp = std::stol(f_comp, &used);
            if (comp < 0) throw std::invalid_argument("component");
            rows.emplace_back(comp, std::stod(f_time), std::stod(f_value));
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    if (rows.empty()) throw std::runtime_error(path + ": no readings");
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    Vector data;
    for (const auto& r : rows) data.push_back(std::get<2>(r));
    return data;
}

void write_observed_csv(const std::string& path, const Vector& data, const std::vector<ReadingKey>& layout) {
    if (data.size() != layout.size()) throw std::invalid_argument("write_observed_csv: layout length mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.precision(17);
    out << "time,component,value\n";
    for (std::size_t i = 0; i < data.size(); ++i)
        out << layout[i].time << ',' << layout[i].component << ',' << data[i] << '\n';
}

}  // namespace abc
