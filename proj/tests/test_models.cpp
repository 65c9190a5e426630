#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "abc/models.hpp"
#include "abc/ode.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace abc;
using testutil::to_mat;

namespace {

struct Stats {
    double mean = 0.0;
    double var = 0.0;
};

Stats moments(const std::function<double(RandomStream&)>& draw, int n) {
    RandomStream rng(99, 1);
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = draw(rng);
        s += x;
        s2 += x * x;
    }
    return {s / n, s2 / n - (s / n) * (s / n)};
}

}  // namespace

TEST_CASE("toy model means") {
    CHECK(ellipsoid_mean({8, 4}) == 0.0);
    CHECK(ellipsoid_mean({0, 0}) == 16.0);
    CHECK(ring_mean({0, 0}) == 0.0);
    CHECK(ring_mean({3, 4}) == 25.0);
}

TEST_CASE("toy model noise") {
    const int n = 100000;
    const auto e = moments([](RandomStream& r) { return simulate_ellipsoid({8, 4}, r)[0]; }, n);
    CHECK(std::abs(e.mean) < 0.02);
    CHECK(std::abs(e.var - 1.0) < 0.02);
    const auto ring = moments([](RandomStream& r) { return simulate_ring({3, 4}, r)[0]; }, n);
    CHECK(std::abs(ring.mean - 25.0) < 0.02);
    CHECK(std::abs(ring.var - 0.5) < 0.01);
    const auto b0 = moments([](RandomStream& r) { return simulate_banana({1, 2}, r)[0]; }, n);
    const auto b1 = moments([](RandomStream& r) { return simulate_banana({1, 2}, r)[1]; }, n);
    CHECK(std::abs(b0.mean - 1.0) < 0.02);
    CHECK(std::abs(b1.mean - 5.0) < 0.02);
    CHECK(std::abs(b0.var - 1.0) < 0.02);
    CHECK(std::abs(b1.var - 0.5) < 0.01);
}

TEST_CASE("banana fisher information") {
    const Matrix a = banana_fim({0.0, 1.0});
    CHECK(a(0, 0) == 1.5);
    CHECK(a(0, 1) == 1.0);
    CHECK(a(1, 1) == 2.0);
    const Matrix z = banana_fim({3.0, 0.0});
    CHECK(oracle::det(to_mat(z)) == doctest::Approx(2e-8).epsilon(1e-9));
    const Matrix b = banana_fim({0.0, 2.0});
    CHECK(b(1, 1) == 8.0);
    CHECK(oracle::det(to_mat(b)) == doctest::Approx(8.0));
    const Matrix d = banana_fim_derived({0.0, 2.0});
    CHECK(d(0, 0) == 3.0);
    CHECK(d(0, 1) == 8.0);
    CHECK(d(1, 1) == 32.0);
}

TEST_CASE("derived banana fisher information matches a numeric jacobian") {
    // mean (t1, t1 + t2^2), covariance diag(1, 0.5)
    const Particle th{0.7, -1.3};
    const double h = 1e-6;
    oracle::Mat j{{1.0, 0.0}, {1.0, ((th[1] + h) * (th[1] + h) - (th[1] - h) * (th[1] - h)) / (2 * h)}};
    const oracle::Vec inv_var{1.0, 2.0};
    oracle::Mat info = oracle::zeros(2);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int k = 0; k < 2; ++k) info[a][b] += j[k][a] * inv_var[k] * j[k][b];
    CHECK(oracle::max_abs_diff(to_mat(banana_fim_derived(th)), info) < 1e-8);
}

TEST_CASE("ode integrator analytic cases") {
    const OdeRhs decay = [](double, std::span<const double> y, std::span<double> dy) { dy[0] = -y[0]; };
    const std::vector<double> t1{1.0};
    CHECK(std::abs(integrate(decay, {1.0}, 0.0, t1)[0][0] - std::exp(-1.0)) < 1e-6);

    const OdeRhs still = [](double, std::span<const double>, std::span<double> dy) { dy[0] = 0.0; };
    const std::vector<double> ts{0.0, 1.0, 5.0, 20.0};
    for (const auto& y : integrate(still, {3.5}, 0.0, ts)) CHECK(y[0] == 3.5);

    const OdeRhs rot = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -y[1];
        dy[1] = y[0];
    };
    const std::vector<double> quarter{std::numbers::pi / 2};
    const auto r = integrate(rot, {1.0, 0.0}, 0.0, quarter)[0];
    CHECK(std::abs(r[0]) < 1e-5);
    CHECK(std::abs(r[1] - 1.0) < 1e-5);
}

TEST_CASE("ode integrator reports blow-up") {
    const OdeRhs blow = [](double, std::span<const double> y, std::span<double> dy) { dy[0] = y[0] * y[0]; };
    const std::vector<double> t{2.0};
    CHECK_THROWS_AS(integrate(blow, {1.0}, 0.0, t), IntegrationError);

    OdeSystem sys;
    sys.dim_state = 1;
    sys.rhs = [](double, std::span<const double> y, std::span<const double> th, std::span<double> dy) {
        dy[0] = th[0] * y[0] * y[0];
    };
    sys.initial_state = {1.0};
    sys.observation_times = {2.0};
    sys.observed_components = {0};
    try {
        const std::vector<double> th{1.25};
        integrate_ode(sys, th, sys.observation_times);
        FAIL("expected an integration error");
    } catch (const IntegrationError& e) {
        CHECK(std::string(e.what()).find("1.25") != std::string::npos);
    }
}

TEST_CASE("repressilator") {
    const OdeSystem quiet = repressilator_system(0.0);
    const auto readings = ode_readings(quiet, repressilator_true_theta());
    REQUIRE(readings.size() == 39);
    CHECK(readings[0] == 0.0);
    CHECK(readings[13] == 0.0);
    CHECK(readings[26] == 0.0);

    RandomStream rng(1, 1);
    CHECK(simulate_repressilator(repressilator_true_theta(), rng).size() == 39);
    CHECK_THROWS_AS(simulate_repressilator({1, -2, 5, 1000}, rng), std::invalid_argument);

    // m1 on a dense late grid at tight tolerance: the discrete derivative changes sign
    std::vector<double> grid;
    for (double t = 20.0; t <= 45.2; t += 0.2) grid.push_back(t);
    const auto traj = integrate_ode(quiet, repressilator_true_theta(), grid, {1e-10, 1e-12, 2000000});
    int sign_changes = 0;
    for (std::size_t i = 2; i < traj.size(); ++i) {
        const double a = traj[i - 1][0] - traj[i - 2][0];
        const double b = traj[i][0] - traj[i - 1][0];
        sign_changes += a * b < 0.0;
    }
    CHECK(sign_changes >= 2);

    const auto model = make_model("repressilator");
    CHECK(model.observed_default.size() == 39);
    CHECK(model.dim_theta == 4);
    CHECK(model.default_prior.contains(repressilator_true_theta()));
}

TEST_CASE("hes1") {
    const OdeSystem sys = hes1_system();
    RandomStream rng(2, 2);
    for (int i = 0; i < 5; ++i) {
        const Particle th = make_model("hes1").default_prior.sample(rng);
        CHECK(ode_readings(sys, th)[0] == 2.0);
    }
    const std::vector<double> obs{2, 1.20, 5.90, 4.58, 2.64, 5.38, 6.42, 5.60, 4.48};
    CHECK(hes1_observed_data() == obs);
    CHECK(make_model("hes1").observed_default == obs);

    const std::vector<double> th{1.0, 0.0, 0.0, 2.0};
    const auto traj = integrate_ode(sys, th, sys.observation_times);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double t = sys.observation_times[i];
        CHECK(std::abs(traj[i][1] - 5.0 * std::exp(-kHes1DegradationRate * t)) < 1e-5);
    }
    CHECK(simulate_hes1({1.0, 0.5, 0.1, 3.0}, rng).size() == 9);
    CHECK_THROWS_AS(simulate_hes1({0.0, 0.5, 0.1, 3.0}, rng), std::invalid_argument);
}

TEST_CASE("bio trajectories stay non-negative on prior draws") {
    RandomStream rng(3, 3);
    for (const char* id : {"repressilator", "hes1"}) {
        const auto model = make_model(id);
        const OdeSystem sys = std::string(id) == "hes1" ? hes1_system() : repressilator_system(0.0);
        int violations = 0;
        for (int i = 0; i < 20; ++i) {
            const Particle th = model.default_prior.sample(rng);
            for (const auto& state : integrate_ode(sys, th, sys.observation_times))
                for (double v : state) violations += v < -1e-6;
        }
        CHECK_MESSAGE(violations == 0, id);
    }
}

TEST_CASE("integration tolerance halving") {
    const OdeOptions tight{1e-8, 1e-10, 2000000};
    const auto check = [&](const OdeSystem& sys, const Particle& th) {
        const auto a = ode_readings(sys, th);
        const auto b = ode_readings(sys, th, tight);
        double scale = 0.0;
        for (double v : b) scale = std::max(scale, std::abs(v));
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-4 * std::max(std::abs(b[k]), 1e-2 * scale));
    };
    check(repressilator_system(0.0), repressilator_true_theta());
    check(hes1_system(), {3.0, 1.0, 0.03, 4.0});
}

TEST_CASE("numeric fisher information") {
    const std::vector<oracle::Vec> a{{1.0, 2.0, 0.5}, {-0.5, 0.0, 3.0}, {2.0, 1.0, 1.0}, {0.3, -0.7, 0.2}};
    const auto linear = [&](const Particle& th) {
        Vector y;
        for (const auto& row : a) y.push_back(row[0] * th[0] + row[1] * th[1] + row[2] * th[2]);
        return y;
    };
    const double sd = 0.5;
    oracle::Mat expect = oracle::zeros(3);
    for (const auto& row : a)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) expect[i][j] += row[i] * row[j] / (sd * sd);
    const Matrix got = numeric_fim(linear, {1.0, -2.0, 0.0}, sd);
    CHECK(oracle::max_abs_diff(to_mat(got), expect) < 1e-8);
    CHECK(got.is_symmetric(0.0));
    const Matrix doubled = numeric_fim(linear, {1.0, -2.0, 0.0}, 2 * sd);
    CHECK(oracle::max_abs_diff(to_mat(4.0 * doubled), to_mat(got)) < 1e-10);
    CHECK_THROWS_AS(numeric_fim(linear, {1, 1, 1}, 0.0), std::invalid_argument);
}

TEST_CASE("numeric fisher information converges at second order") {
    const auto smooth = [](const Particle& th) {
        return Vector{std::exp(0.5 * th[0]) * std::sin(th[1]), th[0] * th[0] * th[1], std::cos(th[0] * th[1])};
    };
    const Particle th{0.8, 1.1};
    const auto at = [&](double h) { return to_mat(numeric_fim(smooth, th, 1.0, h)); };
    const double d1 = oracle::max_abs_diff(at(1e-2), at(5e-3));
    const double d2 = oracle::max_abs_diff(at(5e-3), at(2.5e-3));
    CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("ode fisher information") {
    const OdeSystem sys = repressilator_system();
    const Matrix info = ode_fim_numeric(sys, repressilator_true_theta());
    CHECK(info.is_symmetric(0.0));
    for (std::size_t i = 0; i < 4; ++i) CHECK(info(i, i) > 0.0);
    const Matrix noisy = ode_fim_numeric(repressilator_system(2 * std::sqrt(5.0)), repressilator_true_theta());
    CHECK(oracle::max_abs_diff(to_mat(4.0 * noisy), to_mat(info)) <= 1e-12 * info.max_abs());
}

TEST_CASE("simulators are deterministic given a stream") {
    for (const auto& id : model_ids()) {
        const auto m = make_model(id);
        RandomStream seed_rng(5, 5);
        const Particle th = m.default_prior.sample(seed_rng);
        RandomStream a(10, 20), b(10, 20);
        const Vector ya = m.simulate(th, a);
        CHECK(ya == m.simulate(th, b));
        CHECK(ya.size() == m.dim_data);
        CHECK(m.observed_default.size() == m.dim_data);
        CHECK(m.reading_layout.size() == m.dim_data);
    }
    CHECK_THROWS_AS(make_model("nope"), std::invalid_argument);
}

TEST_CASE("observed data csv round trip") {
    const auto m = make_model("repressilator");
    const auto path = (std::filesystem::temp_directory_path() / "abc_observed_roundtrip.csv").string();
    write_observed_csv(path, m.observed_default, m.reading_layout);
    CHECK(read_observed_csv(path) == m.observed_default);
    std::filesystem::remove(path);
}

TEST_CASE("observed data csv errors") {
    const auto path = (std::filesystem::temp_directory_path() / "abc_observed_bad.csv").string();
    {
        std::ofstream out(path);
        out << "time,component,value\n0,0,1.0\n30,zero,2.0\n";
    }
    try {
        read_observed_csv(path);
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
    {
        std::ofstream out(path);
        out << "t,c,v\n";
    }
    CHECK_THROWS_AS(read_observed_csv(path), std::runtime_error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_observed_csv(path), std::runtime_error);
}
