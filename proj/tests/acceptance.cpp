// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "abc/experiment.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace abc;
namespace fs = std::filesystem;
using testutil::from_mat;
using testutil::to_mat;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream ss;
    ss.precision(digits);
    ss << v;
    return ss.str();
}

const std::vector<KernelSpec> kAllKernels = {
    {KernelKind::Uniform, 0},      {KernelKind::ComponentNormalBeaumont, 0}, {KernelKind::ComponentNormalRefined, 0},
    {KernelKind::MvnGlobal, 0},    {KernelKind::MvnKnn, 50},                 {KernelKind::MvnOlcm, 0},
    {KernelKind::FimGlobalDet, 0}, {KernelKind::FimKnnDet, 0},
};

struct PosteriorMoments {
    Vector mean;
    Vector sd;
};

PosteriorMoments moments(const WeightedPopulation& pop) {
    const Vector m = weighted_mean(pop.particles(), pop.weights());
    const Matrix c = weighted_covariance(pop.particles(), pop.weights(), m);
    Vector sd(m.size());
    for (std::size_t j = 0; j < m.size(); ++j) sd[j] = std::sqrt(c(j, j));
    return {m, sd};
}

ExperimentConfig experiment(const std::string& model_id, std::size_t n, std::vector<double> schedule,
                            std::vector<KernelSpec> kernels, int repeats, std::uint64_t seed) {
    const GenerativeModel model = make_model(model_id);
    ExperimentConfig c;
    c.run.model_id = model_id;
    c.run.prior = model.default_prior;
    c.run.kernel = kernels.front();
    c.run.schedule = EpsilonSchedule::fixed(schedule.empty() ? model.default_schedule : std::move(schedule));
    c.run.population_size = n;
    c.run.seed = seed;
    c.run.workers = 1;
    c.observed = model.observed_default;
    c.kernels = std::move(kernels);
    c.repeats = repeats;
    return c;
}

const BenchCell* find_cell(const std::vector<BenchCell>& cells, KernelSpec k, int repeat) {
    for (const auto& c : cells)
        if (c.kernel == k && c.repeat == repeat) return &c;
    return nullptr;
}

double tail_rate(const BenchCell& c, std::size_t last) {
    double s = 0.0;
    const auto& g = c.generations;
    for (std::size_t i = g.size() - last; i < g.size(); ++i) s += g[i].acceptance_rate;
    return s / static_cast<double>(last);
}

double mean_final_rate(const std::vector<BenchCell>& cells, KernelSpec k) {
    double s = 0.0;
    int n = 0;
    for (const auto& c : cells)
        if (c.kernel == k && c.ok) {
            s += c.generations.back().acceptance_rate;
            ++n;
        }
    return n ? s / n : std::nan("");
}

bool all_ok(const std::vector<BenchCell>& cells, std::string& detail) {
    for (const auto& c : cells)
        if (!c.ok) {
            detail = kernel_name(c.kernel) + " repeat " + std::to_string(c.repeat) + " failed: " + c.error;
            return false;
        }
    return true;
}

// 1: every kernel recovers the quadrature posterior of the identity-likelihood model.
Outcome oracle_posterior() {
    const auto target = oracle::gaussian_abc_posterior(0.3, 0.05, 0.1, -1.0, 1.0);
    const GenerativeModel model = make_model("gaussian");
    bool pass = true;
    std::string detail = "oracle mean " + fmt(target.mean) + " sd " + fmt(target.sd) + ";";
    for (const auto& k : kAllKernels) {
        ExperimentConfig c = experiment("gaussian", 500, {1, 0.5, 0.2, 0.1, 0.05}, {k}, 1, 101);
        const auto start = std::chrono::steady_clock::now();
        try {
            const RunResult r = run_abc_smc(c.run, model, c.observed);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            const auto m = moments(r.final_population);
            const bool ok = std::abs(m.mean[0] - target.mean) <= 0.02 &&
                            std::abs(m.sd[0] - target.sd) <= 0.3 * target.sd && secs < 30.0;
            pass = pass && ok;
            detail += " " + kernel_name(k) + " " + fmt(m.mean[0]) + "/" + fmt(m.sd[0]) + (ok ? "" : "(!)");
        } catch (const std::exception& e) {
            pass = false;
            detail += " " + kernel_name(k) + " error: " + e.what();
        }
    }
    return {pass, detail};
}

// 2: closed-form identities.
Outcome identities() {
    std::mt19937_64 gen(2024);
    double worst_a = 0.0, worst_b = 0.0, worst_c = 0.0, worst_det = 0.0, worst_inv = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
        const auto s = oracle::random_set(gen, 20, 3);
        const WeightedPopulation prev(std::vector<Particle>(s.points.begin(), s.points.end()), s.weights, s.distances, 1);
        const double eps_all = 1e9;
        const auto m = oracle::mean(s.points, s.weights);
        const auto cov = oracle::cov_about(s.points, s.weights, m);
        const double scale = std::max(1.0, oracle::max_abs(cov));

        const Vector v = adapt_component_normal_refined(prev, eps_all);
        for (std::size_t j = 0; j < 3; ++j) worst_a = std::max(worst_a, std::abs(v[j] - 2.0 * cov[j][j]) / scale);

        const Matrix sigma = optimal_global_covariance(prev, build_tilde_population(prev, eps_all));
        auto twice = cov;
        for (auto& row : twice)
            for (double& x : row) x *= 2.0;
        worst_b = std::max(worst_b, oracle::max_abs_diff(to_mat(sigma), twice) / scale);

        const auto tilde = build_tilde_population(prev, 5.0);
        if (!tilde.empty()) {
            const std::vector<oracle::Vec> tp(tilde.particles.begin(), tilde.particles.end());
            for (std::size_t i = 0; i < prev.size(); ++i) {
                const auto expect = oracle::bias_variance(tp, tilde.weights, s.points[i]);
                worst_c = std::max(worst_c, oracle::max_abs_diff(to_mat(olcm_covariance(tilde, prev.particle(i))), expect) /
                                                std::max(1.0, oracle::max_abs(expect)));
            }
        }

        const auto fim = oracle::random_spd(gen, 3);
        const FimProvider provider = [&](const Particle&) { return from_mat(fim); };
        const auto covs = adapt_fim(prev, provider, {FimNormalization::Reference::GlobalDet, 0}, 5.0);
        const double ref = std::exp(adapt_mvn_global(prev, 5.0).log_det());
        for (const auto& c : covs) worst_det = std::max(worst_det, std::abs(oracle::det(to_mat(c.entries())) - ref) / ref);
        const Matrix base = fim_scaled_covariance(from_mat(fim), std::log(ref));
        for (double k : {0.1, 7.0, 1000.0})
            worst_inv = std::max(worst_inv, oracle::max_abs_diff(to_mat(fim_scaled_covariance(k * from_mat(fim), std::log(ref))),
                                                                 to_mat(base)));
    }
    const bool pass = worst_a <= 1e-12 && worst_b <= 1e-12 && worst_c <= 1e-12 && worst_det <= 1e-8 && worst_inv <= 1e-10;
    return {pass, "refined " + fmt(worst_a, 3) + ", global " + fmt(worst_b, 3) + ", olcm " + fmt(worst_c, 3) +
                      ", fim det " + fmt(worst_det, 3) + ", fim scale " + fmt(worst_inv, 3)};
}

// 3: ellipsoid, multivariate kernels vs component-wise normal.
Outcome ellipsoid_ordering() {
    const KernelSpec cn{KernelKind::ComponentNormalRefined, 0}, olcm{KernelKind::MvnOlcm, 0}, knn{KernelKind::MvnKnn, 50};
    const ExperimentConfig c = experiment("ellipsoid", 400, {}, {cn, olcm, knn}, 5, 300);
    const auto cells = run_bench(c, make_model("ellipsoid"));
    std::string detail;
    if (!all_ok(cells, detail)) return {false, detail};
    int wins = 0;
    for (int r = 0; r < 5; ++r) {
        const double base = tail_rate(*find_cell(cells, cn, r), 3);
        const double a = tail_rate(*find_cell(cells, olcm, r), 3);
        const double b = tail_rate(*find_cell(cells, knn, r), 3);
        const bool ok = a >= 1.5 * base && b >= 1.5 * base;
        wins += ok;
        detail += " r" + std::to_string(r) + ": cn " + fmt(base, 3) + " olcm " + fmt(a, 3) + " knn50 " + fmt(b, 3) + ";";
    }
    return {wins >= 4, std::to_string(wins) + "/5 repeats;" + detail};
}

// 4: ring, local kernel beats global; global close to component-wise.
Outcome ring_behaviour() {
    const KernelSpec cn{KernelKind::ComponentNormalRefined, 0}, mvn{KernelKind::MvnGlobal, 0}, knn{KernelKind::MvnKnn, 50};
    const ExperimentConfig c = experiment("ring", 400, {}, {cn, mvn, knn}, 5, 400);
    const auto cells = run_bench(c, make_model("ring"));
    std::string detail;
    if (!all_ok(cells, detail)) return {false, detail};
    const double rc = mean_final_rate(cells, cn), rm = mean_final_rate(cells, mvn), rk = mean_final_rate(cells, knn);
    const bool pass = rk > rm && std::abs(rm / rc - 1.0) <= 0.3;
    return {pass, "final rate cn " + fmt(rc, 3) + " mvn " + fmt(rm, 3) + " knn50 " + fmt(rk, 3) + ", mvn/cn " + fmt(rm / rc, 3)};
}

// 5: banana, acceptance decreases with the neighbourhood size.
Outcome banana_sweep() {
    std::vector<KernelSpec> ks;
    for (std::size_t m : {50, 100, 200, 400}) ks.push_back({KernelKind::MvnKnn, m});
    const ExperimentConfig c = experiment("banana", 400, {}, ks, 5, 500);
    const auto cells = run_bench(c, make_model("banana"));
    std::string detail;
    if (!all_ok(cells, detail)) return {false, detail};
    std::vector<double> rates;
    for (const auto& k : ks) {
        rates.push_back(mean_final_rate(cells, k));
        detail += " M=" + std::to_string(k.neighbours) + " " + fmt(rates.back(), 3);
    }
    int violations = 0;
    for (std::size_t i = 1; i < rates.size(); ++i) violations += rates[i] > rates[i - 1];
    return {violations <= 1, std::to_string(violations) + " increases;" + detail};
}

// 6: the adapted refined variance maximizes the empirical Q over a grid.
Outcome q_optimality() {
    std::mt19937_64 gen(606);
    std::uniform_int_distribution<int> size(5, 60);
    std::normal_distribution<double> loc(0.0, 5.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int wins = 0;
    const int cases = 50;
    for (int c = 0; c < cases; ++c) {
        const int n = size(gen);
        const double centre = loc(gen), spread = 0.1 + 4.0 * unit(gen);
        std::vector<Particle> pts;
        std::vector<double> w, d;
        for (int i = 0; i < n; ++i) {
            pts.push_back({centre + spread * loc(gen) / 5.0});
            w.push_back(0.05 + unit(gen));
            d.push_back(unit(gen));
        }
        const WeightedPopulation prev(pts, w, d, 1);
        const double eps = std::max(0.2 + 0.8 * unit(gen), *std::min_element(d.begin(), d.end()));
        const auto tilde = build_tilde_population(prev, eps);
        const double v = adapt_component_normal_refined(prev, eps)[0];
        auto q = [&](double var) {
            return estimate_q(KernelState::component_normal(KernelKind::ComponentNormalRefined, {var}), prev, tilde);
        };
        const double best = q(v);
        bool ok = true;
        for (int k = -3; k <= 3; ++k)
            if (k != 0 && q(std::ldexp(v, k)) > best) ok = false;
        wins += ok;
    }
    return {wins >= 48, std::to_string(wins) + "/" + std::to_string(cases) + " populations"};
}

// 7: repressilator, global multivariate kernel needs fewer simulations than uniform.
Outcome repressilator_counts() {
    const KernelSpec mvn{KernelKind::MvnGlobal, 0}, uni{KernelKind::Uniform, 0};
    const ExperimentConfig c = experiment("repressilator", 150, {160, 150, 140, 130, 120, 100, 80}, {mvn, uni}, 3, 700);
    const auto start = std::chrono::steady_clock::now();
    const auto cells = run_bench(c, make_model("repressilator"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string detail;
    if (!all_ok(cells, detail)) return {false, detail};
    const auto summary = summarize_bench({mvn, uni}, cells);
    const double a = summary.kernels[0].mean_total_simulations, b = summary.kernels[1].mean_total_simulations;
    return {a < b, "mean simulations mvn " + fmt(a, 6) + " uniform " + fmt(b, 6) + " (" + fmt(secs, 3) + " s)"};
}

// 8: Hes1 posterior does not depend on the kernel.
Outcome hes1_stability() {
    const GenerativeModel model = make_model("hes1");
    std::vector<PosteriorMoments> m;
    for (const KernelSpec k : {KernelSpec{KernelKind::ComponentNormalRefined, 0}, KernelSpec{KernelKind::MvnOlcm, 0}}) {
        const ExperimentConfig c = experiment("hes1", 150, {20, 13, 10, 6, 5}, {k}, 1, 800);
        try {
            m.push_back(moments(run_abc_smc(c.run, model, c.observed).final_population));
        } catch (const std::exception& e) {
            return {false, kernel_name(k) + " failed: " + e.what()};
        }
    }
    bool pass = true;
    std::string detail;
    for (std::size_t j = 0; j < model.dim_theta; ++j) {
        const double pooled = std::sqrt(0.5 * (m[0].sd[j] * m[0].sd[j] + m[1].sd[j] * m[1].sd[j]));
        const double gap = std::abs(m[0].mean[j] - m[1].mean[j]);
        pass = pass && gap <= 2.0 * pooled;
        detail += " " + model.parameter_names[j] + " " + fmt(m[0].mean[j], 3) + " vs " + fmt(m[1].mean[j], 3) +
                  " (" + fmt(gap / pooled, 2) + " sd)";
    }
    return {pass, detail};
}

// 9: repeated run gives a byte-identical posterior file.
Outcome reproducibility() {
    const fs::path dir = fs::temp_directory_path() / "abc_acceptance_repro";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string config = (fs::path(ABC_SOURCE_DIR) / "configs" / "gaussian.json").string();
    std::ostringstream out, err;
    for (const char* sub : {"a", "b"})
        if (cmd_run(config, {std::nullopt, 1u, (dir / sub).string()}, out, err) != 0) return {false, err.str()};
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string a = slurp(dir / "a" / "posterior.csv"), b = slurp(dir / "b" / "posterior.csv");
    return {!a.empty() && a == b, std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 oracle posterior, every kernel", oracle_posterior},
        {"2 closed-form identities", identities},
        {"3 ellipsoid multivariate vs component-wise", ellipsoid_ordering},
        {"4 ring local vs global", ring_behaviour},
        {"5 banana neighbourhood sweep", banana_sweep},
        {"6 Q optimality of the refined variance", q_optimality},
        {"7 repressilator simulation counts", repressilator_counts},
        {"8 Hes1 posterior stability", hes1_stability},
        {"9 byte-identical repeat run", reproducibility},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::printf("%s  %s [%.1fs] %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
