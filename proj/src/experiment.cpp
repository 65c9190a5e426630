#include "abc/experiment.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace abc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "description", "model",      "model_options", "kernel",      "kernels",
    "population_size", "schedule", "seed",        "max_proposals_per_generation",
    "max_generations", "workers",  "prior",       "observed_data", "repeats",
    "output_dir",
};

class Collector {
public:
    void add(std::string path, std::string message) { diags.push_back({std::move(path), std::move(message)}); }
    bool empty() const { return diags.empty(); }
    std::vector<Diagnostic> diags;
};

std::optional<long long> read_int(const json& doc, const char* key, long long min_value, Collector& c) {
    if (!doc.contains(key)) return std::nullopt;
    const json& v = doc.at(key);
    if (!v.is_number_integer()) {
        c.add(std::string("/") + key, "must be an integer");
        return std::nullopt;
    }
    const long long x = v.get<long long>();
    if (x < min_value) {
        c.add(std::string("/") + key, "must be >= " + std::to_string(min_value));
        return std::nullopt;
    }
    return x;
}

std::optional<Vector> read_vector(const json& v, const std::string& path, Collector& c) {
    if (!v.is_array()) {
        c.add(path, "must be an array of numbers");
        return std::nullopt;
    }
    Vector out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) {
            c.add(path + "/" + std::to_string(i), "must be a number");
            return std::nullopt;
        }
        out.push_back(v[i].get<double>());
    }
    return out;
}

std::optional<EpsilonSchedule> read_schedule(const json& v, Collector& c) {
    auto fixed_from = [&](const json& arr, const std::string& path) -> std::optional<EpsilonSchedule> {
        auto eps = read_vector(arr, path, c);
        if (!eps) return std::nullopt;
        if (eps->empty()) {
            c.add(path, "schedule must not be empty");
            return std::nullopt;
        }
        for (std::size_t i = 0; i < eps->size(); ++i) {
            if (!((*eps)[i] > 0.0)) {
                c.add(path + "/" + std::to_string(i), "thresholds must be positive");
                return std::nullopt;
            }
            if (i > 0 && !((*eps)[i] < (*eps)[i - 1])) {
                c.add(path + "/" + std::to_string(i), "schedule must be strictly decreasing");
                return std::nullopt;
            }
        }
        return EpsilonSchedule::fixed(*eps);
    };
    if (v.is_array()) return fixed_from(v, "/schedule");
    if (!v.is_object()) {
        c.add("/schedule", "must be an array of thresholds or an object");
        return std::nullopt;
    }
    const std::string type = v.value("type", std::string("fixed"));
    if (type == "fixed") {
        if (!v.contains("epsilons")) {
            c.add("/schedule/epsilons", "required for a fixed schedule");
            return std::nullopt;
        }
        return fixed_from(v.at("epsilons"), "/schedule/epsilons");
    }
    if (type != "adaptive") {
        c.add("/schedule/type", "must be 'fixed' or 'adaptive'");
        return std::nullopt;
    }
    bool good = true;
    auto num = [&](const char* key) -> double {
        if (!v.contains(key) || !v.at(key).is_number()) {
            c.add(std::string("/schedule/") + key, "required number");
            good = false;
            return 0.0;
        }
        return v.at(key).get<double>();
    };
    const double alpha = num("alpha");
    const double eps_final = num("epsilon_final");
    const double eps_initial = num("epsilon_initial");
    if (!good) return std::nullopt;
    if (!(alpha > 0.0 && alpha < 1.0)) {
        c.add("/schedule/alpha", "alpha must lie in (0,1)");
        return std::nullopt;
    }
    if (!(eps_final >= 0.0)) {
        c.add("/schedule/epsilon_final", "must be >= 0");
        return std::nullopt;
    }
    if (!(eps_initial >= eps_final)) {
        c.add("/schedule/epsilon_initial", "must be >= epsilon_final");
        return std::nullopt;
    }
    return EpsilonSchedule::adaptive(alpha, eps_final, eps_initial);
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string s;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) s += ',';
        s += fields[i];
    }
    s += '\n';
    return s;
}

void print_diagnostics(const std::vector<Diagnostic>& diags, const std::string& source, std::ostream& err) {
    for (const auto& d : diags) err << source << ": " << (d.path.empty() ? "/" : d.path) << ": " << d.message << '\n';
}

}  // namespace

std::optional<KernelSpec> parse_kernel_spec(const json& value, std::string& error) {
    std::string name;
    std::optional<long long> m;
    if (value.is_string()) {
        name = value.get<std::string>();
        const auto colon = name.find(':');
        if (colon != std::string::npos) {
            const std::string tail = name.substr(colon + 1);
            name = name.substr(0, colon);
            long long parsed = 0;
            auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), parsed);
            if (ec != std::errc() || ptr != tail.data() + tail.size()) {
                error = "neighbour count '" + tail + "' is not an integer";
                return std::nullopt;
            }
            m = parsed;
        }
    } else if (value.is_object()) {
        if (!value.contains("type") || !value.at("type").is_string()) {
            error = "kernel object needs a string 'type'";
            return std::nullopt;
        }
        name = value.at("type").get<std::string>();
        if (value.contains("M")) {
            if (!value.at("M").is_number_integer()) {
                error = "M must be an integer";
                return std::nullopt;
            }
            m = value.at("M").get<long long>();
        }
    } else {
        error = "kernel must be a name or an object";
        return std::nullopt;
    }
    const auto kind = kernel_kind_from_name(name);
    if (!kind) {
        error = "unknown kernel '" + name +
                "' (expected uniform, component_normal, component_normal_beaumont, mvn, mvn_knn, olcm, fim_global, fim_knn)";
        return std::nullopt;
    }
    KernelSpec spec{*kind, 0};
    const bool takes_m = *kind == KernelKind::MvnKnn || *kind == KernelKind::FimKnnDet;
    if (m && !takes_m) {
        error = "kernel '" + name + "' takes no neighbour count";
        return std::nullopt;
    }
    if (m) {
        if (*m < 2) {
            error = "neighbour count M must be >= 2";
            return std::nullopt;
        }
        spec.neighbours = static_cast<std::size_t>(*m);
    } else if (*kind == KernelKind::MvnKnn) {
        error = "mvn_knn needs a neighbour count, e.g. \"mvn_knn:50\"";
        return std::nullopt;
    }
    return spec;
}

ValidationResult validate_config(const json& doc, const std::string& base_dir) {
    Collector c;
    ValidationResult result;
    if (!doc.is_object()) {
        result.diagnostics.push_back({"", "config must be a JSON object"});
        return result;
    }
    for (const auto& [key, _] : doc.items())
        if (!kKnownKeys.contains(key)) c.add("/" + key, "unknown field");

    ExperimentConfig cfg;

    // model
    std::optional<GenerativeModel> model;
    if (!doc.contains("model") || !doc.at("model").is_string()) {
        c.add("/model", "required: one of ellipsoid, ring, banana, gaussian, repressilator, hes1");
    } else {
        cfg.run.model_id = doc.at("model").get<std::string>();
        const auto ids = model_ids();
        if (std::find(ids.begin(), ids.end(), cfg.run.model_id) == ids.end())
            c.add("/model", "unknown model '" + cfg.run.model_id + "'");
    }
    if (doc.contains("model_options")) {
        const json& mo = doc.at("model_options");
        if (!mo.is_object()) {
            c.add("/model_options", "must be an object");
        } else {
            for (const auto& [key, v] : mo.items()) {
                if (key == "noise_std") {
                    if (!v.is_number() || !(v.get<double>() >= 0.0))
                        c.add("/model_options/noise_std", "must be a non-negative number");
                    else
                        cfg.model_options.noise_std = v.get<double>();
                } else if (key == "banana_fim") {
                    if (v == "nominal")
                        cfg.model_options.banana_derived_fim = false;
                    else if (v == "derived")
                        cfg.model_options.banana_derived_fim = true;
                    else
                        c.add("/model_options/banana_fim", "must be 'nominal' or 'derived'");
                } else if (key == "data_seed") {
                    if (!v.is_number_unsigned())
                        c.add("/model_options/data_seed", "must be a non-negative integer");
                    else
                        cfg.model_options.data_seed = v.get<std::uint64_t>();
                } else {
                    c.add("/model_options/" + key, "unknown field");
                }
            }
        }
    }
    if (c.empty()) {
        try {
            model = make_model(cfg.run.model_id, cfg.model_options);
        } catch (const std::exception& e) {
            c.add("/model_options", e.what());
        }
    }

    // prior
    if (doc.contains("prior")) {
        const json& p = doc.at("prior");
        if (!p.is_object() || !p.contains("lower") || !p.contains("upper")) {
            c.add("/prior", "must be an object with 'lower' and 'upper' arrays");
        } else {
            auto lo = read_vector(p.at("lower"), "/prior/lower", c);
            auto hi = read_vector(p.at("upper"), "/prior/upper", c);
            if (lo && hi) {
                try {
                    cfg.run.prior = BoxPrior(*lo, *hi);
                    if (model && cfg.run.prior.dim() != model->dim_theta)
                        c.add("/prior", "model '" + model->id + "' has " + std::to_string(model->dim_theta) +
                                            " parameters");
                } catch (const std::exception& e) {
                    c.add("/prior", e.what());
                }
            }
        }
    } else if (model) {
        cfg.run.prior = model->default_prior;
    }

    // kernels
    std::string kerr;
    bool have_kernel = false;
    if (doc.contains("kernel")) {
        if (auto k = parse_kernel_spec(doc.at("kernel"), kerr)) {
            cfg.run.kernel = *k;
            have_kernel = true;
        } else {
            c.add("/kernel", kerr);
        }
    }
    if (doc.contains("kernels")) {
        const json& ks = doc.at("kernels");
        if (!ks.is_array() || ks.empty()) {
            c.add("/kernels", "must be a non-empty array of kernels");
        } else {
            for (std::size_t i = 0; i < ks.size(); ++i) {
                if (auto k = parse_kernel_spec(ks[i], kerr))
                    cfg.kernels.push_back(*k);
                else
                    c.add("/kernels/" + std::to_string(i), kerr);
            }
        }
        if (!have_kernel && !cfg.kernels.empty()) {
            cfg.run.kernel = cfg.kernels.front();
            have_kernel = true;
        }
    }
    if (!doc.contains("kernel") && !doc.contains("kernels")) c.add("/kernel", "required");
    if (cfg.kernels.empty() && have_kernel) cfg.kernels = {cfg.run.kernel};

    // sizes and limits
    if (auto n = read_int(doc, "population_size", 2, c))
        cfg.run.population_size = static_cast<std::size_t>(*n);
    else if (model && !doc.contains("population_size"))
        cfg.run.population_size = model->default_population;
    if (auto s = read_int(doc, "seed", 0, c)) cfg.run.seed = static_cast<std::uint64_t>(*s);
    if (auto b = read_int(doc, "max_proposals_per_generation", 1, c)) {
        cfg.run.max_proposals_per_generation = *b;
        if (*b < static_cast<long long>(cfg.run.population_size))
            c.add("/max_proposals_per_generation", "must be >= population_size");
    }
    if (auto g = read_int(doc, "max_generations", 1, c)) cfg.run.max_generations = static_cast<int>(*g);
    if (auto w = read_int(doc, "workers", 1, c)) cfg.run.workers = static_cast<unsigned>(*w);
    if (auto r = read_int(doc, "repeats", 1, c)) cfg.repeats = static_cast<int>(*r);
    if (doc.contains("output_dir")) {
        if (!doc.at("output_dir").is_string() || doc.at("output_dir").get<std::string>().empty())
            c.add("/output_dir", "must be a non-empty string");
        else
            cfg.output_dir = doc.at("output_dir").get<std::string>();
    }

    for (std::size_t i = 0; i < cfg.kernels.size(); ++i) {
        const auto& k = cfg.kernels[i];
        const std::string where = doc.contains("kernels") ? "/kernels/" + std::to_string(i) : "/kernel";
        if (k.neighbours > cfg.run.population_size)
            c.add(where, "neighbour count M exceeds population_size");
        if (model && kernel_needs_fim(k.kind) && !model->fim)
            c.add(where, "model '" + model->id + "' provides no Fisher information");
    }

    // schedule
    if (doc.contains("schedule")) {
        if (auto s = read_schedule(doc.at("schedule"), c)) cfg.run.schedule = *s;
    } else if (model) {
        cfg.run.schedule = EpsilonSchedule::fixed(model->default_schedule);
    }

    // observed data
    if (doc.contains("observed_data")) {
        if (!doc.at("observed_data").is_string()) {
            c.add("/observed_data", "must be a path string");
        } else {
            fs::path p = doc.at("observed_data").get<std::string>();
            if (p.is_relative()) p = fs::path(base_dir) / p;
            cfg.observed_path = p.string();
            try {
                cfg.observed = read_observed_csv(p.string());
                if (model && cfg.observed.size() != model->dim_data)
                    c.add("/observed_data", "file has " + std::to_string(cfg.observed.size()) + " readings, model '" +
                                                model->id + "' expects " + std::to_string(model->dim_data));
            } catch (const std::exception& e) {
                c.add("/observed_data", e.what());
            }
        }
    } else if (model) {
        cfg.observed = model->observed_default;
    }

    if (!c.empty()) {
        result.diagnostics = std::move(c.diags);
        return result;
    }
    try {
        cfg.run.validate();
    } catch (const std::exception& e) {
        result.diagnostics.push_back({"", e.what()});
        return result;
    }
    result.config = std::move(cfg);
    return result;
}

ValidationResult validate_config_text(const std::string& text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // locate the byte offset to report line and column
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        ValidationResult r;
        r.diagnostics.push_back({"line " + std::to_string(line) + ", column " + std::to_string(col),
                                 std::string("JSON syntax error: ") + e.what()});
        return r;
    }
    return validate_config(doc, base_dir);
}

ValidationResult load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        ValidationResult r;
        r.diagnostics.push_back({"", "cannot read config file '" + path + "'"});
        return r;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    const fs::path parent = fs::path(path).parent_path();
    return validate_config_text(ss.str(), parent.empty() ? "." : parent.string());
}

void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides) {
    if (overrides.seed) config.run.seed = *overrides.seed;
    if (overrides.workers) config.run.workers = std::max(1u, *overrides.workers);
    if (overrides.output_dir) config.output_dir = *overrides.output_dir;
}

GenerativeModel model_for(const ExperimentConfig& config) { return make_model(config.run.model_id, config.model_options); }

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

void write_generations_csv(const std::string& path, const std::vector<GenerationRecord>& generations) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "t,epsilon,accepted,proposals,acceptance_rate,simulations,cumulative_simulations,wall_time_ms\n";
    long long cumulative = 0;
    for (const auto& g : generations) {
        cumulative += g.simulations;
        out << csv_line({std::to_string(g.t), format_double(g.epsilon), std::to_string(g.accepted),
                         std::to_string(g.proposals), format_double(g.acceptance_rate), std::to_string(g.simulations),
                         std::to_string(cumulative), format_double(g.wall_time_ms)});
    }
}

void write_posterior_csv(const std::string& path, const WeightedPopulation& population,
                         const std::vector<std::string>& parameter_names) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    std::vector<std::string> header = parameter_names;
    header.push_back("weight");
    out << csv_line(header);
    for (std::size_t i = 0; i < population.size(); ++i) {
        std::vector<std::string> row;
        for (double v : population.particle(i)) row.push_back(format_double(v));
        row.push_back(format_double(population.weight(i)));
        out << csv_line(row);
    }
}

std::string kernel_dir_name(KernelSpec spec) {
    std::string name = kernel_name(spec);
    std::replace(name.begin(), name.end(), ':', '_');
    return name;
}

std::vector<BenchCell> run_bench(const ExperimentConfig& config, const GenerativeModel& model,
                                 const std::string& output_dir) {
    std::vector<BenchCell> cells;
    for (const auto& k : config.kernels)
        for (int r = 0; r < config.repeats; ++r) {
            BenchCell cell;
            cell.kernel = k;
            cell.repeat = r;
            cell.seed = config.run.seed + static_cast<std::uint64_t>(r);
            cells.push_back(cell);
        }

    auto run_cell = [&](BenchCell& cell) {
        RunConfig rc = config.run;
        rc.kernel = cell.kernel;
        rc.seed = cell.seed;
        rc.workers = 1;
        std::string dir;
        if (!output_dir.empty()) {
            dir = (fs::path(output_dir) / kernel_dir_name(cell.kernel) / ("run_" + std::to_string(cell.repeat))).string();
            fs::create_directories(dir);
        }
        const auto start = std::chrono::steady_clock::now();
        try {
            RunResult res = run_abc_smc(rc, model, config.observed);
            cell.generations = std::move(res.generations);
            cell.total_simulations = res.total_simulations;
            cell.ok = true;
            if (!dir.empty()) write_posterior_csv(dir + "/posterior.csv", res.final_population, model.parameter_names);
        } catch (const EngineError& e) {
            cell.error = e.what();
            cell.generations = e.partial_generations();
            for (const auto& g : cell.generations) cell.total_simulations += g.simulations;
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
        cell.wall_time_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (!dir.empty()) write_generations_csv(dir + "/generations.csv", cell.generations);
    };

    const unsigned workers = std::max(1u, config.run.workers);
    if (workers == 1) {
        for (auto& cell : cells) run_cell(cell);
        return cells;
    }
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
            });
    }
    return cells;
}

BenchSummary summarize_bench(const std::vector<KernelSpec>& kernels, std::vector<BenchCell> cells) {
    BenchSummary summary;
    for (const auto& k : kernels) {
        BenchKernelSummary ks;
        ks.kernel = k;
        std::map<int, std::vector<const GenerationRecord*>> by_t;
        for (const auto& cell : cells) {
            if (!(cell.kernel == k)) continue;
            if (!cell.ok) {
                ++ks.failed;
                continue;
            }
            ++ks.completed;
            ks.mean_total_simulations += static_cast<double>(cell.total_simulations);
            ks.mean_wall_time_ms += cell.wall_time_ms;
            for (const auto& g : cell.generations) by_t[g.t].push_back(&g);
        }
        if (ks.completed > 0) {
            ks.mean_total_simulations /= ks.completed;
            ks.mean_wall_time_ms /= ks.completed;
        }
        for (const auto& [t, recs] : by_t) {
            BenchGenerationStat st;
            st.t = t;
            st.runs = static_cast<int>(recs.size());
            st.epsilon = recs.front()->epsilon;
            for (const auto* g : recs) {
                st.mean_rate += g->acceptance_rate;
                st.mean_simulations += static_cast<double>(g->simulations);
                st.mean_wall_time_ms += g->wall_time_ms;
            }
            st.mean_rate /= st.runs;
            st.mean_simulations /= st.runs;
            st.mean_wall_time_ms /= st.runs;
            for (const auto* g : recs) st.var_rate += (g->acceptance_rate - st.mean_rate) * (g->acceptance_rate - st.mean_rate);
            st.var_rate /= st.runs;
            ks.generations.push_back(st);
        }
        summary.kernels.push_back(std::move(ks));
    }
    summary.cells = std::move(cells);
    return summary;
}

void write_bench_csv(const std::string& path, const BenchSummary& summary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "kernel,kind,repeat,t,epsilon,runs,mean_acceptance_rate,var_acceptance_rate,mean_simulations,"
           "mean_wall_time_ms,status\n";
    for (const auto& ks : summary.kernels) {
        const std::string name = kernel_name(ks.kernel);
        for (const auto& cell : summary.cells) {
            if (!(cell.kernel == ks.kernel)) continue;
            out << csv_line({name, "run", std::to_string(cell.repeat), "", "", "1", "", "",
                             std::to_string(cell.total_simulations), format_double(cell.wall_time_ms),
                             cell.ok ? "ok" : "failed"});
        }
        for (const auto& g : ks.generations)
            out << csv_line({name, "generation", "", std::to_string(g.t), format_double(g.epsilon), std::to_string(g.runs),
                             format_double(g.mean_rate), format_double(g.var_rate), format_double(g.mean_simulations),
                             format_double(g.mean_wall_time_ms), "ok"});
        out << csv_line({name, "total", "", "", "", std::to_string(ks.completed), "", "",
                         format_double(ks.mean_total_simulations), format_double(ks.mean_wall_time_ms),
                         ks.failed == 0 ? "ok" : "partial"});
    }
}

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
    const ValidationResult v = load_config(config_path);
    if (!v.ok()) {
        print_diagnostics(v.diagnostics, config_path, err);
        return 2;
    }
    const auto& c = *v.config;
    out << config_path << ": ok (model " << c.run.model_id << ", N=" << c.run.population_size << ", kernel "
        << kernel_name(c.run.kernel) << ", " << c.kernels.size() << " bench kernel(s), repeats " << c.repeats << ")\n";
    return 0;
}

int cmd_run(const std::string& config_path, const CliOverrides& overrides, std::ostream& out, std::ostream& err) {
    ValidationResult v = load_config(config_path);
    if (!v.ok()) {
        print_diagnostics(v.diagnostics, config_path, err);
        return 2;
    }
    ExperimentConfig cfg = std::move(*v.config);
    apply_overrides(cfg, overrides);
    const GenerativeModel model = model_for(cfg);
    try {
        fs::create_directories(cfg.output_dir);
    } catch (const std::exception& e) {
        err << "cannot create output directory '" << cfg.output_dir << "': " << e.what() << '\n';
        return 1;
    }
    const std::string gen_path = (fs::path(cfg.output_dir) / "generations.csv").string();
    const std::string post_path = (fs::path(cfg.output_dir) / "posterior.csv").string();
    try {
        const RunResult res = run_abc_smc(cfg.run, model, cfg.observed);
        write_generations_csv(gen_path, res.generations);
        write_posterior_csv(post_path, res.final_population, model.parameter_names);
        const auto& last = res.generations.back();
        out << "model " << model.id << ", kernel " << kernel_name(cfg.run.kernel) << ": " << res.generations.size()
            << " generations, final epsilon " << format_double(last.epsilon) << ", " << res.total_simulations
            << " simulations\n";
        out << "wrote " << gen_path << " and " << post_path << '\n';
        return 0;
    } catch (const EngineError& e) {
        write_generations_csv(gen_path, e.partial_generations());
        err << "run failed: " << e.what() << " (partial telemetry in " << gen_path << ")\n";
        return 1;
    } catch (const std::exception& e) {
        err << "run failed: " << e.what() << '\n';
        return 1;
    }
}

int cmd_bench(const std::string& config_path, const CliOverrides& overrides, std::ostream& out, std::ostream& err) {
    ValidationResult v = load_config(config_path);
    if (!v.ok()) {
        print_diagnostics(v.diagnostics, config_path, err);
        return 2;
    }
    ExperimentConfig cfg = std::move(*v.config);
    apply_overrides(cfg, overrides);
    const GenerativeModel model = model_for(cfg);
    try {
        fs::create_directories(cfg.output_dir);
    } catch (const std::exception& e) {
        err << "cannot create output directory '" << cfg.output_dir << "': " << e.what() << '\n';
        return 1;
    }
    auto cells = run_bench(cfg, model, cfg.output_dir);
    bool failed = false;
    for (const auto& cell : cells) {
        if (cell.ok) continue;
        failed = true;
        err << "kernel " << kernel_name(cell.kernel) << " repeat " << cell.repeat << " failed: " << cell.error << '\n';
    }
    const BenchSummary summary = summarize_bench(cfg.kernels, std::move(cells));
    const std::string bench_path = (fs::path(cfg.output_dir) / "bench.csv").string();
    write_bench_csv(bench_path, summary);
    for (const auto& ks : summary.kernels) {
        out << kernel_name(ks.kernel) << ": " << ks.completed << " runs";
        if (ks.failed) out << " (" << ks.failed << " failed)";
        out << ", mean simulations " << format_double(ks.mean_total_simulations);
        if (!ks.generations.empty())
            out << ", final-generation acceptance " << format_double(ks.generations.back().mean_rate);
        out << '\n';
    }
    out << "wrote " << bench_path << '\n';
    return failed ? 1 : 0;
}

}  // namespace abc
