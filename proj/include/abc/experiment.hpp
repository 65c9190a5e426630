#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abc/engine.hpp"
#include "abc/models.hpp"

namespace abc {

struct Diagnostic {
    std::string path;      // JSON pointer-ish location, e.g. "/schedule/alpha"
    std::string message;
};

struct ExperimentConfig {
    RunConfig run;
    ModelOptions model_options;
    std::optional<std::string> observed_path;
    Vector observed;                  // resolved: file contents or the model default
    int repeats = 1;
    std::vector<KernelSpec> kernels;  // bench list; defaults to {run.kernel}
    std::string output_dir = "abc_output";
};

struct ValidationResult {
    std::optional<ExperimentConfig> config;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return config.has_value(); }
};

/// Full validation; fills omitted fields from the model defaults. Relative observed-data
/// paths resolve against `base_dir`. Never returns a partially built config.
ValidationResult validate_config(const nlohmann::json& doc, const std::string& base_dir = ".");

/// Parses JSON text first; syntax errors are reported with line and column.
ValidationResult validate_config_text(const std::string& text, const std::string& base_dir = ".");

ValidationResult load_config(const std::string& path);

/// "olcm", "mvn_knn:50", {"type": "mvn_knn", "M": 50}
std::optional<KernelSpec> parse_kernel_spec(const nlohmann::json& value, std::string& error);

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> output_dir;
};

void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides);

// ---- CSV output ----------------------------------------------------------------------

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

void write_generations_csv(const std::string& path, const std::vector<GenerationRecord>& generations);
void write_posterior_csv(const std::string& path, const WeightedPopulation& population,
                         const std::vector<std::string>& parameter_names);

// ---- bench ---------------------------------------------------------------------------

struct BenchCell {
    KernelSpec kernel;
    int repeat = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::vector<GenerationRecord> generations;   // partial on failure
    long long total_simulations = 0;
    double wall_time_ms = 0.0;
};

struct BenchGenerationStat {
    int t = 0;
    double epsilon = 0.0;
    int runs = 0;
    double mean_rate = 0.0;
    double var_rate = 0.0;   // population variance over runs
    double mean_simulations = 0.0;
    double mean_wall_time_ms = 0.0;
};

struct BenchKernelSummary {
    KernelSpec kernel;
    int completed = 0;
    int failed = 0;
    double mean_total_simulations = 0.0;
    double mean_wall_time_ms = 0.0;
    std::vector<BenchGenerationStat> generations;
};

struct BenchSummary {
    std::vector<BenchKernelSummary> kernels;
    std::vector<BenchCell> cells;
};

/// Runs every (kernel, repeat) cell with seed = base seed + repeat. Cells run on
/// `config.run.workers` threads; each engine run is single-worker. When `output_dir`
/// is non-empty each cell writes its own generations.csv and posterior.csv below it.
std::vector<BenchCell> run_bench(const ExperimentConfig& config, const GenerativeModel& model,
                                 const std::string& output_dir = "");

/// Aggregates completed cells only.
BenchSummary summarize_bench(const std::vector<KernelSpec>& kernels, std::vector<BenchCell> cells);

void write_bench_csv(const std::string& path, const BenchSummary& summary);

std::string kernel_dir_name(KernelSpec spec);

// ---- commands ------------------------------------------------------------------------

/// Exit codes: 0 success, 1 engine failure (partial telemetry written), 2 invalid config.
int cmd_run(const std::string& config_path, const CliOverrides& overrides, std::ostream& out, std::ostream& err);
int cmd_bench(const std::string& config_path, const CliOverrides& overrides, std::ostream& out, std::ostream& err);
int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err);

GenerativeModel model_for(const ExperimentConfig& config);

}  // namespace abc
