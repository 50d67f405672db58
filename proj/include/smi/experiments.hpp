#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smi/dataset.hpp"
#include "smi/engine.hpp"
#include "smi/metrics.hpp"
#include "smi/serialization.hpp"

namespace smi {

enum class Scale { Full, Desk };

std::string to_string(Scale scale);
Scale scale_from_string(const std::string& name);

/// One tidy metric row. Version and config hash are added by the writer.
struct MetricRow {
    std::string experiment;
    std::string cell;
    std::string method;
    std::uint64_t seed;
    std::string metric;
    double value;
};

/// Final particles of one cell, for particles.json.
struct ParticleSnapshot {
    std::string cell;
    std::string method;
    std::uint64_t seed;
    ParticleLayout layout;
    Matrix particles;
};

struct ExperimentOutput {
    std::vector<MetricRow> metrics;
    std::vector<ParticleSnapshot> particles;
    Json predictive = Json::object();
    std::vector<std::string> log;
    bool ok = true;  // sanity suite verdict; always true for the studies
};

/// Particle method label: "svgd", "asvgd", "map", "ovi", "smi", optionally
/// with a particle count suffix such as "smi-20".
struct MethodSpec {
    Method method;
    std::optional<Index> particles;

    static MethodSpec parse(const std::string& label);
    std::string label() const;
};

/// Initial particles drawn uniformly in [-half_width, half_width]. For
/// Gaussian guides with guide_scale > 0 the raw-scale half is set so every
/// guide starts at that scale.
Matrix initial_particles(const Guide& guide, Index m, double half_width, double guide_scale,
                         std::uint64_t seed);

/// Runs independent cells on up to `jobs` threads and returns their
/// results in cell order.
template <typename R>
std::vector<R> run_cells(std::size_t count, unsigned jobs, const std::function<R(std::size_t)>& cell);

// ---------------------------------------------------------------------------
// Variance collapse on a standard Gaussian.

struct VarianceConfig {
    std::vector<Index> dims{1, 2, 4, 8, 10, 20, 40, 60, 80, 100};
    std::vector<std::string> methods{"svgd-20", "asvgd-20", "smi-1", "smi-20"};
    std::vector<std::uint64_t> seeds{0};
    Index max_steps = 60000;
    double svgd_init_half_width = 20.0;
    double smi_loc_half_width = 2.0;
    double smi_init_scale = 0.1;
    OptimizerConfig svgd_optimizer{OptimizerKind::Adam, 0.05};
    OptimizerConfig smi_optimizer{OptimizerKind::Adagrad, 0.05};
    Index n_draws = 10;         // Monte Carlo draws for the SMI force
    ForceEstimator estimator = ForceEstimator::Pathwise;
    Index sample_draws = 5000;  // pooled guide draws for the sampled SMI metrics
    double alpha = 1.0;
    unsigned jobs = 1;

    void validate() const;
    void apply_scale(Scale scale);
};

Json to_json(const VarianceConfig& config);

ExperimentOutput run_variance_experiment(const VarianceConfig& config);

// ---------------------------------------------------------------------------
// 1D wave regression.

struct Regression1dConfig {
    std::vector<Index> hidden_sizes{5, 100};
    std::vector<std::string> methods{"smi", "svgd", "asvgd", "ovi", "map"};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::uint64_t data_seed = 2024;
    Index n_per_cluster = 20;
    double noise_sd = kWaveNoiseSd;
    Index particles = 5;
    Index max_steps = 15000;
    Index ovi_steps = 50000;
    Index n_draws = 100;
    Index predictive_draws = 5000;
    double init_half_width = 0.1;
    double guide_init_scale = 0.0;  // > 0 fixes the initial guide scale instead
    OptimizerConfig optimizer{OptimizerKind::Adam, 0.001};
    ForceEstimator estimator = ForceEstimator::Pathwise;
    Activation activation = Activation::Tanh;
    bool stop_on_convergence = false;
    double hdi_mass = 0.9;
    Index grid_points = 161;  // predictive.json grid over [-2, 2]
    unsigned jobs = 1;

    void validate() const;
    void apply_scale(Scale scale);
};

Json to_json(const Regression1dConfig& config);

/// Training data and the three evaluation sets, all fixed by data_seed.
struct WaveData {
    Dataset train;
    std::vector<std::pair<WaveRegion, Dataset>> eval;
};
WaveData make_wave_data(const Regression1dConfig& config);

/// Fits one method on the wave data and returns the final particles and
/// the guide they parameterize.
struct FittedModel {
    Guide guide;
    Matrix particles;
    RunRecord record;
};
FittedModel fit_wave_model(const Regression1dConfig& config, const BnnRegressionModel& model,
                           const MethodSpec& method, std::uint64_t seed);

/// Region summary of a fitted model: LPPD and mean HDI width over the
/// region's evaluation inputs.
struct RegionScore {
    double lppd;
    double mean_hdi_width;
};
RegionScore score_region(const Regression1dConfig& config, const BnnRegressionModel& model,
                         const FittedModel& fit, const Dataset& eval, std::uint64_t seed);

ExperimentOutput run_regression1d(const Regression1dConfig& config);

// ---------------------------------------------------------------------------
// Recovery point of SVGD against five-particle SMI.

struct RecoveryConfig {
    Regression1dConfig base;  // data and inference setup
    std::vector<Index> hidden_sizes{5};
    Index smi_particles = 5;
    Index max_particles = 256;

    RecoveryConfig();
    void validate() const;
    void apply_scale(Scale scale);
};

Json to_json(const RecoveryConfig& config);

/// Median with +inf for at-limit trials; +inf when the median is at limit.
double median_recovery(std::vector<double> values);

ExperimentOutput run_recovery(const RecoveryConfig& config);

// ---------------------------------------------------------------------------
// Regression on a CSV file.

struct CsvRegressionConfig {
    std::filesystem::path data_path;
    std::string target_column = "y";
    bool standardize_inputs = true;
    double test_fraction = 0.1;
    Index hidden_dim = 50;
    Activation activation = Activation::Relu;
    std::vector<std::string> methods{"smi", "svgd", "asvgd", "ovi", "map"};
    std::vector<std::uint64_t> seeds{0};
    Index particles = 5;
    Index max_steps = 60000;
    Index n_draws = 10;
    ForceEstimator estimator = ForceEstimator::Pathwise;
    Index predictive_draws = 5000;
    std::optional<Index> batch_size = 100;
    double init_half_width = 0.1;
    double guide_init_scale = 0.0;  // > 0 fixes the initial guide scale instead
    OptimizerConfig optimizer{OptimizerKind::Adam, 5e-4};
    bool stop_on_convergence = true;
    unsigned jobs = 1;

    void validate() const;
    void apply_scale(Scale scale);
};

Json to_json(const CsvRegressionConfig& config);

ExperimentOutput run_csv_regression(const CsvRegressionConfig& config);

// ---------------------------------------------------------------------------
// Invariant suite.

enum class Fault { None, RepulsionSign, MinibatchExponent };

std::string to_string(Fault fault);
Fault fault_from_string(const std::string& name);

struct SanityConfig {
    std::uint64_t seed = 0;
    Index fd_points = 100;
    Index reduction_steps = 100;
    Fault fault = Fault::None;

    void validate() const;
};

Json to_json(const SanityConfig& config);

struct SanityCheck {
    std::string name;
    bool passed;
    std::string detail;
};

std::vector<SanityCheck> run_sanity_checks(const SanityConfig& config);
ExperimentOutput run_sanity(const SanityConfig& config);

// ---------------------------------------------------------------------------
// Output.

/// FNV-1a 64 of the canonical (key-sorted) JSON dump, as 16 hex digits.
std::string config_hash(const Json& config);

/// Library version as recorded at build time.
std::string version_string();

/// Writes metrics.csv, predictive.json, particles.json and run.log into
/// `out_dir`, each through a temporary file and rename.
void write_outputs(const std::filesystem::path& out_dir, const ExperimentOutput& output,
                   const Json& config);

std::string metrics_csv(const std::vector<MetricRow>& rows, const std::string& config_hash);

}  // namespace smi

#include "smi/detail/run_cells.hpp"
