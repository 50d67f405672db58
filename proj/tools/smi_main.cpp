// Command-line runner for the experiment studies.

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "smi/config.hpp"
#include "smi/experiments.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::string scale = "full";
    unsigned jobs = 0;  // 0 keeps the config value
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "TOML config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Run a single seed, replacing the configured list");
    cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--scale", o.scale, "Preset scale")
        ->check(CLI::IsMember({"full", "desk"}))
        ->capture_default_str();
    cmd->add_option("--jobs", o.jobs, "Cells run concurrently");
}

std::string config_text(const CommonOptions& o) {
    return o.config_path.empty() ? std::string() : smi::read_text_file(o.config_path);
}

fs::path config_dir(const CommonOptions& o) {
    return o.config_path.empty() ? fs::current_path() : fs::path(o.config_path).parent_path();
}

int run_and_write(const CommonOptions& o, const smi::Json& config,
                  const std::function<smi::ExperimentOutput()>& run) {
    const auto start = std::chrono::steady_clock::now();
    smi::ExperimentOutput out = run();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& line : out.log) std::cout << line << "\n";
    out.log.push_back("elapsed_seconds " + std::to_string(seconds));
    smi::write_outputs(o.out_dir, out, config);
    std::cout << "wrote " << (fs::path(o.out_dir) / "metrics.csv").string() << "\n";
    return out.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stein mixture inference experiments"};
    app.require_subcommand(1);

    CommonOptions variance_opts, reg_opts, rec_opts, csv_opts, sanity_opts;
    auto* variance = app.add_subcommand("variance", "Variance collapse on a standard Gaussian");
    add_common(variance, variance_opts);
    auto* reg1d = app.add_subcommand("reg1d", "1D wave regression with tiny and small BNNs");
    add_common(reg1d, reg_opts);
    auto* recovery = app.add_subcommand("recovery", "SVGD recovery point against SMI");
    add_common(recovery, rec_opts);
    auto* csvreg = app.add_subcommand("csvreg", "BNN regression on a CSV file");
    add_common(csvreg, csv_opts);
    std::string csv_data;
    std::string csv_target;
    csvreg->add_option("--data", csv_data, "CSV file (overrides data_path)");
    csvreg->add_option("--target", csv_target, "Target column (overrides target_column)");
    auto* sanity = app.add_subcommand("sanity", "Reduction, gradient and unbiasedness checks");
    add_common(sanity, sanity_opts);
    std::string fault = "none";
    sanity->add_option("--inject-fault", fault, "Mutation for testing the suite itself")
        ->check(CLI::IsMember({"none", "repulsion-sign", "minibatch-exponent"}))
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*variance) {
            auto& o = variance_opts;
            auto c = smi::parse_variance_config(config_text(o), smi::scale_from_string(o.scale));
            if (o.seed) c.seeds = {*o.seed};
            if (o.jobs) c.jobs = o.jobs;
            return run_and_write(o, smi::to_json(c), [&] { return smi::run_variance_experiment(c); });
        }
        if (*reg1d) {
            auto& o = reg_opts;
            auto c = smi::parse_regression1d_config(config_text(o), smi::scale_from_string(o.scale));
            if (o.seed) c.seeds = {*o.seed};
            if (o.jobs) c.jobs = o.jobs;
            return run_and_write(o, smi::to_json(c), [&] { return smi::run_regression1d(c); });
        }
        if (*recovery) {
            auto& o = rec_opts;
            auto c = smi::parse_recovery_config(config_text(o), smi::scale_from_string(o.scale));
            if (o.seed) c.base.seeds = {*o.seed};
            if (o.jobs) c.base.jobs = o.jobs;
            return run_and_write(o, smi::to_json(c), [&] { return smi::run_recovery(c); });
        }
        if (*csvreg) {
            auto& o = csv_opts;
            std::optional<fs::path> data;
            if (!csv_data.empty()) data = fs::path(csv_data);
            auto c = smi::parse_csv_regression_config(
                config_text(o), smi::scale_from_string(o.scale), config_dir(o), data);
            if (!csv_target.empty()) c.target_column = csv_target;
            if (o.seed) c.seeds = {*o.seed};
            if (o.jobs) c.jobs = o.jobs;
            return run_and_write(o, smi::to_json(c), [&] { return smi::run_csv_regression(c); });
        }
        if (*sanity) {
            auto& o = sanity_opts;
            auto c = smi::parse_sanity_config(config_text(o));
            if (o.seed) c.seed = *o.seed;
            if (fault != "none") c.fault = smi::fault_from_string(fault);
            return run_and_write(o, smi::to_json(c), [&] { return smi::run_sanity(c); });
        }
    } catch (const smi::InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const smi::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const smi::NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
