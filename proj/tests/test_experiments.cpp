#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "smi/config.hpp"
#include "smi/experiments.hpp"

using namespace smi;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("smi_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST(MethodSpec, ParseAndLabel) {
    const MethodSpec a = MethodSpec::parse("smi-20");
    EXPECT_EQ(a.method, Method::Smi);
    EXPECT_EQ(*a.particles, 20);
    EXPECT_EQ(a.label(), "smi-20");
    EXPECT_FALSE(MethodSpec::parse("map").particles.has_value());
    EXPECT_THROW(MethodSpec::parse("svgd-0"), InvalidConfig);
    EXPECT_THROW(MethodSpec::parse("hmc"), InvalidConfig);
}

TEST(RunCells, ResultsKeepCellOrder) {
    const auto out = run_cells<int>(17, 4, [](std::size_t i) { return static_cast<int>(i * i); });
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
}

TEST(Output, CsvFormatAndHash) {
    const std::string csv = metrics_csv({{"variance", "dim=1", "svgd-20", 0, "frobenius", 0.1}}, "abc");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "experiment,cell,method,seed,metric,value,version,config_hash");
    EXPECT_NE(csv.find("variance,dim=1,svgd-20,0,frobenius,0.10000000000000001,"), std::string::npos);
    const Json a = {{"x", 1}, {"y", 2}};
    const Json b = {{"y", 2}, {"x", 1}};
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_NE(config_hash(a), config_hash({{"x", 2}, {"y", 2}}));
    EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Output, WritesAllFiles) {
    const fs::path dir = scratch_dir("outputs");
    ExperimentOutput out;
    out.metrics.push_back({"e", "c", "m", 1, "v", 2.5});
    out.particles.push_back({"c", "m", 1, {1, 1}, Matrix::Constant(2, 2, 0.5)});
    out.log.push_back("hello");
    write_outputs(dir / "run", out, {{"experiment", "e"}});
    for (const char* f : {"metrics.csv", "predictive.json", "particles.json", "run.log"})
        EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
    const Json parts = Json::parse(slurp(dir / "run" / "particles.json"));
    EXPECT_EQ(parts.size(), 1u);
    EXPECT_NE(slurp(dir / "run" / "run.log").find("hello"), std::string::npos);
}

TEST(Experiments, VarianceIsDeterministicAcrossJobCounts) {
    VarianceConfig c;
    c.dims = {1, 3};
    c.methods = {"svgd-5", "asvgd-5", "smi-2", "ovi"};
    c.max_steps = 60;
    c.sample_draws = 20;
    c.jobs = 1;
    const std::string serial = metrics_csv(run_variance_experiment(c).metrics, "h");
    c.jobs = 3;
    const std::string parallel = metrics_csv(run_variance_experiment(c).metrics, "h");
    EXPECT_EQ(serial, parallel);
    EXPECT_NE(serial.find("dim=3,smi-2,0,frobenius_sampled"), std::string::npos);
}

TEST(Experiments, RegressionSmokeRun) {
    Regression1dConfig c;
    c.hidden_sizes = {3};
    c.methods = {"smi", "svgd", "ovi", "map"};
    c.seeds = {0};
    c.max_steps = 30;
    c.ovi_steps = 30;
    c.n_draws = 2;
    c.predictive_draws = 40;
    c.grid_points = 5;
    const ExperimentOutput out = run_regression1d(c);
    int widths = 0;
    for (const auto& r : out.metrics) {
        EXPECT_TRUE(std::isfinite(r.value) || r.metric == "lppd") << r.metric;
        if (r.metric == "hdi_width") {
            ++widths;
            EXPECT_GT(r.value, 0.0);
        }
    }
    EXPECT_EQ(widths, 4 * 3);
    EXPECT_TRUE(out.predictive.contains("bands"));
}

TEST(Experiments, CsvRegressionSmokeRun) {
    const fs::path dir = scratch_dir("csv");
    {
        std::ofstream f(dir / "toy.csv");
        f << "a,b,y\n";
        for (int i = 0; i < 40; ++i) f << i * 0.1 << "," << (i % 7) << "," << 0.5 * i * 0.1 + 1.0 << "\n";
    }
    const CsvRegressionConfig c = parse_csv_regression_config(
        "data_path = \"toy.csv\"\nmethods = [\"smi\", \"map\"]\nhidden_dim = 4\nmax_steps = 40\n"
        "predictive_draws = 30\nbatch_size = 10\n",
        Scale::Full, dir);
    const ExperimentOutput out = run_csv_regression(c);
    int seen = 0;
    for (const auto& r : out.metrics)
        if (r.metric == "rmse" || r.metric == "nll") {
            EXPECT_TRUE(std::isfinite(r.value));
            ++seen;
        }
    EXPECT_EQ(seen, 4);
}

TEST(Experiments, SanitySuiteDetectsInjectedFaults) {
    SanityConfig c;
    c.fd_points = 5;
    c.reduction_steps = 20;
    EXPECT_TRUE(run_sanity(c).ok);
    c.fault = Fault::MinibatchExponent;
    const auto checks = run_sanity_checks(c);
    int failed = 0;
    for (const auto& ch : checks) failed += ch.passed ? 0 : 1;
    EXPECT_EQ(failed, 1);
    c.fault = Fault::RepulsionSign;
    EXPECT_FALSE(run_sanity(c).ok);
}
