#include <numeric>
#include <sstream>

#include "smi/experiments.hpp"
#include "smi/rng.hpp"

namespace smi {

void CsvRegressionConfig::validate() const {
    if (data_path.empty()) throw InvalidConfig("csvreg.data_path must be set");
    if (target_column.empty()) throw InvalidConfig("csvreg.target_column must be set");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw InvalidConfig("csvreg.test_fraction must be in (0, 1)");
    if (hidden_dim < 1) throw InvalidConfig("csvreg.hidden_dim must be >= 1");
    if (methods.empty()) throw InvalidConfig("csvreg.methods must be non-empty");
    for (const auto& m : methods) MethodSpec::parse(m);
    if (seeds.empty()) throw InvalidConfig("csvreg.seeds must be non-empty");
    if (particles < 1) throw InvalidConfig("csvreg.particles must be >= 1");
    if (max_steps < 0) throw InvalidConfig("csvreg.max_steps must be >= 0");
    if (n_draws < 1) throw InvalidConfig("csvreg.n_draws must be >= 1");
    if (predictive_draws < 1) throw InvalidConfig("csvreg.predictive_draws must be >= 1");
    if (batch_size && *batch_size < 1) throw InvalidConfig("csvreg.batch_size must be >= 1");
    if (!(init_half_width > 0.0)) throw InvalidConfig("csvreg.init_half_width must be > 0");
    if (!(guide_init_scale >= 0.0)) throw InvalidConfig("csvreg.guide_init_scale must be >= 0");
    optimizer.validate();
}

void CsvRegressionConfig::apply_scale(Scale scale) {
    if (scale == Scale::Full) return;
    max_steps = std::max<Index>(1, max_steps / 10);
    predictive_draws = std::max<Index>(1, predictive_draws / 10);
}

Json to_json(const CsvRegressionConfig& c) {
    return {{"experiment", "csvreg"},
            {"data_path", c.data_path.string()},
            {"target_column", c.target_column},
            {"standardize_inputs", c.standardize_inputs},
            {"test_fraction", c.test_fraction},
            {"hidden_dim", c.hidden_dim},
            {"activation", c.activation == Activation::Tanh ? "tanh" : "relu"},
            {"methods", c.methods},
            {"seeds", c.seeds},
            {"particles", c.particles},
            {"max_steps", c.max_steps},
            {"n_draws", c.n_draws},
            {"estimator", to_string(c.estimator)},
            {"predictive_draws", c.predictive_draws},
            {"batch_size", c.batch_size ? Json(*c.batch_size) : Json(nullptr)},
            {"init_half_width", c.init_half_width},
            {"guide_init_scale", c.guide_init_scale},
            {"optimizer", to_json(c.optimizer)},
            {"stop_on_convergence", c.stop_on_convergence}};
}

namespace {

Dataset take_rows(const Dataset& d, const std::vector<Index>& rows) {
    Matrix x(static_cast<Index>(rows.size()), d.input_dim());
    Matrix y(static_cast<Index>(rows.size()), d.target_dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        x.row(static_cast<Index>(i)) = d.inputs.row(rows[i]);
        y.row(static_cast<Index>(i)) = d.targets.row(rows[i]);
    }
    return Dataset(std::move(x), std::move(y));
}

struct CsvCellResult {
    std::vector<MetricRow> metrics;
    ParticleSnapshot snapshot;
    std::string log;
};

CsvCellResult run_csv_cell(const CsvRegressionConfig& c, const Dataset& all, const MethodSpec& spec,
                           std::uint64_t seed) {
    // Seeded train/test split.
    std::vector<Index> order(static_cast<std::size_t>(all.size()));
    std::iota(order.begin(), order.end(), Index{0});
    auto split_gen = stream(seed, StreamPurpose::Data, 0);
    std::shuffle(order.begin(), order.end(), split_gen);
    const auto n_test = std::max<std::size_t>(
        1, static_cast<std::size_t>(c.test_fraction * static_cast<double>(order.size())));
    if (n_test >= order.size()) throw InvalidInput("dataset too small for the requested split");
    const Dataset test = take_rows(all, {order.begin(), order.begin() + static_cast<long>(n_test)});
    const Dataset train = take_rows(all, {order.begin() + static_cast<long>(n_test), order.end()});

    const BnnRegressionModel model(train, c.hidden_dim, c.activation, NoiseModel::gamma_precision());
    const Index d = model.latent_dim();
    const bool gaussian_guide = spec.method == Method::Smi || spec.method == Method::Ovi;
    const bool single = spec.method == Method::Ovi || spec.method == Method::Map;
    const Index m = single ? 1 : spec.particles.value_or(c.particles);
    const Guide guide = gaussian_guide ? Guide(GaussianGuide(d)) : Guide(PointMassGuide(d));

    ParticleEnsemble ensemble(
        initial_particles(guide, m, c.init_half_width, c.guide_init_scale, seed), seed);
    EngineConfig ec;
    ec.method = spec.method;
    ec.optimizer = c.optimizer;
    ec.n_draws = c.n_draws;
    ec.estimator = c.estimator;
    ec.max_steps = c.max_steps;
    ec.batch_size = c.batch_size;
    ec.stop_on_convergence = c.stop_on_convergence;
    const RunRecord record = run_inference(model, guide, ec, ensemble);

    const PredictiveSample ps = predictive_sample(model, guide, ensemble.particles, test.inputs,
                                                  c.predictive_draws, mix_seed(seed, 11));
    const Vector mean = ps.means.colwise().mean().transpose();
    const double r = rmse(mean, test.targets.col(0));
    const double n = nll(ps.log_densities(test.targets));

    CsvCellResult out;
    const std::string cell = "hidden=" + std::to_string(c.hidden_dim);
    out.metrics.push_back({"csvreg", cell, spec.label(), seed, "rmse", r});
    out.metrics.push_back({"csvreg", cell, spec.label(), seed, "nll", n});
    out.metrics.push_back(
        {"csvreg", cell, spec.label(), seed, "steps", static_cast<double>(record.steps.size())});
    out.snapshot = {cell, spec.label(), seed, layout_of(guide), ensemble.particles};
    std::ostringstream log;
    log << "csvreg method=" << spec.label() << " seed=" << seed << " steps=" << record.steps.size()
        << (record.converged ? " (converged)" : "") << " rmse=" << r << " nll=" << n;
    out.log = log.str();
    return out;
}

}  // namespace

ExperimentOutput run_csv_regression(const CsvRegressionConfig& config) {
    config.validate();
    const Dataset all =
        load_csv_dataset(config.data_path, config.target_column, config.standardize_inputs);
    struct Key {
        MethodSpec spec;
        std::uint64_t seed;
    };
    std::vector<Key> keys;
    for (const auto& m : config.methods)
        for (auto s : config.seeds) keys.push_back({MethodSpec::parse(m), s});

    const auto results = run_cells<CsvCellResult>(keys.size(), config.jobs, [&](std::size_t i) {
        return run_csv_cell(config, all, keys[i].spec, keys[i].seed);
    });
    ExperimentOutput out;
    for (const auto& r : results) {
        out.metrics.insert(out.metrics.end(), r.metrics.begin(), r.metrics.end());
        out.particles.push_back(r.snapshot);
        out.log.push_back(r.log);
    }
    return out;
}

}  // namespace smi
