#include <sstream>

#include "smi/experiments.hpp"
#include "smi/rng.hpp"

namespace smi {

void Regression1dConfig::validate() const {
    if (hidden_sizes.empty()) throw InvalidConfig("reg1d.hidden_sizes must be non-empty");
    for (Index h : hidden_sizes)
        if (h < 1) throw InvalidConfig("reg1d.hidden_sizes entries must be >= 1");
    if (methods.empty()) throw InvalidConfig("reg1d.methods must be non-empty");
    for (const auto& m : methods) MethodSpec::parse(m);
    if (seeds.empty()) throw InvalidConfig("reg1d.seeds must be non-empty");
    if (n_per_cluster < 1) throw InvalidConfig("reg1d.n_per_cluster must be >= 1");
    if (!(noise_sd > 0.0)) throw InvalidConfig("reg1d.noise_sd must be > 0");
    if (particles < 1) throw InvalidConfig("reg1d.particles must be >= 1");
    if (max_steps < 0 || ovi_steps < 0) throw InvalidConfig("reg1d step counts must be >= 0");
    if (n_draws < 1) throw InvalidConfig("reg1d.n_draws must be >= 1");
    if (predictive_draws < 1) throw InvalidConfig("reg1d.predictive_draws must be >= 1");
    if (!(init_half_width > 0.0)) throw InvalidConfig("reg1d.init_half_width must be > 0");
    if (!(guide_init_scale >= 0.0)) throw InvalidConfig("reg1d.guide_init_scale must be >= 0");
    if (!(hdi_mass > 0.0 && hdi_mass <= 1.0)) throw InvalidConfig("reg1d.hdi_mass must be in (0, 1]");
    if (grid_points < 2) throw InvalidConfig("reg1d.grid_points must be >= 2");
    optimizer.validate();
}

void Regression1dConfig::apply_scale(Scale scale) {
    if (scale == Scale::Full) return;
    max_steps = std::max<Index>(1, max_steps / 10);
    ovi_steps = std::max<Index>(1, ovi_steps / 10);
    n_draws = std::max<Index>(1, n_draws / 10);
    predictive_draws = std::max<Index>(1, predictive_draws / 10);
}

Json to_json(const Regression1dConfig& c) {
    return {{"experiment", "reg1d"},
            {"hidden_sizes", c.hidden_sizes},
            {"methods", c.methods},
            {"seeds", c.seeds},
            {"data_seed", c.data_seed},
            {"n_per_cluster", c.n_per_cluster},
            {"noise_sd", c.noise_sd},
            {"particles", c.particles},
            {"max_steps", c.max_steps},
            {"ovi_steps", c.ovi_steps},
            {"n_draws", c.n_draws},
            {"predictive_draws", c.predictive_draws},
            {"init_half_width", c.init_half_width},
            {"guide_init_scale", c.guide_init_scale},
            {"optimizer", to_json(c.optimizer)},
            {"estimator", to_string(c.estimator)},
            {"activation", c.activation == Activation::Tanh ? "tanh" : "relu"},
            {"stop_on_convergence", c.stop_on_convergence},
            {"hdi_mass", c.hdi_mass},
            {"grid_points", c.grid_points}};
}

WaveData make_wave_data(const Regression1dConfig& c) {
    WaveData out{generate_wave_dataset(c.n_per_cluster, c.data_seed, c.noise_sd), {}};
    const WaveRegion regions[] = {WaveRegion::In, WaveRegion::Between, WaveRegion::Entire};
    std::uint64_t tag = 1;
    for (WaveRegion r : regions)
        out.eval.emplace_back(r, sample_wave_points(region_intervals(r), region_eval_size(r),
                                                    mix_seed(c.data_seed, tag++), c.noise_sd));
    return out;
}

FittedModel fit_wave_model(const Regression1dConfig& c, const BnnRegressionModel& model,
                           const MethodSpec& spec, std::uint64_t seed) {
    const Index d = model.latent_dim();
    const bool gaussian_guide = spec.method == Method::Smi || spec.method == Method::Ovi;
    const bool single = spec.method == Method::Ovi || spec.method == Method::Map;
    const Index m = single ? 1 : spec.particles.value_or(c.particles);
    Guide guide = gaussian_guide ? Guide(GaussianGuide(d)) : Guide(PointMassGuide(d));

    ParticleEnsemble ensemble(
        initial_particles(guide, m, c.init_half_width, c.guide_init_scale, seed), seed);

    EngineConfig ec;
    ec.method = spec.method;
    ec.optimizer = c.optimizer;
    ec.n_draws = c.n_draws;
    ec.max_steps = spec.method == Method::Ovi ? c.ovi_steps : c.max_steps;
    ec.estimator = c.estimator;
    ec.stop_on_convergence = c.stop_on_convergence;

    RunRecord record = run_inference(model, guide, ec, ensemble);
    return {std::move(guide), ensemble.particles, std::move(record)};
}

namespace {

Vector hdi_widths(const Matrix& draws, double mass, Matrix* bounds = nullptr) {
    Vector widths(draws.cols());
    if (bounds) bounds->resize(draws.cols(), 2);
    std::vector<double> column(static_cast<std::size_t>(draws.rows()));
    for (Index i = 0; i < draws.cols(); ++i) {
        for (Index s = 0; s < draws.rows(); ++s) column[static_cast<std::size_t>(s)] = draws(s, i);
        const Interval1d iv = hdi(column, mass);
        widths(i) = iv.width();
        if (bounds) {
            (*bounds)(i, 0) = iv.low;
            (*bounds)(i, 1) = iv.high;
        }
    }
    return widths;
}

std::uint64_t region_seed(std::uint64_t seed, WaveRegion region) {
    return mix_seed(seed, 100 + static_cast<std::uint64_t>(region));
}

}  // namespace

RegionScore score_region(const Regression1dConfig& c, const BnnRegressionModel& model,
                         const FittedModel& fit, const Dataset& eval, std::uint64_t seed) {
    const PredictiveSample ps =
        predictive_sample(model, fit.guide, fit.particles, eval.inputs, c.predictive_draws, seed);
    const LppdResult l = lppd_from_log(ps.log_densities(eval.targets));
    const Matrix y = ps.observations(mix_seed(seed, 1));
    return {l.value, hdi_widths(y, c.hdi_mass).mean()};
}

namespace {

struct RegressionCellResult {
    std::vector<MetricRow> metrics;
    ParticleSnapshot snapshot;
    Json predictive;
    std::string log;
};

RegressionCellResult run_regression_cell(const Regression1dConfig& c, const WaveData& data,
                                         Index hidden, const MethodSpec& spec,
                                         std::uint64_t seed) {
    const BnnRegressionModel model(data.train, hidden, c.activation,
                                   NoiseModel::fixed(c.noise_sd));
    const FittedModel fit = fit_wave_model(c, model, spec, seed);
    const std::string cell_base = "hidden=" + std::to_string(hidden);

    RegressionCellResult out;
    out.snapshot = {cell_base, spec.label(), seed, layout_of(fit.guide), fit.particles};
    std::ostringstream log;
    log << "reg1d " << cell_base << " method=" << spec.label() << " seed=" << seed
        << " steps=" << fit.record.steps.size();

    for (const auto& [region, eval] : data.eval) {
        const RegionScore score = score_region(c, model, fit, eval, region_seed(seed, region));
        const std::string cell = cell_base + "/region=" + to_string(region);
        out.metrics.push_back({"reg1d", cell, spec.label(), seed, "lppd", score.lppd});
        out.metrics.push_back({"reg1d", cell, spec.label(), seed, "hdi_width", score.mean_hdi_width});
        log << " " << to_string(region) << "(lppd=" << score.lppd
            << ", hdi=" << score.mean_hdi_width << ")";
    }
    out.metrics.push_back({"reg1d", cell_base, spec.label(), seed, "steps",
                           static_cast<double>(fit.record.steps.size())});

    // Predictive band over a regular grid on [-2, 2].
    Matrix grid(c.grid_points, 1);
    for (Index i = 0; i < c.grid_points; ++i)
        grid(i, 0) = -2.0 + 4.0 * static_cast<double>(i) / static_cast<double>(c.grid_points - 1);
    const PredictiveSample ps = predictive_sample(model, fit.guide, fit.particles, grid,
                                                  c.predictive_draws, mix_seed(seed, 7));
    Matrix bounds;
    hdi_widths(ps.observations(mix_seed(seed, 8)), c.hdi_mass, &bounds);
    const Vector mean = ps.means.colwise().mean().transpose();
    std::vector<double> xs(grid.data(), grid.data() + grid.size());
    out.predictive = {{"hidden", hidden},
                      {"method", spec.label()},
                      {"seed", seed},
                      {"x", xs},
                      {"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
                      {"hdi_low", std::vector<double>(bounds.col(0).data(),
                                                      bounds.col(0).data() + bounds.rows())},
                      {"hdi_high", std::vector<double>(bounds.col(1).data(),
                                                       bounds.col(1).data() + bounds.rows())}};
    out.log = log.str();
    return out;
}

Json dataset_json(const Dataset& d) {
    return {{"x", std::vector<double>(d.inputs.data(), d.inputs.data() + d.inputs.size())},
            {"y", std::vector<double>(d.targets.data(), d.targets.data() + d.targets.size())}};
}

}  // namespace

ExperimentOutput run_regression1d(const Regression1dConfig& config) {
    config.validate();
    const WaveData data = make_wave_data(config);
    struct Key {
        Index hidden;
        MethodSpec spec;
        std::uint64_t seed;
    };
    std::vector<Key> keys;
    for (Index h : config.hidden_sizes)
        for (const auto& m : config.methods)
            for (auto s : config.seeds) keys.push_back({h, MethodSpec::parse(m), s});

    const auto results = run_cells<RegressionCellResult>(
        keys.size(), config.jobs, [&](std::size_t i) {
            return run_regression_cell(config, data, keys[i].hidden, keys[i].spec, keys[i].seed);
        });

    ExperimentOutput out;
    Json bands = Json::array();
    for (const auto& r : results) {
        out.metrics.insert(out.metrics.end(), r.metrics.begin(), r.metrics.end());
        out.particles.push_back(r.snapshot);
        out.log.push_back(r.log);
        bands.push_back(r.predictive);
    }
    Json eval = Json::object();
    for (const auto& [region, d] : data.eval) eval[to_string(region)] = dataset_json(d);
    out.predictive = {{"hdi_mass", config.hdi_mass},
                      {"train", dataset_json(data.train)},
                      {"eval", eval},
                      {"bands", bands}};
    return out;
}

}  // namespace smi
