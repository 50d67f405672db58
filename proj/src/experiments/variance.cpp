#include <sstream>

#include "smi/experiments.hpp"
#include "smi/rng.hpp"

namespace smi {

void VarianceConfig::validate() const {
    if (dims.empty()) throw InvalidConfig("variance.dims must be non-empty");
    for (Index d : dims)
        if (d < 1) throw InvalidConfig("variance.dims entries must be >= 1");
    if (methods.empty()) throw InvalidConfig("variance.methods must be non-empty");
    for (const auto& m : methods) MethodSpec::parse(m);
    if (seeds.empty()) throw InvalidConfig("variance.seeds must be non-empty");
    if (max_steps < 0) throw InvalidConfig("variance.max_steps must be nonnegative");
    if (!(svgd_init_half_width > 0.0)) throw InvalidConfig("variance.svgd_init_half_width must be > 0");
    if (!(smi_loc_half_width > 0.0)) throw InvalidConfig("variance.smi_loc_half_width must be > 0");
    if (!(smi_init_scale > 0.0)) throw InvalidConfig("variance.smi_init_scale must be > 0");
    if (n_draws < 1) throw InvalidConfig("variance.n_draws must be >= 1");
    if (sample_draws < 2) throw InvalidConfig("variance.sample_draws must be >= 2");
    svgd_optimizer.validate();
    smi_optimizer.validate();
}

void VarianceConfig::apply_scale(Scale scale) {
    if (scale == Scale::Full) return;
    max_steps = std::max<Index>(1, max_steps / 10);
    sample_draws = std::max<Index>(2, sample_draws / 10);
}

Json to_json(const VarianceConfig& c) {
    return {{"experiment", "variance"},
            {"dims", c.dims},
            {"methods", c.methods},
            {"seeds", c.seeds},
            {"max_steps", c.max_steps},
            {"svgd_init_half_width", c.svgd_init_half_width},
            {"smi_loc_half_width", c.smi_loc_half_width},
            {"smi_init_scale", c.smi_init_scale},
            {"svgd_optimizer", to_json(c.svgd_optimizer)},
            {"smi_optimizer", to_json(c.smi_optimizer)},
            {"n_draws", c.n_draws},
            {"estimator", to_string(c.estimator)},
            {"sample_draws", c.sample_draws},
            {"alpha", c.alpha}};
}

namespace {

struct VarianceCellResult {
    std::vector<MetricRow> metrics;
    ParticleSnapshot snapshot;
    std::string log;
};

void add_spread_metrics(std::vector<MetricRow>& rows, const MetricRow& proto, const Vector& var,
                        double frobenius, const std::string& suffix) {
    auto add = [&](const std::string& name, double v) {
        MetricRow r = proto;
        r.metric = name + suffix;
        r.value = v;
        rows.push_back(std::move(r));
    };
    add("mean_variance", var.mean());
    add("min_variance", var.minCoeff());
    add("max_variance", var.maxCoeff());
    add("frobenius", frobenius);
}

VarianceCellResult run_variance_cell(const VarianceConfig& c, Index dim, const MethodSpec& spec,
                                     std::uint64_t seed) {
    const GaussianTarget target = GaussianTarget::standard(dim);
    const bool gaussian_guide = spec.method == Method::Smi || spec.method == Method::Ovi;
    const Index m = spec.particles.value_or(
        spec.method == Method::Ovi || spec.method == Method::Map ? 1 : 20);
    const Guide guide = gaussian_guide ? Guide(GaussianGuide(dim)) : Guide(PointMassGuide(dim));

    auto gen = stream(seed, StreamPurpose::Initialization, static_cast<std::uint64_t>(dim));
    Matrix init;
    if (gaussian_guide) {
        init.resize(m, 2 * dim);
        init.leftCols(dim) = uniform_matrix(gen, m, dim, -c.smi_loc_half_width, c.smi_loc_half_width);
        init.rightCols(dim).setConstant(inverse_softplus(c.smi_init_scale));
    } else {
        init = uniform_matrix(gen, m, dim, -c.svgd_init_half_width, c.svgd_init_half_width);
    }

    EngineConfig ec;
    ec.method = spec.method;
    ec.alpha = c.alpha;
    ec.optimizer = gaussian_guide ? c.smi_optimizer : c.svgd_optimizer;
    ec.n_draws = c.n_draws;
    ec.estimator = c.estimator;
    ec.max_steps = c.max_steps;
    ec.stop_on_convergence = false;

    ParticleEnsemble ensemble(std::move(init), seed);
    const RunRecord record = run_inference(target, guide, ec, ensemble);

    const std::string cell = "dim=" + std::to_string(dim);
    const MetricRow proto{"variance", cell, spec.label(), seed, "", 0.0};
    VarianceCellResult out;
    out.snapshot = {cell, spec.label(), seed, layout_of(guide), ensemble.particles};

    double mean_variance = 0.0;
    double frobenius = 0.0;
    if (gaussian_guide) {
        const auto& g = std::get<GaussianGuide>(guide);
        const Moments mom = mixture_moments(g, ensemble.particles);
        const Vector var = mom.covariance.diagonal();
        mean_variance = var.mean();
        frobenius = frobenius_to_identity_cov(mom.covariance);
        add_spread_metrics(out.metrics, proto, var, frobenius, "");

        // Pooled guide draws: uniform particle, then one draw from its guide.
        Matrix pooled(c.sample_draws, dim);
        std::uniform_int_distribution<Index> pick(0, m - 1);
        for (Index s = 0; s < c.sample_draws; ++s) {
            auto dg = stream(seed, StreamPurpose::Predictive, static_cast<std::uint64_t>(dim),
                             static_cast<std::uint64_t>(s));
            const Vector psi = ensemble.particles.row(pick(dg)).transpose();
            pooled.row(s) = g.sample(psi, 1, dg).row(0);
        }
        add_spread_metrics(out.metrics, proto, dimension_marginal_variance(pooled),
                           frobenius_to_identity(pooled), "_sampled");
    } else {
        Vector var = Vector::Zero(dim);
        Matrix cov = Matrix::Zero(dim, dim);
        if (m >= 2) {
            var = dimension_marginal_variance(ensemble.particles);
            cov = sample_covariance(ensemble.particles);
        }
        mean_variance = var.mean();
        frobenius = frobenius_to_identity_cov(cov);
        add_spread_metrics(out.metrics, proto, var, frobenius, "");
    }
    MetricRow steps = proto;
    steps.metric = "steps";
    steps.value = static_cast<double>(record.steps.size());
    out.metrics.push_back(steps);
    MetricRow norm = proto;
    norm.metric = "final_force_norm";
    norm.value = record.steps.empty() ? 0.0 : record.steps.back().force_norm;
    out.metrics.push_back(norm);

    std::ostringstream log;
    log << "variance " << cell << " method=" << spec.label() << " seed=" << seed
        << " mean_variance=" << mean_variance << " frobenius=" << frobenius;
    out.log = log.str();
    return out;
}

}  // namespace

ExperimentOutput run_variance_experiment(const VarianceConfig& config) {
    config.validate();
    struct Key {
        Index dim;
        MethodSpec spec;
        std::uint64_t seed;
    };
    std::vector<Key> keys;
    for (Index d : config.dims)
        for (const auto& m : config.methods)
            for (auto s : config.seeds) keys.push_back({d, MethodSpec::parse(m), s});

    const auto results = run_cells<VarianceCellResult>(
        keys.size(), config.jobs, [&](std::size_t i) {
            return run_variance_cell(config, keys[i].dim, keys[i].spec, keys[i].seed);
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
