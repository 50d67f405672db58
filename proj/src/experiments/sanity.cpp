#include <sstream>

#include "smi/experiments.hpp"
#include "smi/invariants.hpp"
#include "smi/rng.hpp"

namespace smi {

std::string to_string(Fault fault) {
    switch (fault) {
        case Fault::None: return "none";
        case Fault::RepulsionSign: return "repulsion-sign";
        case Fault::MinibatchExponent: return "minibatch-exponent";
    }
    return "?";
}

Fault fault_from_string(const std::string& name) {
    if (name == "none") return Fault::None;
    if (name == "repulsion-sign") return Fault::RepulsionSign;
    if (name == "minibatch-exponent") return Fault::MinibatchExponent;
    throw InvalidConfig("unknown fault '" + name + "'");
}

void SanityConfig::validate() const {
    if (fd_points < 1) throw InvalidConfig("sanity.fd_points must be >= 1");
    if (reduction_steps < 1) throw InvalidConfig("sanity.reduction_steps must be >= 1");
}

Json to_json(const SanityConfig& c) {
    return {{"experiment", "sanity"},
            {"seed", c.seed},
            {"fd_points", c.fd_points},
            {"reduction_steps", c.reduction_steps},
            {"fault", to_string(c.fault)}};
}

namespace {

SanityCheck reduction_check(const std::string& name, const TrajectoryComparison& cmp) {
    std::ostringstream s;
    s << cmp.steps << " steps";
    if (!cmp.identical)
        s << ", first mismatch at step " << cmp.first_mismatch << ", max |diff| " << cmp.max_abs_diff;
    else
        s << ", bit-identical";
    return {name, cmp.identical, s.str()};
}

SanityCheck tolerance_check(const std::string& name, double error, double tol) {
    std::ostringstream s;
    s << "worst relative error " << error << " (tolerance " << tol << ")";
    return {name, error <= tol, s.str()};
}

}  // namespace

std::vector<SanityCheck> run_sanity_checks(const SanityConfig& c) {
    c.validate();
    const std::uint64_t seed = c.seed;
    const double sign = c.fault == Fault::RepulsionSign ? -1.0 : 1.0;
    std::vector<SanityCheck> out;

    out.push_back(reduction_check("reduction: SMI with point-mass guides equals SVGD",
                                  compare_smi_point_mass_with_svgd(c.reduction_steps, 5, seed, sign)));
    out.push_back(reduction_check("reduction: one-particle SMI equals OVI",
                                  compare_single_smi_with_ovi(c.reduction_steps, seed)));
    out.push_back(reduction_check("reduction: OVI through the particle step equals SMI",
                                  compare_single_smi_with_ovi(c.reduction_steps, seed, true)));
    out.push_back(reduction_check("reduction: one-particle SVGD equals MAP",
                                  compare_single_svgd_with_map(c.reduction_steps, seed)));

    const Index n = c.fd_points;
    out.push_back(tolerance_check("gradient: standard Gaussian target",
                                  model_gradient_error(GaussianTarget::standard(5), n, seed), 1e-5));
    out.push_back(tolerance_check("gradient: conjugate Gaussian model",
                                  model_gradient_error(random_conjugate_model(3, 6, seed), n, seed),
                                  1e-5));
    out.push_back(tolerance_check(
        "gradient: tanh BNN, fixed noise",
        model_gradient_error(random_bnn(2, 5, 10, Activation::Tanh, NoiseModel::fixed(0.5), seed), n,
                             seed),
        1e-5));
    out.push_back(tolerance_check(
        "gradient: relu BNN, latent precision",
        model_gradient_error(
            random_bnn(3, 4, 10, Activation::Relu, NoiseModel::gamma_precision(), seed), n, seed),
        1e-5));
    out.push_back(tolerance_check("gradient: Gaussian guide", guide_gradient_error(4, n, seed), 1e-6));
    out.push_back(tolerance_check("gradient: RBF kernel", kernel_gradient_error(5, n, seed), 1e-6));

    {
        BnnRegressionModel bnn =
            random_bnn(2, 3, 6, Activation::Tanh, NoiseModel::fixed(0.5), seed);
        bnn.inject_wrong_minibatch_exponent(c.fault == Fault::MinibatchExponent);
        auto gen = stream(seed, StreamPurpose::Initialization, 51);
        const Vector theta = standard_normal_vector(gen, bnn.latent_dim());
        double worst = 0.0;
        for (Index size = 1; size <= bnn.data_size(); ++size) {
            const MinibatchCheck mc = minibatch_expectation_check(bnn, theta, size);
            worst = std::max(worst, std::abs(mc.estimator_mean - mc.exact_value) /
                                        std::max(1.0, std::abs(mc.exact_value)));
        }
        out.push_back(tolerance_check("minibatch: subset average equals full log joint", worst, 1e-10));
    }

    {
        bool holds = true;
        std::ostringstream s;
        for (Index i = 0; i < 5; ++i) {
            const auto model = random_conjugate_model(1 + i % 3, 4 + i, mix_seed(seed, 60 + i));
            const ElboBound b = elbo_bound_check(model, 1 + i % 2, mix_seed(seed, 70 + i), 1000, 40, 2500);
            holds = holds && b.holds();
            s << (i ? "; " : "") << "gap " << b.log_evidence - b.elbo_mean << " se " << b.standard_error;
        }
        out.push_back({"ELBO stays below the log evidence", holds, s.str()});
    }

    {
        // 20 SVGD particles on a 1D standard Gaussian spread to unit variance.
        const GaussianTarget target = GaussianTarget::standard(1);
        auto gen = stream(seed, StreamPurpose::Initialization, 1);
        ParticleEnsemble ens(uniform_matrix(gen, 20, 1, -20.0, 20.0), seed);
        EngineConfig ec;
        ec.method = Method::Svgd;
        ec.optimizer = {OptimizerKind::Adam, 0.05};
        ec.max_steps = 3000;
        ec.repulsion_sign = sign;
        run_inference(target, PointMassGuide(1), ec, ens);
        const double v = dimension_marginal_variance(ens.particles)(0);
        std::ostringstream s;
        s << "particle variance " << v << " (expected within [0.5, 1.5])";
        out.push_back({"variance: SVGD recovers unit variance in 1D", v >= 0.5 && v <= 1.5, s.str()});
    }
    return out;
}

ExperimentOutput run_sanity(const SanityConfig& config) {
    ExperimentOutput out;
    const auto checks = run_sanity_checks(config);
    for (const auto& c : checks) {
        out.metrics.push_back({"sanity", c.name, "-", config.seed, "passed", c.passed ? 1.0 : 0.0});
        out.log.push_back(std::string(c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail);
        out.ok = out.ok && c.passed;
    }
    return out;
}

}  // namespace smi
