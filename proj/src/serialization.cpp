#include "smi/serialization.hpp"

namespace smi {

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j) {
    if (!j.is_array()) throw InvalidInput("matrix JSON must be an array of rows");
    const auto rows = static_cast<Index>(j.size());
    const Index cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
            throw InvalidInput("ragged matrix JSON");
        for (Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

Json to_json(const OptimizerConfig& c) {
    return {{"kind", to_string(c.kind)},
            {"learning_rate", c.learning_rate},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epsilon", c.epsilon},
            {"adagrad_epsilon", c.adagrad_epsilon},
            {"adagrad_initial_accumulator", c.adagrad_initial_accumulator}};
}

OptimizerConfig optimizer_config_from_json(const Json& j) {
    OptimizerConfig c;
    c.kind = optimizer_kind_from_string(j.at("kind").get<std::string>());
    c.learning_rate = j.at("learning_rate").get<double>();
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.adagrad_epsilon = j.value("adagrad_epsilon", c.adagrad_epsilon);
    c.adagrad_initial_accumulator =
        j.value("adagrad_initial_accumulator", c.adagrad_initial_accumulator);
    return c;
}

Json to_json(const EngineConfig& c) {
    Json j = {{"method", to_string(c.method)},
              {"alpha", c.alpha},
              {"optimizer", to_json(c.optimizer)},
              {"n_draws", c.n_draws},
              {"max_steps", c.max_steps},
              {"estimator", to_string(c.estimator)},
              {"ovi_via_nsvgd", c.ovi_via_nsvgd},
              {"stop_on_convergence", c.stop_on_convergence},
              {"slow_window", c.slow_window},
              {"fast_window", c.fast_window},
              {"elbo_every", c.elbo_every},
              {"elbo_draws", c.elbo_draws},
              {"repulsion_sign", c.repulsion_sign}};
    j["batch_size"] = c.batch_size ? Json(*c.batch_size) : Json(nullptr);
    if (c.anneal)
        j["anneal"] = {{"cycle_length", c.anneal->cycle_length},
                       {"n_cycles", c.anneal->n_cycles},
                       {"power", c.anneal->power}};
    else
        j["anneal"] = nullptr;
    return j;
}

EngineConfig engine_config_from_json(const Json& j) {
    EngineConfig c;
    c.method = method_from_string(j.at("method").get<std::string>());
    c.alpha = j.at("alpha").get<double>();
    c.optimizer = optimizer_config_from_json(j.at("optimizer"));
    c.n_draws = j.at("n_draws").get<Index>();
    c.max_steps = j.at("max_steps").get<Index>();
    c.estimator = force_estimator_from_string(j.value("estimator", std::string("score")));
    c.ovi_via_nsvgd = j.value("ovi_via_nsvgd", false);
    c.stop_on_convergence = j.value("stop_on_convergence", false);
    c.slow_window = j.value("slow_window", c.slow_window);
    c.fast_window = j.value("fast_window", c.fast_window);
    c.elbo_every = j.value("elbo_every", c.elbo_every);
    c.elbo_draws = j.value("elbo_draws", c.elbo_draws);
    c.repulsion_sign = j.value("repulsion_sign", 1.0);
    if (j.contains("batch_size") && !j["batch_size"].is_null())
        c.batch_size = j["batch_size"].get<Index>();
    if (j.contains("anneal") && !j["anneal"].is_null()) {
        const auto& a = j["anneal"];
        c.anneal = AnnealSchedule{a.at("cycle_length").get<Index>(), a.at("n_cycles").get<Index>(),
                                  a.at("power").get<double>()};
    }
    c.validate();
    return c;
}

Json particles_to_json(const Matrix& particles, const ParticleLayout& layout) {
    if (layout.loc_dim + layout.raw_scale_dim != particles.cols())
        throw InvalidInput("layout does not match particle width");
    return {{"layout", {{"loc_dim", layout.loc_dim}, {"raw_scale_dim", layout.raw_scale_dim}}},
            {"particles", matrix_to_json(particles)}};
}

Matrix particles_from_json(const Json& j, ParticleLayout* layout) {
    const ParticleLayout l{j.at("layout").at("loc_dim").get<Index>(),
                           j.at("layout").at("raw_scale_dim").get<Index>()};
    Matrix p = matrix_from_json(j.at("particles"));
    if (p.rows() > 0 && p.cols() != l.loc_dim + l.raw_scale_dim)
        throw InvalidInput("particle width disagrees with layout");
    if (layout) *layout = l;
    return p;
}

Json make_checkpoint(const EngineConfig& config, const ParticleEnsemble& ensemble,
                     const Optimizer& optimizer) {
    return {{"config", to_json(config)},
            {"step", ensemble.step},
            {"seed", ensemble.seed},
            {"particles", matrix_to_json(ensemble.particles)},
            {"optimizer",
             {{"iterations", optimizer.iterations()},
              {"first_moment", matrix_to_json(optimizer.first_moment())},
              {"second_moment", matrix_to_json(optimizer.second_moment())}}}};
}

Checkpoint restore_checkpoint(const Json& j) {
    EngineConfig config = engine_config_from_json(j.at("config"));
    ParticleEnsemble ensemble(matrix_from_json(j.at("particles")), j.at("seed").get<std::uint64_t>());
    ensemble.step = j.at("step").get<Index>();
    Optimizer optimizer(config.optimizer, ensemble.size(), ensemble.particle_dim());
    const auto& o = j.at("optimizer");
    optimizer.restore(o.at("iterations").get<long long>(), matrix_from_json(o.at("first_moment")),
                      matrix_from_json(o.at("second_moment")));
    return {std::move(config), std::move(ensemble), std::move(optimizer)};
}

}  // namespace smi
