#pragma once

#include <json.hpp>

#include "smi/engine.hpp"
#include "smi/guide.hpp"

namespace smi {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json to_json(const OptimizerConfig& config);
OptimizerConfig optimizer_config_from_json(const Json& j);

Json to_json(const EngineConfig& config);
EngineConfig engine_config_from_json(const Json& j);

/// {"layout": {"loc_dim", "raw_scale_dim"}, "particles": [[...], ...]}
Json particles_to_json(const Matrix& particles, const ParticleLayout& layout);
Matrix particles_from_json(const Json& j, ParticleLayout* layout = nullptr);

/// Everything needed to resume a run bit for bit.
struct Checkpoint {
    EngineConfig config;
    ParticleEnsemble ensemble;
    Optimizer optimizer;
};

Json make_checkpoint(const EngineConfig& config, const ParticleEnsemble& ensemble,
                     const Optimizer& optimizer);
Checkpoint restore_checkpoint(const Json& j);

}  // namespace smi
