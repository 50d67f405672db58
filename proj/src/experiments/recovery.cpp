#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "smi/experiments.hpp"
#include "smi/rng.hpp"

namespace smi {

RecoveryConfig::RecoveryConfig() { base.methods = {"smi", "svgd"}; }

void RecoveryConfig::validate() const {
    base.validate();
    if (hidden_sizes.empty()) throw InvalidConfig("recovery.hidden_sizes must be non-empty");
    for (Index h : hidden_sizes)
        if (h < 1) throw InvalidConfig("recovery.hidden_sizes entries must be >= 1");
    if (smi_particles < 1) throw InvalidConfig("recovery.smi_particles must be >= 1");
    if (max_particles < 1) throw InvalidConfig("recovery.max_particles must be >= 1");
}

void RecoveryConfig::apply_scale(Scale scale) { base.apply_scale(scale); }

Json to_json(const RecoveryConfig& c) {
    Json base = to_json(c.base);
    base.erase("hidden_sizes");
    base.erase("methods");
    base.erase("experiment");
    return {{"experiment", "recovery"},
            {"base", base},
            {"hidden_sizes", c.hidden_sizes},
            {"smi_particles", c.smi_particles},
            {"max_particles", c.max_particles}};
}

double median_recovery(std::vector<double> values) {
    if (values.empty()) throw InvalidInput("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    const double lo = values[n / 2 - 1];
    const double hi = values[n / 2];
    if (std::isinf(hi)) return hi;
    return 0.5 * (lo + hi);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct TrialResult {
    std::vector<MetricRow> metrics;
    std::vector<double> recovery;  // per region, +inf when at limit
    std::string log;
};

TrialResult run_trial(const RecoveryConfig& c, const WaveData& data, Index hidden,
                      std::uint64_t seed) {
    const Regression1dConfig& b = c.base;
    const BnnRegressionModel model(data.train, hidden, b.activation, NoiseModel::fixed(b.noise_sd));
    const std::string cell_base = "hidden=" + std::to_string(hidden);

    const MethodSpec smi{Method::Smi, c.smi_particles};
    const FittedModel smi_fit = fit_wave_model(b, model, smi, seed);

    std::vector<double> smi_lppd;
    for (const auto& [region, eval] : data.eval)
        smi_lppd.push_back(
            score_region(b, model, smi_fit, eval, mix_seed(seed, 200 + static_cast<int>(region)))
                .lppd);

    // SVGD LPPD per region for each particle count, fitted once per count.
    std::map<Index, std::vector<double>> svgd_cache;
    auto svgd_lppd = [&](Index count) -> const std::vector<double>& {
        auto it = svgd_cache.find(count);
        if (it != svgd_cache.end()) return it->second;
        const FittedModel fit = fit_wave_model(b, model, MethodSpec{Method::Svgd, count}, seed);
        std::vector<double> l;
        for (const auto& [region, eval] : data.eval)
            l.push_back(
                score_region(b, model, fit, eval, mix_seed(seed, 300 + static_cast<int>(region)))
                    .lppd);
        return svgd_cache.emplace(count, std::move(l)).first->second;
    };

    TrialResult out;
    std::ostringstream log;
    log << "recovery " << cell_base << " seed=" << seed;
    for (std::size_t r = 0; r < data.eval.size(); ++r) {
        const WaveRegion region = data.eval[r].first;
        const RecoveryPoint rp = recovery_point(
            smi_lppd[r], [&](Index count) { return svgd_lppd(count)[r]; }, c.max_particles);
        const std::string cell = cell_base + "/region=" + to_string(region);
        const double value = rp.at_limit() ? kInf : static_cast<double>(*rp.particles);
        out.recovery.push_back(value);
        out.metrics.push_back({"recovery", cell, smi.label(), seed, "lppd", smi_lppd[r]});
        out.metrics.push_back({"recovery", cell, "svgd", seed, "recovery_point", value});
        log << " " << to_string(region) << "=" << rp.to_string();
    }
    for (const auto& [count, l] : svgd_cache)
        for (std::size_t r = 0; r < l.size(); ++r)
            out.metrics.push_back({"recovery",
                                   cell_base + "/region=" + to_string(data.eval[r].first),
                                   "svgd-" + std::to_string(count), seed, "lppd", l[r]});
    out.log = log.str();
    return out;
}

}  // namespace

ExperimentOutput run_recovery(const RecoveryConfig& config) {
    config.validate();
    const WaveData data = make_wave_data(config.base);
    struct Key {
        Index hidden;
        std::uint64_t seed;
    };
    std::vector<Key> keys;
    for (Index h : config.hidden_sizes)
        for (auto s : config.base.seeds) keys.push_back({h, s});

    const auto trials = run_cells<TrialResult>(keys.size(), config.base.jobs, [&](std::size_t i) {
        return run_trial(config, data, keys[i].hidden, keys[i].seed);
    });

    ExperimentOutput out;
    for (const auto& t : trials) {
        out.metrics.insert(out.metrics.end(), t.metrics.begin(), t.metrics.end());
        out.log.push_back(t.log);
    }
    Json table = Json::array();
    std::size_t k = 0;
    for (Index h : config.hidden_sizes) {
        std::vector<std::vector<double>> per_region(data.eval.size());
        for (std::size_t s = 0; s < config.base.seeds.size(); ++s, ++k)
            for (std::size_t r = 0; r < data.eval.size(); ++r)
                per_region[r].push_back(trials[k].recovery[r]);
        for (std::size_t r = 0; r < data.eval.size(); ++r) {
            const double med = median_recovery(per_region[r]);
            const std::string cell =
                "hidden=" + std::to_string(h) + "/region=" + to_string(data.eval[r].first);
            out.metrics.push_back({"recovery", cell, "svgd", 0, "median_recovery_point", med});
            const std::string shown =
                std::isinf(med) ? ">" + std::to_string(config.max_particles) : [&] {
                    std::ostringstream s;
                    s << med;
                    return s.str();
                }();
            out.log.push_back("median " + cell + " R=" + shown);
            table.push_back({{"hidden", h},
                             {"region", to_string(data.eval[r].first)},
                             {"median_recovery_point", shown}});
        }
    }
    out.predictive = {{"recovery_table", table}};
    return out;
}

}  // namespace smi
