#include "smi/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace smi {

namespace {

/// Typed access to one TOML table that remembers which keys were read, so
/// leftovers can be reported as unknown.
class Reader {
public:
    Reader(const toml::table& table, std::string path) : table_(table), path_(std::move(path)) {}

    std::string field(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    const toml::node* node(const std::string& key) {
        seen_.insert(key);
        return table_.get(key);
    }

    void read(const std::string& key, double& out) {
        if (const auto* n = node(key)) {
            if (auto v = n->value<double>()) out = *v;
            else throw InvalidConfig(field(key) + ": expected a number");
        }
    }

    void read(const std::string& key, Index& out) {
        if (const auto* n = node(key)) {
            if (auto v = n->value<std::int64_t>(); v && n->is_integer()) out = static_cast<Index>(*v);
            else throw InvalidConfig(field(key) + ": expected an integer");
        }
    }

    void read(const std::string& key, std::uint64_t& out) {
        Index v = -1;
        if (table_.contains(key)) {
            read(key, v);
            if (v < 0) throw InvalidConfig(field(key) + ": expected a nonnegative integer");
            out = static_cast<std::uint64_t>(v);
        }
    }

    void read(const std::string& key, unsigned& out) {
        Index v = -1;
        if (table_.contains(key)) {
            read(key, v);
            if (v < 1) throw InvalidConfig(field(key) + ": expected a positive integer");
            out = static_cast<unsigned>(v);
        }
    }

    void read(const std::string& key, bool& out) {
        if (const auto* n = node(key)) {
            if (auto v = n->value<bool>()) out = *v;
            else throw InvalidConfig(field(key) + ": expected a boolean");
        }
    }

    void read(const std::string& key, std::string& out) {
        if (const auto* n = node(key)) {
            if (auto v = n->value<std::string>()) out = *v;
            else throw InvalidConfig(field(key) + ": expected a string");
        }
    }

    template <typename T>
    void read(const std::string& key, std::vector<T>& out) {
        const auto* n = node(key);
        if (!n) return;
        const auto* arr = n->as_array();
        if (!arr) throw InvalidConfig(field(key) + ": expected an array");
        std::vector<T> values;
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const auto& item = *arr->get(i);
            const std::string where = field(key) + "[" + std::to_string(i) + "]";
            if constexpr (std::is_same_v<T, std::string>) {
                auto v = item.value<std::string>();
                if (!v) throw InvalidConfig(where + ": expected a string");
                values.push_back(*v);
            } else {
                auto v = item.value<std::int64_t>();
                if (!v || !item.is_integer()) throw InvalidConfig(where + ": expected an integer");
                if constexpr (std::is_unsigned_v<T>)
                    if (*v < 0) throw InvalidConfig(where + ": expected a nonnegative integer");
                values.push_back(static_cast<T>(*v));
            }
        }
        out = std::move(values);
    }

    template <typename F>
    void read_table(const std::string& key, F&& fn) {
        const auto* n = node(key);
        if (!n) return;
        const auto* t = n->as_table();
        if (!t) throw InvalidConfig(field(key) + ": expected a table");
        Reader sub(*t, field(key));
        fn(sub);
        sub.finish();
    }

    void finish() const {
        for (const auto& [k, v] : table_) {
            const std::string key(k.str());
            if (!seen_.count(key)) throw InvalidConfig(field(key) + ": unknown key");
        }
    }

private:
    const toml::table& table_;
    std::string path_;
    std::set<std::string> seen_;
};

toml::table parse_document(const std::string& text) {
    try {
        return toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream s;
        s << "TOML parse error at line " << e.source().begin.line << ", column "
          << e.source().begin.column << ": " << e.description();
        throw InvalidConfig(s.str());
    }
}

void read_optimizer(Reader& r, const std::string& key, OptimizerConfig& out) {
    r.read_table(key, [&](Reader& t) {
        std::string kind = to_string(out.kind);
        t.read("kind", kind);
        try {
            out.kind = optimizer_kind_from_string(kind);
        } catch (const InvalidConfig&) {
            throw InvalidConfig(t.field("kind") + ": unknown optimizer '" + kind + "'");
        }
        t.read("learning_rate", out.learning_rate);
        t.read("beta1", out.beta1);
        t.read("beta2", out.beta2);
        t.read("epsilon", out.epsilon);
        t.read("adagrad_epsilon", out.adagrad_epsilon);
        t.read("adagrad_initial_accumulator", out.adagrad_initial_accumulator);
    });
}

ForceEstimator read_estimator(Reader& r, ForceEstimator fallback) {
    std::string name = to_string(fallback);
    r.read("estimator", name);
    try {
        return force_estimator_from_string(name);
    } catch (const InvalidConfig&) {
        throw InvalidConfig(r.field("estimator") + ": expected 'score' or 'pathwise'");
    }
}

Activation activation_from_string(const std::string& name, const std::string& field) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw InvalidConfig(field + ": activation must be 'tanh' or 'relu'");
}

std::string activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

void read_regression_fields(Reader& r, Regression1dConfig& c) {
    r.read("seeds", c.seeds);
    r.read("data_seed", c.data_seed);
    r.read("n_per_cluster", c.n_per_cluster);
    r.read("noise_sd", c.noise_sd);
    r.read("particles", c.particles);
    r.read("max_steps", c.max_steps);
    r.read("ovi_steps", c.ovi_steps);
    r.read("n_draws", c.n_draws);
    r.read("predictive_draws", c.predictive_draws);
    r.read("init_half_width", c.init_half_width);
    r.read("guide_init_scale", c.guide_init_scale);
    read_optimizer(r, "optimizer", c.optimizer);
    c.estimator = read_estimator(r, c.estimator);
    std::string act = activation_name(c.activation);
    r.read("activation", act);
    c.activation = activation_from_string(act, r.field("activation"));
    r.read("stop_on_convergence", c.stop_on_convergence);
    r.read("hdi_mass", c.hdi_mass);
    r.read("grid_points", c.grid_points);
    r.read("jobs", c.jobs);
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidConfig("cannot read config file " + path.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

VarianceConfig parse_variance_config(const std::string& text, Scale scale) {
    const toml::table doc = parse_document(text);
    VarianceConfig c;
    c.apply_scale(scale);
    Reader r(doc, "variance");
    r.read("dims", c.dims);
    r.read("methods", c.methods);
    r.read("seeds", c.seeds);
    r.read("max_steps", c.max_steps);
    r.read("svgd_init_half_width", c.svgd_init_half_width);
    r.read("smi_loc_half_width", c.smi_loc_half_width);
    r.read("smi_init_scale", c.smi_init_scale);
    read_optimizer(r, "svgd_optimizer", c.svgd_optimizer);
    read_optimizer(r, "smi_optimizer", c.smi_optimizer);
    r.read("n_draws", c.n_draws);
    c.estimator = read_estimator(r, c.estimator);
    r.read("sample_draws", c.sample_draws);
    r.read("alpha", c.alpha);
    r.read("jobs", c.jobs);
    r.finish();
    c.validate();
    return c;
}

Regression1dConfig parse_regression1d_config(const std::string& text, Scale scale) {
    const toml::table doc = parse_document(text);
    Regression1dConfig c;
    c.apply_scale(scale);
    Reader r(doc, "reg1d");
    r.read("hidden_sizes", c.hidden_sizes);
    r.read("methods", c.methods);
    read_regression_fields(r, c);
    r.finish();
    c.validate();
    return c;
}

RecoveryConfig parse_recovery_config(const std::string& text, Scale scale) {
    const toml::table doc = parse_document(text);
    RecoveryConfig c;
    c.apply_scale(scale);
    Reader r(doc, "recovery");
    r.read("hidden_sizes", c.hidden_sizes);
    r.read("smi_particles", c.smi_particles);
    r.read("max_particles", c.max_particles);
    read_regression_fields(r, c.base);
    r.finish();
    c.validate();
    return c;
}

CsvRegressionConfig parse_csv_regression_config(
    const std::string& text, Scale scale, const std::filesystem::path& base_dir,
    const std::optional<std::filesystem::path>& data_override) {
    const toml::table doc = parse_document(text);
    CsvRegressionConfig c;
    c.apply_scale(scale);
    Reader r(doc, "csvreg");
    std::string path;
    r.read("data_path", path);
    if (!path.empty()) {
        c.data_path = path;
        if (c.data_path.is_relative() && !base_dir.empty()) c.data_path = base_dir / c.data_path;
    }
    r.read("target_column", c.target_column);
    r.read("standardize_inputs", c.standardize_inputs);
    r.read("test_fraction", c.test_fraction);
    r.read("hidden_dim", c.hidden_dim);
    std::string act = activation_name(c.activation);
    r.read("activation", act);
    c.activation = activation_from_string(act, r.field("activation"));
    r.read("methods", c.methods);
    r.read("seeds", c.seeds);
    r.read("particles", c.particles);
    r.read("max_steps", c.max_steps);
    r.read("n_draws", c.n_draws);
    c.estimator = read_estimator(r, c.estimator);
    r.read("predictive_draws", c.predictive_draws);
    Index batch = c.batch_size.value_or(0);
    r.read("batch_size", batch);
    c.batch_size = batch > 0 ? std::optional<Index>(batch) : std::nullopt;
    r.read("init_half_width", c.init_half_width);
    r.read("guide_init_scale", c.guide_init_scale);
    read_optimizer(r, "optimizer", c.optimizer);
    r.read("stop_on_convergence", c.stop_on_convergence);
    r.read("jobs", c.jobs);
    r.finish();
    if (data_override) c.data_path = *data_override;
    c.validate();
    return c;
}

SanityConfig parse_sanity_config(const std::string& text) {
    const toml::table doc = parse_document(text);
    SanityConfig c;
    Reader r(doc, "sanity");
    r.read("seed", c.seed);
    r.read("fd_points", c.fd_points);
    r.read("reduction_steps", c.reduction_steps);
    std::string fault = to_string(c.fault);
    r.read("fault", fault);
    c.fault = fault_from_string(fault);
    r.finish();
    c.validate();
    return c;
}

}  // namespace smi
