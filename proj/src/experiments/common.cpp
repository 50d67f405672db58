#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "smi/experiments.hpp"
#include "smi/rng.hpp"

#ifndef SMI_VERSION
#define SMI_VERSION "unknown"
#endif

namespace smi {

std::string to_string(Scale scale) { return scale == Scale::Full ? "full" : "desk"; }

Matrix initial_particles(const Guide& guide, Index m, double half_width, double guide_scale,
                         std::uint64_t seed) {
    const Index d = latent_dim(guide);
    auto gen = stream(seed, StreamPurpose::Initialization, static_cast<std::uint64_t>(d));
    Matrix init = uniform_matrix(gen, m, particle_dim(guide), -half_width, half_width);
    if (guide_scale > 0.0 && std::holds_alternative<GaussianGuide>(guide))
        init.rightCols(d).setConstant(inverse_softplus(guide_scale));
    return init;
}

Scale scale_from_string(const std::string& name) {
    if (name == "full") return Scale::Full;
    if (name == "desk") return Scale::Desk;
    throw InvalidConfig("scale must be 'full' or 'desk', got '" + name + "'");
}

MethodSpec MethodSpec::parse(const std::string& label) {
    const auto dash = label.find('-');
    MethodSpec spec{method_from_string(label.substr(0, dash)), std::nullopt};
    if (dash != std::string::npos) {
        const std::string count = label.substr(dash + 1);
        std::size_t used = 0;
        long long m = 0;
        try {
            m = std::stoll(count, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != count.size() || m < 1)
            throw InvalidConfig("bad particle count in method label '" + label + "'");
        spec.particles = static_cast<Index>(m);
    }
    if ((spec.method == Method::Ovi || spec.method == Method::Map) && spec.particles &&
        *spec.particles != 1)
        throw InvalidConfig("method '" + label + "' runs a single particle");
    return spec;
}

std::string MethodSpec::label() const {
    std::string out = to_string(method);
    if (particles) out += "-" + std::to_string(*particles);
    return out;
}

std::string config_hash(const Json& config) {
    const std::string text = config.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string version_string() { return SMI_VERSION; }

namespace {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_atomically(const std::filesystem::path& path, const std::string& text) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f << text;
        if (!f) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::string metrics_csv(const std::vector<MetricRow>& rows, const std::string& hash) {
    std::ostringstream out;
    out << "experiment,cell,method,seed,metric,value,version,config_hash\n";
    const std::string version = csv_field(version_string());
    for (const auto& r : rows) {
        out << csv_field(r.experiment) << ',' << csv_field(r.cell) << ',' << csv_field(r.method)
            << ',' << r.seed << ',' << csv_field(r.metric) << ',' << format_double(r.value) << ','
            << version << ',' << hash << '\n';
    }
    return out.str();
}

void write_outputs(const std::filesystem::path& out_dir, const ExperimentOutput& output,
                   const Json& config) {
    std::filesystem::create_directories(out_dir);
    const std::string hash = config_hash(config);
    write_atomically(out_dir / "metrics.csv", metrics_csv(output.metrics, hash));
    write_atomically(out_dir / "predictive.json", output.predictive.dump(1) + "\n");

    Json snaps = Json::array();
    for (const auto& p : output.particles) {
        Json j = particles_to_json(p.particles, p.layout);
        j["cell"] = p.cell;
        j["method"] = p.method;
        j["seed"] = p.seed;
        snaps.push_back(std::move(j));
    }
    write_atomically(out_dir / "particles.json", snaps.dump() + "\n");

    std::ostringstream log;
    log << "version " << version_string() << "\n";
    log << "config_hash " << hash << "\n";
    log << "config " << config.dump() << "\n";
    log << "nll_normalization per-point (-LPPD / n)\n";
    for (const auto& line : output.log) log << line << "\n";
    write_atomically(out_dir / "run.log", log.str());
}

}  // namespace smi
