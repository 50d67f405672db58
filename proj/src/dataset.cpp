#include "smi/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "smi/rng.hpp"

namespace smi {

double wave_mean(double x) noexcept {
    return 1.5 * std::sin(2.0 * std::numbers::pi * (x + 2.0 / 3.0)) + 3.0 * x + 1.0;
}

std::vector<Interval> region_intervals(WaveRegion region) {
    switch (region) {
        case WaveRegion::In: return {{-1.5, -0.5}, {1.3, 1.7}};
        case WaveRegion::Between: return {{-0.5, 1.3}};
        case WaveRegion::Entire: return {{-2.0, 2.0}};
    }
    throw InvalidInput("unknown region");
}

Index region_eval_size(WaveRegion region) {
    switch (region) {
        case WaveRegion::In: return 20;
        case WaveRegion::Between: return 60;
        case WaveRegion::Entire: return 120;
    }
    throw InvalidInput("unknown region");
}

std::string to_string(WaveRegion region) {
    switch (region) {
        case WaveRegion::In: return "in";
        case WaveRegion::Between: return "between";
        case WaveRegion::Entire: return "entire";
    }
    return "?";
}

WaveRegion wave_region_from_string(const std::string& name) {
    if (name == "in") return WaveRegion::In;
    if (name == "between") return WaveRegion::Between;
    if (name == "entire") return WaveRegion::Entire;
    throw InvalidConfig("unknown region '" + name + "'");
}

Dataset sample_wave_points(const std::vector<Interval>& intervals, Index n, std::uint64_t seed,
                           double noise_sd) {
    if (intervals.empty()) throw InvalidInput("no sampling intervals");
    double total = 0.0;
    for (const auto& iv : intervals) {
        if (!(iv.high > iv.low)) throw InvalidInput("empty sampling interval");
        total += iv.length();
    }
    Matrix x(n, 1);
    Matrix y(n, 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < n; ++i) {
        auto gen = stream(seed, StreamPurpose::Data, 0, static_cast<std::uint64_t>(i));
        // Position along the concatenated intervals.
        double u = unit(gen) * total;
        double xi = intervals.back().high;
        for (const auto& iv : intervals) {
            if (u < iv.length()) {
                xi = iv.low + u;
                break;
            }
            u -= iv.length();
        }
        x(i, 0) = xi;
        y(i, 0) = wave_mean(xi) + noise_sd * normal(gen);
    }
    return Dataset(std::move(x), std::move(y));
}

Dataset generate_wave_dataset(Index n_per_cluster, std::uint64_t seed, double noise_sd) {
    if (n_per_cluster < 1) throw InvalidInput("n_per_cluster must be >= 1");
    const auto clusters = region_intervals(WaveRegion::In);
    Matrix x(2 * n_per_cluster, 1);
    Matrix y(2 * n_per_cluster, 1);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const Dataset part = sample_wave_points({clusters[c]}, n_per_cluster,
                                                mix_seed(seed, static_cast<std::uint64_t>(c)),
                                                noise_sd);
        x.middleRows(static_cast<Index>(c) * n_per_cluster, n_per_cluster) = part.inputs;
        y.middleRows(static_cast<Index>(c) * n_per_cluster, n_per_cluster) = part.targets;
    }
    return Dataset(std::move(x), std::move(y));
}

// ---------------------------------------------------------------------------
// CSV

ParseError::ParseError(const std::string& what, std::size_t row, std::size_t column)
    : std::runtime_error(what + " (row " + std::to_string(row) + ", column " +
                         std::to_string(column) + ")"),
      row_(row),
      column_(column) {}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double parse_number(const std::string& raw, std::size_t row, std::size_t col) {
    const std::string s = trim(raw);
    double value = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(value))
        throw ParseError("non-numeric cell '" + s + "'", row, col);
    return value;
}

}  // namespace

std::pair<Vector, Vector> standardize_columns(Matrix& x) {
    constexpr double kSdFloor = 1e-12;
    Vector means = x.colwise().mean().transpose();
    Vector sds(x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        const double var = (x.col(j).array() - means(j)).square().mean();
        sds(j) = std::max(std::sqrt(var), kSdFloor);
        x.col(j) = (x.col(j).array() - means(j)) / sds(j);
    }
    return {means, sds};
}

Dataset parse_csv_dataset(const std::string& text, const std::string& target_column,
                          bool standardize_inputs) {
    std::istringstream in(text);
    std::string line;
    std::size_t row = 0;

    // Header; tolerate a UTF-8 byte order mark.
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (row == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw ParseError("empty file", row, 0);

    std::vector<std::string> header = split_fields(line);
    for (auto& h : header) h = trim(h);
    const auto it = std::find(header.begin(), header.end(), target_column);
    if (it == header.end())
        throw ParseError("missing target column '" + target_column + "'", row, 0);
    const std::size_t target = static_cast<std::size_t>(it - header.begin());
    const std::size_t width = header.size();

    std::vector<std::vector<double>> records;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != width)
            throw ParseError("expected " + std::to_string(width) + " fields, found " +
                                 std::to_string(fields.size()),
                             row, std::min(fields.size(), width) + 1);
        std::vector<double> values(width);
        for (std::size_t c = 0; c < width; ++c) values[c] = parse_number(fields[c], row, c + 1);
        records.push_back(std::move(values));
    }
    if (records.empty()) throw ParseError("no data rows", row, 0);

    const Index n = static_cast<Index>(records.size());
    Matrix x(n, static_cast<Index>(width - 1));
    Matrix y(n, 1);
    for (Index r = 0; r < n; ++r) {
        Index col = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c == target)
                y(r, 0) = records[static_cast<std::size_t>(r)][c];
            else
                x(r, col++) = records[static_cast<std::size_t>(r)][c];
        }
    }
    if (standardize_inputs && x.cols() > 0) standardize_columns(x);
    return Dataset(std::move(x), std::move(y));
}

Dataset load_csv_dataset(const std::filesystem::path& path, const std::string& target_column,
                         bool standardize_inputs) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ParseError("cannot open '" + path.string() + "'", 0, 0);
    std::ostringstream buf;
    buf << file.rdbuf();
    return parse_csv_dataset(buf.str(), target_column, standardize_inputs);
}

}  // namespace smi
