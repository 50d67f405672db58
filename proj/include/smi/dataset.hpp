#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smi/model.hpp"

namespace smi {

/// Mean of the synthetic wave: 1.5 sin(2 pi (x + 2/3)) + 3x + 1.
double wave_mean(double x) noexcept;

inline constexpr double kWaveNoiseSd = 0.1;

struct Interval {
    double low;
    double high;
    double length() const noexcept { return high - low; }
};

/// Evaluation regions of the 1D wave study.
enum class WaveRegion { In, Between, Entire };

std::vector<Interval> region_intervals(WaveRegion region);
Index region_eval_size(WaveRegion region);
std::string to_string(WaveRegion region);
WaveRegion wave_region_from_string(const std::string& name);

/// `n` points with x uniform over the union of `intervals` (by length) and
/// y ~ N(wave_mean(x), noise_sd^2).
Dataset sample_wave_points(const std::vector<Interval>& intervals, Index n, std::uint64_t seed,
                           double noise_sd = kWaveNoiseSd);

/// Training data: n_per_cluster points uniform on each of [-1.5, -0.5] and
/// [1.3, 1.7], first cluster first.
Dataset generate_wave_dataset(Index n_per_cluster, std::uint64_t seed,
                              double noise_sd = kWaveNoiseSd);

/// CSV ingestion failure with a 1-based row (header is row 1) and 1-based
/// column; zero means "not applicable".
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column);
    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// Reads a comma-separated file with a header row. The named column becomes
/// the single target; every other column is an input. Inputs are optionally
/// standardized per column (population sd, floored at 1e-12).
Dataset load_csv_dataset(const std::filesystem::path& path, const std::string& target_column,
                         bool standardize_inputs);

/// Same as load_csv_dataset on in-memory text.
Dataset parse_csv_dataset(const std::string& text, const std::string& target_column,
                          bool standardize_inputs);

/// Column-wise standardization in place with population sd; returns
/// (means, sds) used.
std::pair<Vector, Vector> standardize_columns(Matrix& x);

}  // namespace smi
