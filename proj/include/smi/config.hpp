#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "smi/experiments.hpp"

namespace smi {

/// Experiment configs from TOML text. Keys sit at the top level of the
/// document; optimizer settings live in sub-tables. Unknown keys and wrong
/// types are rejected with the offending field path. The scale preset is
/// applied to the defaults before the document's own values.
VarianceConfig parse_variance_config(const std::string& toml_text, Scale scale);
Regression1dConfig parse_regression1d_config(const std::string& toml_text, Scale scale);
RecoveryConfig parse_recovery_config(const std::string& toml_text, Scale scale);
/// Relative data paths resolve against `base_dir`; `data_override` replaces
/// the document's data_path.
CsvRegressionConfig parse_csv_regression_config(
    const std::string& toml_text, Scale scale, const std::filesystem::path& base_dir = {},
    const std::optional<std::filesystem::path>& data_override = std::nullopt);
SanityConfig parse_sanity_config(const std::string& toml_text);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace smi
