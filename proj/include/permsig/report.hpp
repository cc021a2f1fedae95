#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "permsig/permtest.hpp"

namespace permsig {

/// Report document: scheme, m, alpha, mu, observed_mean, observed_sd,
/// null_mean, null_sd, p_value, p_value_sd, fwe_rate, fwe_rate_sd, histogram,
/// seeds, plus study-specific extras. Absent optional values are null.
nlohmann::ordered_json report_json(const StudyReport& report);

/// "bin_left,bin_right,count" rows for external plotting.
std::string histogram_csv(const Histogram& h);

/// Formats a value the way result tables do: 4 decimals.
std::string format4(double v);

/// `path` if it does not exist, otherwise the first free "stem-N.ext".
std::filesystem::path non_colliding_path(const std::filesystem::path& path);

}  // namespace permsig
