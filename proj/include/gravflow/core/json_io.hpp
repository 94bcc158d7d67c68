#pragma once

#include <cmath>
#include <filesystem>
#include <limits>

#include "json.hpp"

namespace gravflow {

using json = nlohmann::ordered_json;

// JSON has no NaN or infinity; they are written as null and read back as NaN.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline double number_or_nan(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

// Throws IoError on failure. Output is two-space indented with a trailing newline.
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

}  // namespace gravflow
