#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gravflow/core/json_io.hpp"

namespace gravflow {

inline constexpr const char* kVersion = "0.1.0";

// Relative change from `from` to `to` as a signed percentage with one
// decimal: 74232 -> 99992 gives "+34.7%". Zero after rounding prints "0.0%".
std::string format_percent_change(double from, double to);
// One-decimal ratio with a multiplication sign: 562958 / 106654 -> "5.3×".
std::string format_ratio(double numerator, double denominator);

// One row of the scenario summary. The observed baseline row has no
// scenario fields.
struct SummaryRow {
    std::string label;
    std::optional<double> cost_reduction;
    double flow = 0.0;   // observed total or predicted mean
    std::optional<double> sd;
    std::optional<double> pct_from_observed;
    std::optional<double> pct_from_reference;
    std::string delta_from_observed;    // formatted
    std::string delta_from_reference;   // formatted
};

struct SummaryTable {
    double observed_total = 0.0;
    std::string reference_label;   // smallest cost reduction
    std::vector<SummaryRow> rows;  // baseline first, then by cost reduction
};

// Built only from allocation_<label>.json documents so that the summary is
// reproducible from the artifacts. observed_total is used when no artifact is
// given.
SummaryTable summary_from_artifacts(const std::vector<json>& allocations, double observed_total);
json to_json(const SummaryTable& t);
std::string to_csv(const SummaryTable& t);
std::string to_text(const SummaryTable& t);

std::string sha256_hex(const std::filesystem::path& file);
std::string sha256_hex_of(std::string_view bytes);

// manifest.json: one per output directory; created_at is the only
// run-dependent field.
struct RunManifest {
    std::string command;
    json config = json::object();
    std::vector<std::filesystem::path> inputs;
    std::vector<std::string> outputs;

    json to_json() const;
};

}  // namespace gravflow
