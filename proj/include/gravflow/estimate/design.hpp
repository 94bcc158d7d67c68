#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gravflow/core/types.hpp"

namespace gravflow {

enum class ZeroFlowPolicy { positive_only, include_zeros };

std::string_view to_string(ZeroFlowPolicy p);
ZeroFlowPolicy parse_zero_flow_policy(std::string_view text);

// Which terms enter the log-link gravity equation and how rows are admitted.
struct ModelSpec {
    bool include_rating = true;
    bool include_origin_region_fe = true;
    bool include_dest_region_fe = true;
    bool include_origin_income = true;
    bool include_dest_income = true;
    std::string reference_region = "NCR";
    // Dummy levels; empty means "every region present in the snapshot".
    std::vector<std::string> regions;
    ZeroFlowPolicy zero_flow_policy = ZeroFlowPolicy::positive_only;
    double cost_floor = 1e-3;  // thousands of pesos
};

// The seven nested-then-branching specifications used for model selection:
// baseline, +rating, +origin FE, +dest FE, +origin income only, +dest income
// only, dual income. Row filtering settings are copied from `base`.
std::vector<std::pair<std::string, ModelSpec>> specification_ladder(const ModelSpec& base);

// Column-major design. Column order is fixed:
//   intercept, ln_distance, ln_net_cost, [rating], [ln_origin_income],
//   [ln_dest_income], [origin_region_<R>...], [dest_region_<R>...]
// with dummy levels in ascending label order and the reference omitted.
struct DesignMatrix {
    std::vector<std::string> names;
    std::size_t n_rows = 0;
    std::vector<double> values;
    std::vector<double> response;
    std::vector<std::size_t> cluster;       // dense cluster index per row
    std::vector<std::string> cluster_ids;   // origin id per cluster index
    std::vector<std::pair<std::string, std::string>> row_keys;
    std::size_t floored_rows = 0;           // rows whose net cost hit cost_floor

    std::size_t cols() const { return names.size(); }
    std::span<const double> column(std::size_t j) const { return {values.data() + j * n_rows, n_rows}; }
    std::span<double> column(std::size_t j) { return {values.data() + j * n_rows, n_rows}; }
    double at(std::size_t row, std::size_t col) const { return values[col * n_rows + row]; }
    std::size_t n_clusters() const { return cluster_ids.size(); }
};

// Maps an (origin, destination, distance, net cost) tuple to the predictor
// values of a spec, in design column order.
class DesignBuilder {
public:
    // Throws std::invalid_argument when the reference region is not a level.
    DesignBuilder(const SystemSnapshot& snapshot, const ModelSpec& spec);

    const std::vector<std::string>& names() const { return names_; }
    const ModelSpec& spec() const { return spec_; }

    // Throws std::invalid_argument for unknown schools or regions outside the
    // dummy map, or a non-positive distance.
    std::vector<double> row(const School& origin, const School& dest, double distance_km, double net_cost) const;
    bool floors(double net_cost) const { return !(net_cost > spec_.cost_floor); }

private:
    const SystemSnapshot* snapshot_;
    ModelSpec spec_;
    std::vector<std::string> levels_;  // non-reference levels
    std::vector<std::string> names_;
};

// Throws std::invalid_argument if no rows survive the filter.
DesignMatrix build_design(const SystemSnapshot& s, const ModelSpec& spec);

// Keeps the listed rows (repeats allowed), preserving column layout.
DesignMatrix subset_rows(const DesignMatrix& d, std::span<const std::size_t> rows);

}  // namespace gravflow
