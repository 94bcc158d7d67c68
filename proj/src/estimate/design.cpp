#include "gravflow/estimate/design.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gravflow {

std::string_view to_string(ZeroFlowPolicy p) {
    return p == ZeroFlowPolicy::positive_only ? "positive_only" : "include_zeros";
}

ZeroFlowPolicy parse_zero_flow_policy(std::string_view text) {
    if (text == "positive_only") return ZeroFlowPolicy::positive_only;
    if (text == "include_zeros") return ZeroFlowPolicy::include_zeros;
    throw std::invalid_argument("unknown zero-flow policy '" + std::string(text) + "'");
}

std::vector<std::pair<std::string, ModelSpec>> specification_ladder(const ModelSpec& base) {
    ModelSpec m = base;
    m.include_rating = m.include_origin_region_fe = m.include_dest_region_fe = false;
    m.include_origin_income = m.include_dest_income = false;

    std::vector<std::pair<std::string, ModelSpec>> out;
    out.emplace_back("0. Baseline (Dist. + Cost)", m);
    m.include_rating = true;
    out.emplace_back("1. + School Rating", m);
    m.include_origin_region_fe = true;
    out.emplace_back("2. + Origin Region", m);
    m.include_dest_region_fe = true;
    out.emplace_back("3. + Dest. Region", m);
    ModelSpec origin_only = m;
    origin_only.include_origin_income = true;
    out.emplace_back("4. + Origin Income Only", origin_only);
    ModelSpec dest_only = m;
    dest_only.include_dest_income = true;
    out.emplace_back("5. + Dest. Income Only", dest_only);
    m.include_origin_income = m.include_dest_income = true;
    out.emplace_back("6. + Dual Income", m);
    return out;
}

DesignBuilder::DesignBuilder(const SystemSnapshot& snapshot, const ModelSpec& spec)
    : snapshot_(&snapshot), spec_(spec) {
    if (!(spec_.cost_floor > 0.0)) throw std::invalid_argument("cost_floor must be positive");
    std::vector<std::string> all = spec_.regions.empty() ? snapshot.regions() : spec_.regions;
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    const bool needs_regions = spec_.include_origin_region_fe || spec_.include_dest_region_fe;
    if (needs_regions && std::find(all.begin(), all.end(), spec_.reference_region) == all.end())
        throw std::invalid_argument("reference region '" + spec_.reference_region + "' is not a region level");
    for (auto& r : all)
        if (r != spec_.reference_region) levels_.push_back(r);
    spec_.regions = all;

    names_ = {"intercept", "ln_distance", "ln_net_cost"};
    if (spec_.include_rating) names_.push_back("rating");
    if (spec_.include_origin_income) names_.push_back("ln_origin_income");
    if (spec_.include_dest_income) names_.push_back("ln_dest_income");
    if (spec_.include_origin_region_fe)
        for (const auto& r : levels_) names_.push_back("origin_region_" + r);
    if (spec_.include_dest_region_fe)
        for (const auto& r : levels_) names_.push_back("dest_region_" + r);
}

std::vector<double> DesignBuilder::row(const School& origin, const School& dest, double distance_km,
                                       double net_cost) const {
    if (!(distance_km > 0.0)) throw std::invalid_argument("non-positive distance for " + origin.school_id + "->" + dest.school_id);
    std::vector<double> x;
    x.reserve(names_.size());
    x.push_back(1.0);
    x.push_back(std::log(distance_km));
    x.push_back(std::log(std::max(net_cost, spec_.cost_floor)));
    if (spec_.include_rating) x.push_back(static_cast<double>(dest.rating.value_or(0)));
    if (spec_.include_origin_income) x.push_back(std::log(origin.lgu_income));
    if (spec_.include_dest_income) x.push_back(std::log(dest.lgu_income));
    auto dummies = [&](const std::string& region) {
        if (std::find(spec_.regions.begin(), spec_.regions.end(), region) == spec_.regions.end())
            throw std::invalid_argument("region '" + region + "' is absent from the dummy map");
        for (const auto& level : levels_) x.push_back(region == level ? 1.0 : 0.0);
    };
    if (spec_.include_origin_region_fe) dummies(origin.region);
    if (spec_.include_dest_region_fe) dummies(dest.region);
    return x;
}

DesignMatrix build_design(const SystemSnapshot& s, const ModelSpec& spec) {
    DesignBuilder builder(s, spec);
    std::vector<const ODRecord*> rows;
    for (const auto& r : s.od()) {
        if (spec.zero_flow_policy == ZeroFlowPolicy::positive_only && r.observed_flow <= 0) continue;
        rows.push_back(&r);
    }
    if (rows.empty()) throw std::invalid_argument("design has no rows after the zero-flow filter");
    std::sort(rows.begin(), rows.end(), [](const ODRecord* a, const ODRecord* b) { return od_key_less(*a, *b); });

    DesignMatrix d;
    d.names = builder.names();
    d.n_rows = rows.size();
    const std::size_t k = d.names.size();
    d.values.assign(d.n_rows * k, 0.0);
    d.response.reserve(d.n_rows);
    d.cluster.reserve(d.n_rows);
    d.row_keys.reserve(d.n_rows);
    std::unordered_map<std::string, std::size_t> cluster_of;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const ODRecord& r = *rows[i];
        const School* o = s.find(r.origin_id);
        const School* dst = s.find(r.dest_id);
        if (!o || !dst) throw std::invalid_argument("unknown school in pair " + r.origin_id + "->" + r.dest_id);
        const auto x = builder.row(*o, *dst, r.distance_km, r.net_cost);
        for (std::size_t j = 0; j < k; ++j) d.values[j * d.n_rows + i] = x[j];
        if (builder.floors(r.net_cost)) ++d.floored_rows;
        d.response.push_back(static_cast<double>(r.observed_flow));
        auto [it, fresh] = cluster_of.emplace(r.origin_id, d.cluster_ids.size());
        if (fresh) d.cluster_ids.push_back(r.origin_id);
        d.cluster.push_back(it->second);
        d.row_keys.emplace_back(r.origin_id, r.dest_id);
    }
    for (std::size_t i = 0; i < d.values.size(); ++i)
        if (!std::isfinite(d.values[i])) throw std::invalid_argument("non-finite design entry in column " + d.names[i / d.n_rows]);
    return d;
}

DesignMatrix subset_rows(const DesignMatrix& d, std::span<const std::size_t> rows) {
    DesignMatrix out;
    out.names = d.names;
    out.n_rows = rows.size();
    const std::size_t k = d.cols();
    out.values.resize(out.n_rows * k);
    for (std::size_t j = 0; j < k; ++j) {
        const double* src = d.values.data() + j * d.n_rows;
        double* dst = out.values.data() + j * out.n_rows;
        for (std::size_t i = 0; i < rows.size(); ++i) dst[i] = src[rows[i]];
    }
    out.response.reserve(out.n_rows);
    out.row_keys.reserve(out.n_rows);
    std::unordered_map<std::size_t, std::size_t> remap;
    for (auto r : rows) {
        out.response.push_back(d.response[r]);
        out.row_keys.push_back(d.row_keys[r]);
        auto [it, fresh] = remap.emplace(d.cluster[r], out.cluster_ids.size());
        if (fresh) out.cluster_ids.push_back(d.cluster_ids[d.cluster[r]]);
        out.cluster.push_back(it->second);
    }
    return out;
}

}  // namespace gravflow
