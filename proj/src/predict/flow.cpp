#include "gravflow/predict/flow.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <tuple>

#include "gravflow/estimate/design.hpp"

namespace gravflow {

std::vector<CandidatePool> candidate_pools(const SystemSnapshot& s) {
    std::map<std::string, double> taken;
    for (const auto& r : s.od()) taken[r.origin_id] += static_cast<double>(r.observed_flow);
    std::vector<CandidatePool> out;
    for (const auto& sc : s.schools()) {
        if (sc.sector != Sector::public_origin) continue;
        const double enrolled = static_cast<double>(sc.enrollment_g6.value_or(0));
        out.push_back({sc.school_id, std::max(0.0, enrolled - taken[sc.school_id])});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.origin_id < b.origin_id; });
    return out;
}

std::map<std::string, double> pool_map(const std::vector<CandidatePool>& pools) {
    std::map<std::string, double> m;
    for (const auto& p : pools) m[p.origin_id] = p.pool;
    return m;
}

void check_policy(const AugmentationPolicy& p) {
    if (p.max_new_per_origin < 0) throw std::invalid_argument("max_new_per_origin must be >= 0");
    if (!(p.distance_cutoff_km > 0.0)) throw std::invalid_argument("distance cutoff must be positive");
}

json to_json(const AugmentationPolicy& p) {
    return {{"max_new_per_origin", p.max_new_per_origin},
            {"distance_cutoff_km", p.distance_cutoff_km},
            {"sort_key", {"distance_km asc", "net_cost asc", "rating desc", "dest_id asc"}},
            {"restrict_to_congested_feeders", p.restrict_to_congested_feeders}};
}

std::vector<std::string> congested_feeding_origins(const SystemSnapshot& s) {
    const auto& g = s.congested_set();
    std::set<std::string> out;
    for (const auto& f : s.feeder_flows())
        if (f.flow > 0 && std::binary_search(g.begin(), g.end(), f.public_dest_id)) out.insert(f.origin_id);
    return {out.begin(), out.end()};
}

std::vector<ODRecord> augment_pairs(const SystemSnapshot& s, const AugmentationPolicy& p) {
    check_policy(p);
    std::vector<ODRecord> out;
    std::map<std::string, std::vector<ODRecord>> candidates;
    for (const auto& r : s.od()) {
        if (r.observed_flow > 0) {
            out.push_back(r);
            out.back().pair_class = PairClass::existing;
        } else if (r.distance_km <= p.distance_cutoff_km) {
            const School* d = s.find(r.dest_id);
            if (!d || d->sector != Sector::esc_destination) continue;
            ODRecord h = r;
            h.pair_class = PairClass::hypothetical;
            h.observed_flow = 0;
            h.net_cost = d->tuition.value_or(0.0) - s.subsidy_baseline();
            candidates[r.origin_id].push_back(std::move(h));
        }
    }
    std::set<std::string> allowed;
    if (p.restrict_to_congested_feeders) {
        const auto feeders = congested_feeding_origins(s);
        allowed.insert(feeders.begin(), feeders.end());
    }
    for (auto& [origin, list] : candidates) {
        if (p.restrict_to_congested_feeders && !allowed.count(origin)) continue;
        auto key = [&](const ODRecord& r) {
            const int rating = s.find(r.dest_id)->rating.value_or(0);
            return std::make_tuple(r.distance_km, r.net_cost, -rating, std::cref(r.dest_id));
        };
        std::sort(list.begin(), list.end(), [&](const ODRecord& a, const ODRecord& b) { return key(a) < key(b); });
        const std::size_t take = std::min(list.size(), static_cast<std::size_t>(p.max_new_per_origin));
        out.insert(out.end(), list.begin(), list.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(out.begin(), out.end(), od_key_less);
    return out;
}

double ScenarioSpec::slot_scale_for(const std::string& region) const {
    auto it = region_slot_scale.find(region);
    return it == region_slot_scale.end() ? slot_scale : it->second;
}

std::vector<std::uint64_t> ScenarioSpec::default_seeds() {
    std::vector<std::uint64_t> v(100);
    for (std::uint64_t i = 0; i < v.size(); ++i) v[i] = i;
    return v;
}

void check_scenario(const ScenarioSpec& s) {
    if (!(s.cost_reduction >= 0.0) || !std::isfinite(s.cost_reduction))
        throw std::invalid_argument("scenario '" + s.label + "': cost_reduction must be >= 0");
    if (!(s.slot_scale >= 0.0) || !std::isfinite(s.slot_scale))
        throw std::invalid_argument("scenario '" + s.label + "': slot_scale must be >= 0");
    for (const auto& [r, v] : s.region_slot_scale)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("scenario '" + s.label + "': slot_scale for " + r + " must be >= 0");
    if (s.seeds.empty()) throw std::invalid_argument("scenario '" + s.label + "': seeds must be non-empty");
    if (s.label.empty()) throw std::invalid_argument("scenario label must be non-empty");
    if (s.label.find_first_of("/\\") != std::string::npos)
        throw std::invalid_argument("scenario label '" + s.label + "' must not contain path separators");
}

json to_json(const ScenarioSpec& s) {
    json scale;
    if (s.region_slot_scale.empty()) {
        scale = s.slot_scale;
    } else {
        scale = json::object();
        scale["default"] = s.slot_scale;
        for (const auto& [r, v] : s.region_slot_scale) scale[r] = v;
    }
    return {{"label", s.label}, {"cost_reduction", s.cost_reduction}, {"slot_scale", scale}, {"seeds", s.seeds}};
}

ScenarioSpec scenario_from_json(const json& j) {
    ScenarioSpec s;
    try {
        s.cost_reduction = j.at("cost_reduction").get<double>();
        s.label = j.contains("label") ? j.at("label").get<std::string>() : "delta_" + json(s.cost_reduction).dump();
        if (j.contains("slot_scale")) {
            const auto& sc = j.at("slot_scale");
            if (sc.is_number()) {
                s.slot_scale = sc.get<double>();
            } else if (sc.is_object()) {
                for (const auto& [k, v] : sc.items()) {
                    if (k == "default") s.slot_scale = v.get<double>();
                    else s.region_slot_scale[k] = v.get<double>();
                }
            } else {
                throw InputError("slot_scale must be a number or an object of region multipliers");
            }
        }
        if (j.contains("seeds") && j.contains("seed_count"))
            throw InputError("give either seeds or seed_count, not both");
        if (j.contains("seeds")) {
            s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        } else if (j.contains("seed_count")) {
            const auto n = j.at("seed_count").get<std::int64_t>();
            if (n < 1) throw InputError("seed_count must be >= 1");
            s.seeds.resize(static_cast<std::size_t>(n));
            for (std::size_t i = 0; i < s.seeds.size(); ++i) s.seeds[i] = i;
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("scenario: ") + e.what());
    }
    try {
        check_scenario(s);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    return s;
}

std::vector<ScenarioSpec> scenarios_from_json(const json& j) {
    const json* list = &j;
    if (j.is_object()) {
        if (!j.contains("scenarios")) throw InputError("scenario file needs a 'scenarios' array");
        list = &j.at("scenarios");
    }
    if (!list->is_array()) throw InputError("scenarios must be an array");
    std::vector<ScenarioSpec> out;
    std::set<std::string> labels;
    for (const auto& item : *list) {
        out.push_back(scenario_from_json(item));
        if (!labels.insert(out.back().label).second) throw InputError("duplicate scenario label '" + out.back().label + "'");
    }
    return out;
}

std::vector<ScenarioSpec> standard_scenarios() {
    std::vector<ScenarioSpec> out;
    for (int k : {1, 5, 10, 15, 20}) {
        ScenarioSpec s;
        s.label = "minus_" + std::to_string(k) + "k";
        s.cost_reduction = k;
        out.push_back(std::move(s));
    }
    return out;
}

FlowPredictor::FlowPredictor(const FittedModel& f, const SystemSnapshot& s, std::vector<ODRecord> pairs)
    : coefficients_(f.coefficients), pairs_(std::move(pairs)), cost_floor_(f.spec.cost_floor) {
    const DesignBuilder builder(s, f.spec);
    if (builder.names() != f.names)
        throw std::invalid_argument("model terms do not match the snapshot's design for its spec");
    cost_col_ = f.index_of("ln_net_cost");
    std::sort(pairs_.begin(), pairs_.end(), od_key_less);
    rows_.reserve(pairs_.size());
    for (const auto& r : pairs_) {
        const School* o = s.find(r.origin_id);
        const School* d = s.find(r.dest_id);
        if (!o || !d) throw std::invalid_argument("unknown school in pair " + r.origin_id + "->" + r.dest_id);
        rows_.push_back(builder.row(*o, *d, r.distance_km, r.net_cost));
    }
}

std::vector<PredictedPairFlow> FlowPredictor::predict(double cost_reduction,
                                                      const std::map<std::string, double>& pools,
                                                      bool apply_cap) const {
    std::vector<PredictedPairFlow> out;
    out.reserve(pairs_.size());
    std::vector<double> x;
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        const ODRecord& r = pairs_[i];
        x = rows_[i];
        x[cost_col_] = std::log(std::max(r.net_cost - cost_reduction, cost_floor_));
        double eta = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) eta += coefficients_[j] * x[j];
        const double y = std::exp(eta);
        out.push_back({r.origin_id, r.dest_id, r.pair_class, y, y});
    }
    if (!apply_cap) return out;

    // Pairs are sorted by origin, so each origin is a contiguous run.
    for (std::size_t begin = 0; begin < out.size();) {
        std::size_t end = begin;
        double total = 0.0;
        while (end < out.size() && out[end].origin_id == out[begin].origin_id) total += out[end++].yhat;
        auto it = pools.find(out[begin].origin_id);
        if (it == pools.end()) throw std::invalid_argument("origin " + out[begin].origin_id + " has no candidate pool");
        if (total > it->second) {
            const double scale = it->second / total;
            for (std::size_t i = begin; i < end; ++i) out[i].yhat *= scale;
        }
        begin = end;
    }
    return out;
}

std::vector<PredictedPairFlow> scenario_predictions(const FittedModel& f, const SystemSnapshot& s,
                                                    const std::vector<ODRecord>& pairs,
                                                    const std::vector<CandidatePool>& pools,
                                                    const ScenarioSpec& spec) {
    check_scenario(spec);
    return FlowPredictor(f, s, pairs).predict(spec.cost_reduction, pool_map(pools));
}

}  // namespace gravflow
