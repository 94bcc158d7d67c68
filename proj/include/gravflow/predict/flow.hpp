#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gravflow/core/json_io.hpp"
#include "gravflow/core/types.hpp"
#include "gravflow/estimate/glm.hpp"

namespace gravflow {

struct CandidatePool {
    std::string origin_id;
    double pool = 0.0;   // E_i
};

// One pool per origin in id order: enrollment minus observed beneficiaries,
// clamped at zero.
std::vector<CandidatePool> candidate_pools(const SystemSnapshot& s);
std::map<std::string, double> pool_map(const std::vector<CandidatePool>& pools);

struct AugmentationPolicy {
    int max_new_per_origin = 10;
    double distance_cutoff_km = 30.0;
    // Only origins that feed a congested public school gain hypothetical pairs.
    bool restrict_to_congested_feeders = false;
};
void check_policy(const AugmentationPolicy& p);
json to_json(const AugmentationPolicy& p);

// Origins with positive feeder flow into a congested public destination, sorted.
std::vector<std::string> congested_feeding_origins(const SystemSnapshot& s);

// Existing pairs (observed flow > 0) plus, per origin, the first
// max_new_per_origin zero-flow pairs within the cutoff ranked by
// (distance asc, net cost asc, rating desc, dest id asc). Added pairs are
// hypothetical with net cost = tuition - subsidy_baseline. Sorted by key.
std::vector<ODRecord> augment_pairs(const SystemSnapshot& s, const AugmentationPolicy& p);

struct ScenarioSpec {
    std::string label;
    double cost_reduction = 0.0;   // thousands of pesos
    double slot_scale = 1.0;       // global multiplier on K_j
    std::map<std::string, double> region_slot_scale;   // overrides slot_scale per region
    std::vector<std::uint64_t> seeds = default_seeds();

    double slot_scale_for(const std::string& region) const;
    static std::vector<std::uint64_t> default_seeds();   // 0..99
};
void check_scenario(const ScenarioSpec& s);
json to_json(const ScenarioSpec& s);
ScenarioSpec scenario_from_json(const json& j);
// Accepts {"scenarios": [...]} or a bare array. Throws InputError.
std::vector<ScenarioSpec> scenarios_from_json(const json& j);
// Standard sweep: 1, 5, 10, 15 and 20 thousand pesos.
std::vector<ScenarioSpec> standard_scenarios();

struct PredictedPairFlow {
    std::string origin_id;
    std::string dest_id;
    PairClass pair_class = PairClass::hypothetical;
    double yhat = 0.0;            // after the origin cap
    double yhat_uncapped = 0.0;
};

// Precomputes design rows for a fixed pair set so scenarios only swap the
// cost column. Throws std::invalid_argument if the model's terms cannot be
// rebuilt from the snapshot.
class FlowPredictor {
public:
    FlowPredictor(const FittedModel& f, const SystemSnapshot& s, std::vector<ODRecord> pairs);

    const std::vector<ODRecord>& pairs() const { return pairs_; }
    // Net cost lowered by cost_reduction and floored; pairs of an origin whose
    // total exceeds E_i are scaled down proportionally to sum to E_i. Throws
    // std::invalid_argument when an origin has no pool.
    std::vector<PredictedPairFlow> predict(double cost_reduction, const std::map<std::string, double>& pools,
                                           bool apply_cap = true) const;

private:
    std::vector<double> coefficients_;
    std::vector<ODRecord> pairs_;
    std::vector<std::vector<double>> rows_;
    std::size_t cost_col_ = 0;
    double cost_floor_ = 0.0;
};

std::vector<PredictedPairFlow> scenario_predictions(const FittedModel& f, const SystemSnapshot& s,
                                                    const std::vector<ODRecord>& pairs,
                                                    const std::vector<CandidatePool>& pools,
                                                    const ScenarioSpec& spec);

}  // namespace gravflow
