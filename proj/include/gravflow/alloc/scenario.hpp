#pragma once

#include <map>
#include <string>
#include <vector>

#include "gravflow/alloc/allocation.hpp"
#include "gravflow/alloc/decongestion.hpp"
#include "gravflow/core/json_io.hpp"
#include "gravflow/estimate/glm.hpp"
#include "gravflow/predict/flow.hpp"

namespace gravflow {

struct SimulationOptions {
    AugmentationPolicy augmentation;
    // Cost reduction whose uncapped predictions define phi (0 = baseline).
    double phi_cost_reduction = 0.0;
};
json to_json(const SimulationOptions& o);

struct DemandTotals {
    double uncapped = 0.0;   // sum of raw predictions
    double capped = 0.0;     // after the origin cap
    double pools = 0.0;      // sum E_i
    double slots = 0.0;      // sum K_j after scaling
};

struct ScenarioResult {
    ScenarioSpec spec;
    DemandTotals demand;
    std::size_t existing_pairs = 0;
    std::size_t hypothetical_pairs = 0;
    DecongestionReport report;
    MonteCarloRun monte_carlo;
    AllocationProblem problem;
};

// Everything that does not depend on the scenario: augmented pairs, pools,
// design rows and phi. Immutable after construction, so one runner can serve
// concurrent scenario runs.
class ScenarioRunner {
public:
    ScenarioRunner(const SystemSnapshot& s, const FittedModel& f, SimulationOptions opt = {});

    ScenarioResult run(const ScenarioSpec& spec, const MonteCarloOptions& mc = {}) const;

    const SystemSnapshot& snapshot() const { return *snapshot_; }
    const FittedModel& model() const { return *model_; }
    const SimulationOptions& options() const { return opt_; }
    const std::vector<ODRecord>& pairs() const { return predictor_.pairs(); }
    const std::vector<CandidatePool>& pools() const { return pools_; }
    const std::map<std::string, double>& phi() const { return phi_; }

private:
    const SystemSnapshot* snapshot_;
    const FittedModel* model_;
    SimulationOptions opt_;
    std::vector<CandidatePool> pools_;
    std::map<std::string, double> pool_map_;
    FlowPredictor predictor_;
    std::map<std::string, double> phi_;
};

// allocation_<label>.json content. Contains no timestamps or thread counts.
json to_json(const ScenarioResult& r, const ScenarioRunner& runner);
json to_json(const DecongestionReport& r);
json to_json(const SummaryStats& s);

// Accepted flows of one seed, nonzero pairs only.
json per_seed_json(const ScenarioResult& r, std::size_t run_index);

}  // namespace gravflow
