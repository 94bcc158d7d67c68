#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gravflow/core/types.hpp"
#include "gravflow/predict/flow.hpp"

namespace gravflow {

// Index form of one allocation instance. Pair order is the canonical
// (origin, dest) order; permutations act on these indices.
struct AllocationProblem {
    struct Pair {
        std::size_t origin = 0;
        std::size_t dest = 0;
        double yhat = 0.0;
        PairClass pair_class = PairClass::hypothetical;
    };
    std::vector<std::string> origin_ids;
    std::vector<std::string> dest_ids;
    std::vector<double> pools;   // E_i
    std::vector<double> slots;   // K_j after slot scaling
    std::vector<Pair> pairs;

    std::size_t n_pairs() const { return pairs.size(); }
};

// Destinations are every ESC school of the snapshot (id order), slots scaled
// per the scenario. Throws std::invalid_argument for pairs or pools that do
// not resolve.
AllocationProblem make_problem(const SystemSnapshot& s, const std::vector<PredictedPairFlow>& predicted,
                               const std::vector<CandidatePool>& pools, const ScenarioSpec& spec);

struct AllocationState {
    std::vector<double> residual_pools;   // e_i
    std::vector<double> residual_slots;   // k_j
    std::vector<double> accepted;         // a_ij per pair index
    std::size_t steps = 0;                // pairs processed before stopping
    bool terminated_early = false;
};

// One processing step, recorded for replay checks.
struct AllocationStep {
    std::size_t pair = 0;
    double e_before = 0.0;
    double k_before = 0.0;
    double accepted = 0.0;
};

// Walks pairs in `order`, accepting a = min(e_i, k_j, yhat) and depleting both
// residuals at once. Stops as soon as no origin has pool left or no
// destination has a slot left.
AllocationState allocate_in_order(const AllocationProblem& p, std::span<const std::size_t> order,
                                  std::vector<AllocationStep>* trace = nullptr);

// Order = Fisher-Yates shuffle of 0..n-1 driven by xoshiro256** seeded from `seed`.
std::vector<std::size_t> permutation_for_seed(std::size_t n, std::uint64_t seed);
AllocationState allocate_once(const AllocationProblem& p, std::uint64_t seed,
                              std::vector<AllocationStep>* trace = nullptr);

// Per-run destination totals; Y = existing + hypothetical holds exactly
// because the total is defined as that sum.
struct RunTotals {
    std::vector<double> y_existing;       // per destination
    std::vector<double> y_hypothetical;
    std::vector<double> y() const;
};
RunTotals destination_totals(const AllocationProblem& p, const AllocationState& s);

struct MonteCarloRun {
    std::vector<std::uint64_t> seeds;
    std::vector<RunTotals> runs;                 // one per seed, seed order
    std::vector<std::vector<double>> accepted;   // per seed, only when kept
};

struct MonteCarloOptions {
    bool keep_accepted = false;
    unsigned threads = 0;   // 0 = thread_count()
    // Called after each finished seed with the number finished so far; may be
    // called from worker threads.
    std::function<void(std::size_t done, std::size_t total)> progress;
};

MonteCarloRun run_monte_carlo(const AllocationProblem& p, const std::vector<std::uint64_t>& seeds,
                              const MonteCarloOptions& opt = {});

// Exact average of the destination totals over all n! orders. Only for n <= 8.
struct ExhaustiveMean {
    std::size_t permutations = 0;
    std::vector<double> y_existing;
    std::vector<double> y_hypothetical;
};
ExhaustiveMean exhaustive_mean(const AllocationProblem& p);
inline constexpr std::size_t kMaxExhaustivePairs = 8;

}  // namespace gravflow
