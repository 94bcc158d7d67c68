#include "gravflow/alloc/allocation.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "gravflow/core/parallel.hpp"
#include "gravflow/core/rng.hpp"

namespace gravflow {

AllocationProblem make_problem(const SystemSnapshot& s, const std::vector<PredictedPairFlow>& predicted,
                               const std::vector<CandidatePool>& pools, const ScenarioSpec& spec) {
    AllocationProblem p;
    std::map<std::string, std::size_t> origin_index, dest_index;
    for (const auto& c : pools) {
        origin_index.emplace(c.origin_id, p.origin_ids.size());
        p.origin_ids.push_back(c.origin_id);
        p.pools.push_back(c.pool);
    }
    std::vector<const School*> esc;
    for (const auto& sc : s.schools())
        if (sc.sector == Sector::esc_destination) esc.push_back(&sc);
    std::sort(esc.begin(), esc.end(), [](const School* a, const School* b) { return a->school_id < b->school_id; });
    for (const School* d : esc) {
        dest_index.emplace(d->school_id, p.dest_ids.size());
        p.dest_ids.push_back(d->school_id);
        p.slots.push_back(static_cast<double>(d->slots.value_or(0)) * spec.slot_scale_for(d->region));
    }
    p.pairs.reserve(predicted.size());
    for (const auto& f : predicted) {
        auto o = origin_index.find(f.origin_id);
        auto d = dest_index.find(f.dest_id);
        if (o == origin_index.end()) throw std::invalid_argument("origin " + f.origin_id + " has no candidate pool");
        if (d == dest_index.end()) throw std::invalid_argument("destination " + f.dest_id + " is not an ESC school");
        if (!std::isfinite(f.yhat) || f.yhat < 0.0) throw std::invalid_argument("non-finite predicted flow");
        p.pairs.push_back({o->second, d->second, f.yhat, f.pair_class});
    }
    std::sort(p.pairs.begin(), p.pairs.end(), [](const auto& a, const auto& b) {
        return std::tie(a.origin, a.dest) < std::tie(b.origin, b.dest);
    });
    return p;
}

AllocationState allocate_in_order(const AllocationProblem& p, std::span<const std::size_t> order,
                                  std::vector<AllocationStep>* trace) {
    AllocationState st;
    st.residual_pools = p.pools;
    st.residual_slots = p.slots;
    st.accepted.assign(p.n_pairs(), 0.0);
    std::size_t open_origins = 0, open_dests = 0;
    for (double e : st.residual_pools) open_origins += e > 0.0;
    for (double k : st.residual_slots) open_dests += k > 0.0;

    for (std::size_t idx : order) {
        if (open_origins == 0 || open_dests == 0) {
            st.terminated_early = st.steps < order.size();
            break;
        }
        const auto& pair = p.pairs[idx];
        double& e = st.residual_pools[pair.origin];
        double& k = st.residual_slots[pair.dest];
        const double a = std::min({e, k, pair.yhat});
        if (trace) trace->push_back({idx, e, k, a});
        if (a > 0.0) {
            e -= a;
            k -= a;
            st.accepted[idx] += a;
            if (e <= 0.0) {
                e = 0.0;
                --open_origins;
            }
            if (k <= 0.0) {
                k = 0.0;
                --open_dests;
            }
        }
        ++st.steps;
    }
    return st;
}

std::vector<std::size_t> permutation_for_seed(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng::Xoshiro256 gen(seed);
    rng::shuffle(std::span<std::size_t>(order), gen);
    return order;
}

AllocationState allocate_once(const AllocationProblem& p, std::uint64_t seed, std::vector<AllocationStep>* trace) {
    const auto order = permutation_for_seed(p.n_pairs(), seed);
    return allocate_in_order(p, order, trace);
}

std::vector<double> RunTotals::y() const {
    std::vector<double> out(y_existing.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = y_existing[j] + y_hypothetical[j];
    return out;
}

RunTotals destination_totals(const AllocationProblem& p, const AllocationState& s) {
    RunTotals t;
    t.y_existing.assign(p.dest_ids.size(), 0.0);
    t.y_hypothetical.assign(p.dest_ids.size(), 0.0);
    for (std::size_t i = 0; i < p.n_pairs(); ++i) {
        const auto& pair = p.pairs[i];
        (pair.pair_class == PairClass::existing ? t.y_existing : t.y_hypothetical)[pair.dest] += s.accepted[i];
    }
    return t;
}

MonteCarloRun run_monte_carlo(const AllocationProblem& p, const std::vector<std::uint64_t>& seeds,
                              const MonteCarloOptions& opt) {
    if (seeds.empty()) throw std::invalid_argument("Monte Carlo needs at least one seed");
    MonteCarloRun out;
    out.seeds = seeds;
    out.runs.resize(seeds.size());
    if (opt.keep_accepted) out.accepted.resize(seeds.size());
    std::atomic<std::size_t> done{0};
    parallel_for(
        seeds.size(),
        [&](std::size_t r) {
            AllocationState st = allocate_once(p, seeds[r]);
            out.runs[r] = destination_totals(p, st);
            if (opt.keep_accepted) out.accepted[r] = std::move(st.accepted);
            const std::size_t n = ++done;
            if (opt.progress) opt.progress(n, seeds.size());
        },
        opt.threads ? opt.threads : thread_count());
    return out;
}

ExhaustiveMean exhaustive_mean(const AllocationProblem& p) {
    if (p.n_pairs() > kMaxExhaustivePairs)
        throw std::invalid_argument("exhaustive enumeration is limited to " + std::to_string(kMaxExhaustivePairs) +
                                    " pairs");
    ExhaustiveMean m;
    m.y_existing.assign(p.dest_ids.size(), 0.0);
    m.y_hypothetical.assign(p.dest_ids.size(), 0.0);
    std::vector<std::size_t> order(p.n_pairs());
    std::iota(order.begin(), order.end(), std::size_t{0});
    do {
        const RunTotals t = destination_totals(p, allocate_in_order(p, order));
        for (std::size_t j = 0; j < m.y_existing.size(); ++j) {
            m.y_existing[j] += t.y_existing[j];
            m.y_hypothetical[j] += t.y_hypothetical[j];
        }
        ++m.permutations;
    } while (std::next_permutation(order.begin(), order.end()));
    const double n = static_cast<double>(m.permutations);
    for (std::size_t j = 0; j < m.y_existing.size(); ++j) {
        m.y_existing[j] /= n;
        m.y_hypothetical[j] /= n;
    }
    return m;
}

}  // namespace gravflow
