#include "gravflow/alloc/scenario.hpp"

#include "gravflow/core/rng.hpp"

namespace gravflow {

json to_json(const SimulationOptions& o) {
    return {{"augmentation", to_json(o.augmentation)},
            {"phi_source", {{"predictions", "uncapped"}, {"cost_reduction", o.phi_cost_reduction}}}};
}

ScenarioRunner::ScenarioRunner(const SystemSnapshot& s, const FittedModel& f, SimulationOptions opt)
    : snapshot_(&s),
      model_(&f),
      opt_(opt),
      pools_(candidate_pools(s)),
      pool_map_(pool_map(pools_)),
      predictor_(f, s, augment_pairs(s, opt.augmentation)) {
    if (!f.converged) throw std::invalid_argument("model did not converge; refusing to simulate");
    phi_ = congested_fractions(predictor_.predict(opt_.phi_cost_reduction, pool_map_, false), s);
}

ScenarioResult ScenarioRunner::run(const ScenarioSpec& spec, const MonteCarloOptions& mc) const {
    check_scenario(spec);
    ScenarioResult r;
    r.spec = spec;
    const auto predicted = predictor_.predict(spec.cost_reduction, pool_map_);
    for (const auto& p : predicted) {
        r.demand.uncapped += p.yhat_uncapped;
        r.demand.capped += p.yhat;
        (p.pair_class == PairClass::existing ? r.existing_pairs : r.hypothetical_pairs) += 1;
    }
    r.problem = make_problem(*snapshot_, predicted, pools_, spec);
    for (double e : r.problem.pools) r.demand.pools += e;
    for (double k : r.problem.slots) r.demand.slots += k;
    r.monte_carlo = run_monte_carlo(r.problem, spec.seeds, mc);
    r.report = decongestion_report(r.problem, r.monte_carlo, phi_, *snapshot_);
    return r;
}

json to_json(const SummaryStats& s) {
    return {{"mean", s.mean}, {"sd", s.sd}, {"p2_5", s.p2_5}, {"p97_5", s.p97_5}};
}

namespace {

json split_json(const SplitMeans& m) {
    const double total = m.existing + m.hypothetical;
    return {{"existing", m.existing},
            {"hypothetical", m.hypothetical},
            {"existing_pct", total > 0.0 ? 100.0 * m.existing / total : 0.0},
            {"hypothetical_pct", total > 0.0 ? 100.0 * m.hypothetical / total : 0.0}};
}

}  // namespace

json to_json(const DecongestionReport& r) {
    json dests = json::array();
    for (const auto& d : r.destinations) {
        dests.push_back({{"dest_id", d.dest_id},
                         {"region", d.region},
                         {"phi", d.phi},
                         {"observed_b", d.observed_b},
                         {"slots", d.slots},
                         {"y", to_json(d.y)},
                         {"d_total", to_json(d.d_total)},
                         {"d_marg", to_json(d.d_marg)},
                         {"y_split", split_json(d.y_split)},
                         {"d_total_split", split_json(d.d_total_split)},
                         {"d_marg_split", split_json(d.d_marg_split)},
                         {"classification", std::string(to_string(d.classification))}});
    }
    const auto& s = r.system;
    return {{"seeds", r.seeds},
            {"system",
             {{"observed_total", s.observed_total},
              {"slots_total", s.slots_total},
              {"pools_total", s.pools_total},
              {"y", to_json(s.y)},
              {"d_total", to_json(s.d_total)},
              {"d_marg", to_json(s.d_marg)},
              {"y_split", split_json(s.y_split)},
              {"d_total_split", split_json(s.d_total_split)},
              {"d_marg_split", split_json(s.d_marg_split)}}},
            {"classification",
             {{"positive_marginal", r.classification.positive_marginal},
              {"over_enrolled", r.classification.over_enrolled},
              {"under_predicted", r.classification.under_predicted}}},
            {"destinations", dests}};
}

json to_json(const ScenarioResult& r, const ScenarioRunner& runner) {
    json manifest{{"scenario", to_json(r.spec)},
                  {"simulation", to_json(runner.options())},
                  {"prng", {{"generator", rng::kGeneratorName}, {"shuffle", rng::kShuffleName}}},
                  {"model",
                   {{"family", std::string(to_string(runner.model().family))},
                    {"ln_net_cost", runner.model().coef("ln_net_cost")},
                    {"cost_floor", runner.model().spec.cost_floor}}}};
    json j{{"manifest", manifest},
           {"label", r.spec.label},
           {"cost_reduction", r.spec.cost_reduction},
           {"pairs", {{"existing", r.existing_pairs}, {"hypothetical", r.hypothetical_pairs}}},
           {"demand",
            {{"uncapped_total", r.demand.uncapped},
             {"capped_total", r.demand.capped},
             {"pools_total", r.demand.pools},
             {"slots_total", r.demand.slots}}}};
    const json report = to_json(r.report);
    for (const auto& [k, v] : report.items()) j[k] = v;
    return j;
}

json per_seed_json(const ScenarioResult& r, std::size_t run_index) {
    const auto& p = r.problem;
    json flows = json::array();
    if (run_index < r.monte_carlo.accepted.size()) {
        const auto& a = r.monte_carlo.accepted[run_index];
        for (std::size_t i = 0; i < p.n_pairs(); ++i) {
            if (a[i] <= 0.0) continue;
            const auto& pair = p.pairs[i];
            flows.push_back({{"origin_id", p.origin_ids[pair.origin]},
                             {"dest_id", p.dest_ids[pair.dest]},
                             {"pair_class", std::string(to_string(pair.pair_class))},
                             {"accepted", a[i]}});
        }
    }
    return {{"label", r.spec.label}, {"seed", r.monte_carlo.seeds.at(run_index)}, {"accepted", flows}};
}

}  // namespace gravflow
