#include "gravflow/alloc/decongestion.hpp"

#include <algorithm>
#include <set>

#include "gravflow/core/stats.hpp"

namespace gravflow {

std::map<std::string, double> congested_fractions(const std::vector<PredictedPairFlow>& baseline,
                                                  const SystemSnapshot& s) {
    const auto feeding = congested_feeding_origins(s);
    std::map<std::string, double> congested, total;
    for (const auto& sc : s.schools())
        if (sc.sector == Sector::esc_destination) total[sc.school_id] = congested[sc.school_id] = 0.0;
    for (const auto& f : baseline) {
        total[f.dest_id] += f.yhat;
        if (std::binary_search(feeding.begin(), feeding.end(), f.origin_id)) congested[f.dest_id] += f.yhat;
    }
    std::map<std::string, double> phi;
    for (const auto& [dest, t] : total) phi[dest] = t > 0.0 ? std::clamp(congested[dest] / t, 0.0, 1.0) : 0.0;
    return phi;
}

SummaryStats summarize(std::span<const double> per_seed) {
    SummaryStats st;
    if (per_seed.empty()) return st;
    st.mean = mean_of(per_seed);
    st.sd = sample_sd(per_seed);
    std::vector<double> sorted(per_seed.begin(), per_seed.end());
    std::sort(sorted.begin(), sorted.end());
    st.p2_5 = quantile_sorted(sorted, 0.025);
    st.p97_5 = quantile_sorted(sorted, 0.975);
    return st;
}

std::string_view to_string(DestinationClass c) {
    switch (c) {
        case DestinationClass::positive_marginal: return "positive_marginal";
        case DestinationClass::over_enrolled: return "over_enrolled";
        case DestinationClass::under_predicted: return "under_predicted";
        case DestinationClass::none: return "none";
    }
    return "?";
}

SeedDecongestion seed_decongestion(double y_existing, double y_hypothetical, double phi, double observed_b) {
    SeedDecongestion d;
    d.y_existing = y_existing;
    d.y_hypothetical = y_hypothetical;
    d.y = y_existing + y_hypothetical;
    d.d_total = d.y * phi;
    d.d_total_existing = y_existing * phi;
    d.d_total_hypothetical = y_hypothetical * phi;
    d.d_marg = std::max(0.0, d.y - observed_b) * phi;
    d.d_marg_existing = d.y > 0.0 ? d.d_marg * (y_existing / d.y) : 0.0;
    d.d_marg_hypothetical = d.d_marg - d.d_marg_existing;
    return d;
}

DestinationClass classify(double mean_y, double observed_b, double slots) {
    if (observed_b > slots) return DestinationClass::over_enrolled;
    if (mean_y > observed_b) return DestinationClass::positive_marginal;
    if (mean_y < observed_b) return DestinationClass::under_predicted;
    return DestinationClass::none;
}

DecongestionReport decongestion_report(const AllocationProblem& p, const MonteCarloRun& mc,
                                       const std::map<std::string, double>& phi, const SystemSnapshot& s) {
    const std::size_t nd = p.dest_ids.size();
    const std::size_t nr = mc.runs.size();
    std::map<std::string, double> observed;
    for (const auto& r : s.od()) observed[r.dest_id] += static_cast<double>(r.observed_flow);

    DecongestionReport rep;
    rep.seeds = nr;
    std::vector<SeedDecongestion> sys(nr);
    std::vector<double> y(nr), dt(nr), dm(nr);
    for (std::size_t j = 0; j < nd; ++j) {
        DestinationReport d;
        d.dest_id = p.dest_ids[j];
        d.region = s.find(d.dest_id)->region;
        auto it = phi.find(d.dest_id);
        d.phi = it == phi.end() ? 0.0 : it->second;
        d.observed_b = observed[d.dest_id];
        d.slots = p.slots[j];
        SplitMeans ys, dts, dms;
        for (std::size_t r = 0; r < nr; ++r) {
            const auto sd = seed_decongestion(mc.runs[r].y_existing[j], mc.runs[r].y_hypothetical[j], d.phi, d.observed_b);
            y[r] = sd.y;
            dt[r] = sd.d_total;
            dm[r] = sd.d_marg;
            ys.existing += sd.y_existing;
            ys.hypothetical += sd.y_hypothetical;
            dts.existing += sd.d_total_existing;
            dts.hypothetical += sd.d_total_hypothetical;
            dms.existing += sd.d_marg_existing;
            dms.hypothetical += sd.d_marg_hypothetical;
            auto& t = sys[r];
            t.y += sd.y;
            t.y_existing += sd.y_existing;
            t.y_hypothetical += sd.y_hypothetical;
            t.d_total += sd.d_total;
            t.d_total_existing += sd.d_total_existing;
            t.d_total_hypothetical += sd.d_total_hypothetical;
            t.d_marg += sd.d_marg;
            t.d_marg_existing += sd.d_marg_existing;
            t.d_marg_hypothetical += sd.d_marg_hypothetical;
        }
        d.y = summarize(y);
        d.d_total = summarize(dt);
        d.d_marg = summarize(dm);
        const double n = static_cast<double>(nr);
        d.y_split = {ys.existing / n, ys.hypothetical / n};
        d.d_total_split = {dts.existing / n, dts.hypothetical / n};
        d.d_marg_split = {dms.existing / n, dms.hypothetical / n};
        d.classification = classify(d.y.mean, d.observed_b, d.slots);
        switch (d.classification) {
            case DestinationClass::positive_marginal: ++rep.classification.positive_marginal; break;
            case DestinationClass::over_enrolled: ++rep.classification.over_enrolled; break;
            case DestinationClass::under_predicted: ++rep.classification.under_predicted; break;
            case DestinationClass::none: break;
        }
        rep.system.observed_total += d.observed_b;
        rep.system.slots_total += d.slots;
        rep.destinations.push_back(std::move(d));
    }
    for (double e : p.pools) rep.system.pools_total += e;

    const double n = static_cast<double>(nr);
    SplitMeans ys, dts, dms;
    for (std::size_t r = 0; r < nr; ++r) {
        y[r] = sys[r].y;
        dt[r] = sys[r].d_total;
        dm[r] = sys[r].d_marg;
        ys.existing += sys[r].y_existing;
        ys.hypothetical += sys[r].y_hypothetical;
        dts.existing += sys[r].d_total_existing;
        dts.hypothetical += sys[r].d_total_hypothetical;
        dms.existing += sys[r].d_marg_existing;
        dms.hypothetical += sys[r].d_marg_hypothetical;
    }
    rep.system.y = summarize(y);
    rep.system.d_total = summarize(dt);
    rep.system.d_marg = summarize(dm);
    rep.system.y_split = {ys.existing / n, ys.hypothetical / n};
    rep.system.d_total_split = {dts.existing / n, dts.hypothetical / n};
    rep.system.d_marg_split = {dms.existing / n, dms.hypothetical / n};
    return rep;
}

}  // namespace gravflow
