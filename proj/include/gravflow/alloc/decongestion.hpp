#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "gravflow/alloc/allocation.hpp"

namespace gravflow {

// phi_j = demand from congested-feeding origins / total demand, from the
// given (normally uncapped, zero-reduction) predictions. 0 when a destination
// has no demand.
std::map<std::string, double> congested_fractions(const std::vector<PredictedPairFlow>& baseline,
                                                  const SystemSnapshot& s);

struct SummaryStats {
    double mean = 0.0;
    double sd = 0.0;       // sample SD over seeds
    double p2_5 = 0.0;
    double p97_5 = 0.0;
};
SummaryStats summarize(std::span<const double> per_seed);

struct SplitMeans {
    double existing = 0.0;
    double hypothetical = 0.0;
};

enum class DestinationClass { positive_marginal, over_enrolled, under_predicted, none };
std::string_view to_string(DestinationClass c);

struct DestinationReport {
    std::string dest_id;
    std::string region;
    double phi = 0.0;
    double observed_b = 0.0;
    double slots = 0.0;   // after scaling
    SummaryStats y;
    SummaryStats d_total;
    SummaryStats d_marg;
    SplitMeans y_split;
    SplitMeans d_total_split;
    SplitMeans d_marg_split;
    DestinationClass classification = DestinationClass::none;
};

struct SystemReport {
    double observed_total = 0.0;
    double slots_total = 0.0;
    double pools_total = 0.0;
    SummaryStats y;
    SummaryStats d_total;
    SummaryStats d_marg;
    SplitMeans y_split;
    SplitMeans d_total_split;
    SplitMeans d_marg_split;
};

struct ClassificationCounts {
    std::size_t positive_marginal = 0;
    std::size_t over_enrolled = 0;
    std::size_t under_predicted = 0;
};

struct DecongestionReport {
    std::size_t seeds = 0;
    std::vector<DestinationReport> destinations;   // dest id order
    SystemReport system;
    ClassificationCounts classification;
};

// Per-seed quantities for one destination and one run.
struct SeedDecongestion {
    double y = 0.0, y_existing = 0.0, y_hypothetical = 0.0;
    double d_total = 0.0, d_total_existing = 0.0, d_total_hypothetical = 0.0;
    double d_marg = 0.0, d_marg_existing = 0.0, d_marg_hypothetical = 0.0;
};
// D_total = Y phi, D_marg = max(0, Y - b) phi; the existing part of D_marg is
// its share Y_existing / Y and the hypothetical part is the remainder.
SeedDecongestion seed_decongestion(double y_existing, double y_hypothetical, double phi, double observed_b);

DestinationClass classify(double mean_y, double observed_b, double slots);

// Observed b_j is the snapshot's observed flow into each destination.
DecongestionReport decongestion_report(const AllocationProblem& p, const MonteCarloRun& mc,
                                       const std::map<std::string, double>& phi, const SystemSnapshot& s);

}  // namespace gravflow
