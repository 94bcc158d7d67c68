#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gravflow/core/json_io.hpp"
#include "gravflow/core/types.hpp"

namespace gravflow {

// Parameters of a synthetic school network with known ground truth.
//
// Schools are scattered uniformly over a box split into equal-width vertical
// bands, one per region (the first region is the reference level). LGU
// incomes are log-normal per square grid cell. Each origin is paired with its
// `pairs_per_origin` nearest ESC destinations; road distance is the Euclidean
// distance times `detour_factor`. Pair flows are NB2 draws with mean
// exp(linear predictor) using the named `true_coefficients` (same names as
// the estimator's design columns, plus "alpha" for the dispersion). With
// probability `zero_pair_fraction` a pair is a structural zero instead.
struct SyntheticConfig {
    int n_origins = 1500;
    int n_esc = 400;
    int n_public = 100;
    double box_width_km = 150.0;
    double box_height_km = 100.0;
    double detour_factor = 1.3;
    int pairs_per_origin = 20;
    std::vector<std::string> regions{"NCR", "R3", "R4A"};
    std::map<std::string, double> true_coefficients = reference_coefficients();
    double zero_pair_fraction = 0.0;
    double subsidy_baseline = 9.0;  // thousands of pesos
    double tuition_min = 12.0;
    double tuition_max = 45.0;
    int rating_max = 5;
    double lgu_cell_km = 10.0;
    double ln_income_mean = 20.0;
    double ln_income_sd = 0.8;
    // K_j = round(b_j * U(slot_multiplier_min, slot_multiplier_max)), at least 1.
    double slot_multiplier_min = 0.7;
    double slot_multiplier_max = 1.6;
    // Candidate pools are scaled so that sum(E_i) = ratio * sum(K_j).
    double pool_to_slot_ratio = 5.3;
    double congested_fraction = 0.4;
    int feeders_per_origin = 2;
    std::uint64_t rng_seed = 1;

    // Default ground truth: the full specification with regional effects.
    static std::map<std::string, double> reference_coefficients();
};

// Throws std::invalid_argument for a degenerate or out-of-range config.
void check_config(const SyntheticConfig& cfg);

json to_json(const SyntheticConfig& cfg);
// Keys mirror the field names; missing keys keep defaults. Throws InputError.
SyntheticConfig synthetic_config_from_json(const json& j);

// Deterministic for a fixed rng_seed; the result always passes validation.
SystemSnapshot generate_synthetic(const SyntheticConfig& cfg);

}  // namespace gravflow
