#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gravflow/estimate/glm.hpp"

namespace gravflow {

struct LrtResult {
    double stat = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};

// 2 (LL_current - LL_previous) against chi-squared on df degrees of freedom;
// df = 0 gives p = 1.
LrtResult likelihood_ratio(double ll_previous, double ll_current, double df);

// Test of alpha = 0 (Poisson) against the NB2 fit. The null sits on the
// boundary of the parameter space, so the reference law is the 50:50 mixture
// of a point mass at 0 and chi-squared(1).
LrtResult dispersion_boundary_test(double ll_poisson, double ll_negbin);

struct ComparisonRow {
    std::string label;
    Family family = Family::negbin;
    double log_likelihood = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    std::size_t k_params = 0;
    std::size_t n_obs = 0;
    double dispersion_alpha = 0.0;
    // Absent for the first row and when the row does not nest its predecessor.
    std::optional<LrtResult> lrt;
    bool nested_in_previous = false;
};

struct ModelComparison {
    std::vector<ComparisonRow> rows;
};

// LRT against the immediately preceding row whenever the predecessor's terms
// are a subset of the current row's and both are count models on the same rows.
ModelComparison compare_models(const std::vector<std::pair<std::string, FittedModel>>& fits);

// Builds the design, fits the family, applies the clustered covariance and
// stores the spec with its region levels resolved, so the model can rebuild
// its own design rows later.
FittedModel fit_specification(const SystemSnapshot& s, const ModelSpec& spec, Family family = Family::negbin,
                              const FitOptions& opt = {});

// Fits every rung of specification_ladder(base) with NB2.
std::vector<std::pair<std::string, FittedModel>> fit_ladder(const SystemSnapshot& s, const ModelSpec& base,
                                                            const FitOptions& opt = {});

// log-OLS, Poisson and NB2 on the same specification, plus the dispersion test.
struct FamilyComparison {
    FittedModel ols_log;
    FittedModel poisson;
    FittedModel negbin;
    LrtResult dispersion_test;
    double dispersion_wald_z = 0.0;
    double dispersion_wald_p = 1.0;
};
FamilyComparison compare_families(const DesignMatrix& d, const FitOptions& opt = {});

// Refits under a range of cost floors. Reported whenever any row was floored.
struct FloorSensitivityRow {
    double cost_floor = 0.0;
    std::size_t floored_rows = 0;
    double ln_net_cost = 0.0;
    double log_likelihood = 0.0;
};
std::vector<FloorSensitivityRow> cost_floor_sensitivity(const SystemSnapshot& s, const ModelSpec& spec,
                                                        const std::vector<double>& floors,
                                                        const FitOptions& opt = {});

}  // namespace gravflow
