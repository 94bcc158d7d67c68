#include "gravflow/estimate/compare.hpp"

#include <algorithm>
#include <cmath>

namespace gravflow {

LrtResult likelihood_ratio(double ll_previous, double ll_current, double df) {
    LrtResult r;
    r.stat = 2.0 * (ll_current - ll_previous);
    r.df = df;
    r.p_value = chi_squared_upper_p(r.stat, df);
    return r;
}

LrtResult dispersion_boundary_test(double ll_poisson, double ll_negbin) {
    LrtResult r = likelihood_ratio(ll_poisson, ll_negbin, 1.0);
    r.p_value = r.stat > 0.0 ? 0.5 * chi_squared_upper_p(r.stat, 1.0) : 1.0;
    return r;
}

namespace {

bool terms_nest(const FittedModel& previous, const FittedModel& current) {
    for (const auto& n : previous.names)
        if (std::find(current.names.begin(), current.names.end(), n) == current.names.end()) return false;
    return true;
}

}  // namespace

ModelComparison compare_models(const std::vector<std::pair<std::string, FittedModel>>& fits) {
    ModelComparison out;
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const auto& [label, f] = fits[i];
        ComparisonRow row;
        row.label = label;
        row.family = f.family;
        row.log_likelihood = f.log_likelihood;
        row.aic = f.aic;
        row.bic = f.bic;
        row.k_params = f.k_params;
        row.n_obs = f.n_obs;
        row.dispersion_alpha = f.dispersion_alpha;
        if (i > 0) {
            const FittedModel& prev = fits[i - 1].second;
            const bool counts = f.family != Family::ols_log && prev.family != Family::ols_log;
            row.nested_in_previous = counts && prev.n_obs == f.n_obs && terms_nest(prev, f) &&
                                     prev.k_params <= f.k_params;
            if (row.nested_in_previous)
                row.lrt = likelihood_ratio(prev.log_likelihood, f.log_likelihood,
                                           static_cast<double>(f.k_params - prev.k_params));
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

FittedModel fit_specification(const SystemSnapshot& s, const ModelSpec& spec, Family family, const FitOptions& opt) {
    const ModelSpec resolved = DesignBuilder(s, spec).spec();
    const DesignMatrix d = build_design(s, resolved);
    FittedModel f = family == Family::negbin    ? fit_negbin(d, opt)
                    : family == Family::poisson ? fit_poisson(d, opt)
                                                : fit_ols_log(d);
    f.spec = resolved;
    f.floored_rows = d.floored_rows;
    apply_clustered_covariance(f, d);
    return f;
}

std::vector<std::pair<std::string, FittedModel>> fit_ladder(const SystemSnapshot& s, const ModelSpec& base,
                                                            const FitOptions& opt) {
    std::vector<std::pair<std::string, FittedModel>> out;
    for (const auto& [label, spec] : specification_ladder(base))
        out.emplace_back(label, fit_specification(s, spec, Family::negbin, opt));
    return out;
}

FamilyComparison compare_families(const DesignMatrix& d, const FitOptions& opt) {
    FamilyComparison c;
    c.ols_log = fit_ols_log(d);
    c.poisson = fit_poisson(d, opt);
    c.negbin = fit_negbin(d, opt);
    apply_clustered_covariance(c.ols_log, d);
    apply_clustered_covariance(c.poisson, d);
    apply_clustered_covariance(c.negbin, d);
    c.dispersion_test = dispersion_boundary_test(c.poisson.log_likelihood, c.negbin.log_likelihood);
    if (std::isfinite(c.negbin.alpha_std_error) && c.negbin.alpha_std_error > 0.0) {
        c.dispersion_wald_z = c.negbin.dispersion_alpha / c.negbin.alpha_std_error;
        c.dispersion_wald_p = 0.5 * std::erfc(c.dispersion_wald_z / std::sqrt(2.0));
    }
    return c;
}

std::vector<FloorSensitivityRow> cost_floor_sensitivity(const SystemSnapshot& s, const ModelSpec& spec,
                                                        const std::vector<double>& floors,
                                                        const FitOptions& opt) {
    std::vector<FloorSensitivityRow> out;
    for (double floor : floors) {
        ModelSpec m = spec;
        m.cost_floor = floor;
        const DesignMatrix d = build_design(s, m);
        const FittedModel f = fit_negbin(d, opt);
        out.push_back({floor, d.floored_rows, f.coef("ln_net_cost"), f.log_likelihood});
    }
    return out;
}

}  // namespace gravflow
