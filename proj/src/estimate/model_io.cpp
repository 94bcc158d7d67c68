#include "gravflow/estimate/model_io.hpp"

#include "gravflow/core/types.hpp"

namespace gravflow {

json to_json(const ModelSpec& spec) {
    return json{{"include_rating", spec.include_rating},
                {"include_origin_region_fe", spec.include_origin_region_fe},
                {"include_dest_region_fe", spec.include_dest_region_fe},
                {"include_origin_income", spec.include_origin_income},
                {"include_dest_income", spec.include_dest_income},
                {"reference_region", spec.reference_region},
                {"regions", spec.regions},
                {"zero_flow_policy", std::string(to_string(spec.zero_flow_policy))},
                {"cost_floor", spec.cost_floor}};
}

ModelSpec model_spec_from_json(const json& j) {
    if (!j.is_object()) throw InputError("model spec must be a JSON object");
    ModelSpec m;
    try {
        m.include_rating = j.value("include_rating", m.include_rating);
        m.include_origin_region_fe = j.value("include_origin_region_fe", m.include_origin_region_fe);
        m.include_dest_region_fe = j.value("include_dest_region_fe", m.include_dest_region_fe);
        m.include_origin_income = j.value("include_origin_income", m.include_origin_income);
        m.include_dest_income = j.value("include_dest_income", m.include_dest_income);
        m.reference_region = j.value("reference_region", m.reference_region);
        m.regions = j.value("regions", m.regions);
        if (j.contains("zero_flow_policy"))
            m.zero_flow_policy = parse_zero_flow_policy(j.at("zero_flow_policy").get<std::string>());
        m.cost_floor = j.value("cost_floor", m.cost_floor);
    } catch (const json::exception& e) {
        throw InputError(std::string("model spec: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("model spec: ") + e.what());
    }
    if (!(m.cost_floor > 0.0)) throw InputError("model spec: cost_floor must be positive");
    return m;
}

json to_json(const FittedModel& f) {
    json coefs = json::array();
    for (std::size_t i = 0; i < f.names.size(); ++i) {
        coefs.push_back({{"name", f.names[i]},
                         {"estimate", f.coefficients[i]},
                         {"std_error", number_or_null(f.std_error(i))},
                         {"z_value", number_or_null(f.z_value(i))},
                         {"p_value", number_or_null(f.p_value(i))}});
    }
    json cov = json::array();
    for (Eigen::Index r = 0; r < f.covariance.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < f.covariance.cols(); ++c) row.push_back(number_or_null(f.covariance(r, c)));
        cov.push_back(std::move(row));
    }
    json j{{"family", std::string(to_string(f.family))},
           {"spec", to_json(f.spec)},
           {"coefficients", coefs},
           {"log_likelihood", number_or_null(f.log_likelihood)},
           {"aic", number_or_null(f.aic)},
           {"bic", number_or_null(f.bic)},
           {"n_obs", f.n_obs},
           {"n_clusters", f.n_clusters},
           {"k_params", f.k_params},
           {"convergence", {{"converged", f.converged}, {"iterations", f.iterations}, {"last_change", f.last_change}}},
           {"covariance", {{"type", f.covariance_type}, {"matrix", cov}}},
           {"floored_rows", f.floored_rows}};
    if (f.family == Family::negbin) {
        const double z = f.dispersion_alpha / f.alpha_std_error;
        j["dispersion"] = {{"alpha", f.dispersion_alpha},
                           {"std_error", number_or_null(f.alpha_std_error)},
                           {"z_value", number_or_null(z)},
                           {"p_value", number_or_null(std::isfinite(z) ? 0.5 * std::erfc(z / std::sqrt(2.0)) : NAN)},
                           {"at_boundary", f.alpha_at_boundary}};
    }
    if (f.family == Family::ols_log) {
        j["excluded_zero_rows"] = f.excluded_zero_rows;
        j["comparable_to_count_models"] = f.comparable_to_count_models;
    }
    return j;
}

FittedModel fitted_model_from_json(const json& j) {
    FittedModel f;
    try {
        f.family = parse_family(j.at("family").get<std::string>());
        if (j.contains("spec")) f.spec = model_spec_from_json(j.at("spec"));
        for (const auto& c : j.at("coefficients")) {
            f.names.push_back(c.at("name").get<std::string>());
            f.coefficients.push_back(c.at("estimate").get<double>());
        }
        const auto k = static_cast<Eigen::Index>(f.names.size());
        f.covariance = Eigen::MatrixXd::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
        if (j.contains("covariance")) {
            const auto& cov = j.at("covariance");
            f.covariance_type = cov.value("type", f.covariance_type);
            const auto& m = cov.at("matrix");
            if (m.size() != f.names.size()) throw InputError("model: covariance has the wrong size");
            for (Eigen::Index r = 0; r < k; ++r)
                for (Eigen::Index c = 0; c < k; ++c) f.covariance(r, c) = number_or_nan(m.at(r).at(c));
        }
        f.log_likelihood = number_or_nan(j.at("log_likelihood"));
        f.aic = number_or_nan(j.at("aic"));
        f.bic = number_or_nan(j.at("bic"));
        f.n_obs = j.at("n_obs").get<std::size_t>();
        f.n_clusters = j.value("n_clusters", std::size_t{0});
        f.k_params = j.value("k_params", f.names.size());
        const auto& conv = j.at("convergence");
        f.converged = conv.at("converged").get<bool>();
        f.iterations = conv.value("iterations", 0);
        f.last_change = conv.value("last_change", 0.0);
        f.floored_rows = j.value("floored_rows", std::size_t{0});
        if (j.contains("dispersion")) {
            const auto& d = j.at("dispersion");
            f.dispersion_alpha = d.at("alpha").get<double>();
            f.alpha_std_error = number_or_nan(d.value("std_error", json(nullptr)));
            f.alpha_at_boundary = d.value("at_boundary", false);
        }
        f.excluded_zero_rows = j.value("excluded_zero_rows", std::size_t{0});
        f.comparable_to_count_models = j.value("comparable_to_count_models", f.family != Family::ols_log);
    } catch (const json::exception& e) {
        throw InputError(std::string("model: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("model: ") + e.what());
    }
    if (f.dispersion_alpha < 0.0) throw InputError("model: negative dispersion");
    return f;
}

namespace {

json lrt_json(const std::optional<LrtResult>& r) {
    if (!r) return nullptr;
    return {{"stat", r->stat}, {"df", r->df}, {"p_value", r->p_value}};
}

json interval_json(const PercentileInterval& p) {
    return {{"lower_2_5", p.lower}, {"median", p.median}, {"upper_97_5", p.upper}};
}

json fit_summary(const FittedModel& f) {
    json j{{"family", std::string(to_string(f.family))},
           {"log_likelihood", number_or_null(f.log_likelihood)},
           {"aic", number_or_null(f.aic)},
           {"bic", number_or_null(f.bic)},
           {"k_params", f.k_params},
           {"n_obs", f.n_obs},
           {"converged", f.converged}};
    if (f.family == Family::negbin) j["dispersion_alpha"] = f.dispersion_alpha;
    else if (f.family == Family::poisson) j["dispersion_alpha"] = 0.0;
    if (f.family == Family::ols_log) {
        j["excluded_zero_rows"] = f.excluded_zero_rows;
        j["comparable_to_count_models"] = false;
    }
    return j;
}

}  // namespace

json to_json(const ModelComparison& c) {
    json rows = json::array();
    for (const auto& r : c.rows) {
        rows.push_back({{"label", r.label},
                        {"family", std::string(to_string(r.family))},
                        {"log_likelihood", number_or_null(r.log_likelihood)},
                        {"aic", number_or_null(r.aic)},
                        {"bic", number_or_null(r.bic)},
                        {"k_params", r.k_params},
                        {"n_obs", r.n_obs},
                        {"nested_in_previous", r.nested_in_previous},
                        {"lrt", lrt_json(r.lrt)},
                        {"dispersion_alpha", r.dispersion_alpha}});
    }
    return {{"rows", rows}};
}

json to_json(const FamilyComparison& c) {
    return {{"ols_log", fit_summary(c.ols_log)},
            {"poisson", fit_summary(c.poisson)},
            {"negbin", fit_summary(c.negbin)},
            {"dispersion_test",
             {{"lrt", lrt_json(c.dispersion_test)},
              {"wald_z", c.dispersion_wald_z},
              {"wald_p_value", c.dispersion_wald_p}}}};
}

json to_json(const BootstrapReport& r) {
    json coefs = json::array();
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        json row = interval_json(r.coefficients[i]);
        row["name"] = r.names[i];
        row["full_sample"] = r.point_estimates[i];
        coefs.push_back(std::move(row));
    }
    return {{"replicates", r.replicates},
            {"seed", r.seed},
            {"failed_replicates", r.failed_replicates},
            {"method", "origin-cluster resampling, percentile intervals"},
            {"coefficients", coefs},
            {"dispersion_alpha", interval_json(r.alpha)},
            {"metrics", {{"mae", interval_json(r.mae)}, {"rmse", interval_json(r.rmse)}}}};
}

json to_json(const std::vector<FloorSensitivityRow>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"cost_floor", r.cost_floor},
                       {"floored_rows", r.floored_rows},
                       {"ln_net_cost", r.ln_net_cost},
                       {"log_likelihood", r.log_likelihood}});
    return out;
}

}  // namespace gravflow
