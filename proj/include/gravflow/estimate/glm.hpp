#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gravflow/estimate/design.hpp"

namespace gravflow {

enum class Family { negbin, poisson, ols_log };
std::string_view to_string(Family f);
Family parse_family(std::string_view text);

class RankDeficientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FitOptions {
    double tol = 1e-8;         // on max |change| of any parameter
    int max_outer = 200;       // coefficient/dispersion alternations
    int max_irls = 100;        // IRLS steps per alternation
    // Warm start; ignored when the size does not match the design.
    std::vector<double> start_coefficients;
    std::optional<double> start_alpha;
};

struct FittedModel {
    Family family = Family::negbin;
    ModelSpec spec;
    std::vector<std::string> names;
    std::vector<double> coefficients;
    double dispersion_alpha = 0.0;
    bool alpha_at_boundary = false;
    double alpha_std_error = std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXd covariance;
    std::string covariance_type = "model";
    double log_likelihood = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    std::size_t n_obs = 0;
    std::size_t n_clusters = 0;
    std::size_t k_params = 0;   // coefficients + 1 when the dispersion is estimated
    bool converged = false;
    int iterations = 0;
    double last_change = 0.0;
    // log-OLS only.
    std::size_t excluded_zero_rows = 0;
    bool comparable_to_count_models = true;
    // Rows whose net cost was raised to the floor.
    std::size_t floored_rows = 0;

    std::size_t index_of(std::string_view name) const;
    double coef(std::string_view name) const { return coefficients.at(index_of(name)); }
    double std_error(std::size_t i) const;
    double z_value(std::size_t i) const;
    double p_value(std::size_t i) const;
};

// NB2 (variance mu + alpha mu^2) with log link. Alternates IRLS on the
// coefficients with a profile-likelihood root solve for alpha.
FittedModel fit_negbin(const DesignMatrix& d, const FitOptions& opt = {});
FittedModel fit_poisson(const DesignMatrix& d, const FitOptions& opt = {});
// OLS of ln(response) on rows with response > 0.
FittedModel fit_ols_log(const DesignMatrix& d);

// Cluster-robust sandwich with origin clusters and the CR1 factor
// G/(G-1) * (N-1)/(N-k). Throws std::invalid_argument for a single cluster.
Eigen::MatrixXd clustered_covariance(const FittedModel& f, const DesignMatrix& d);
// Replaces f.covariance (and alpha_std_error for negbin) with the clustered version.
void apply_clustered_covariance(FittedModel& f, const DesignMatrix& d);
// Heteroskedasticity-robust sandwich without clustering or small-sample factor.
Eigen::MatrixXd robust_covariance(const FittedModel& f, const DesignMatrix& d);
double cr1_factor(std::size_t n_clusters, std::size_t n_obs, std::size_t k);

// exp(linear predictor). Throws std::invalid_argument when a fitted term is missing.
double predict_flow(const FittedModel& f, const std::map<std::string, double>& row);
double predict_flow(const FittedModel& f, std::span<const double> row_in_column_order);
std::vector<double> fitted_means(const FittedModel& f, const DesignMatrix& d);

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
};
Metrics eval_metrics(const FittedModel& f, const DesignMatrix& d);

// Per-row NB2 log-density and its derivative in alpha; alpha = 0 gives the
// Poisson limit. Exposed for tests and the profile solver.
double nb2_log_density(double y, double mu, double alpha);
double nb2_alpha_score(double y, double mu, double alpha);
double nb2_loglik(std::span<const double> y, std::span<const double> mu, double alpha);

double normal_two_sided_p(double z);
double chi_squared_upper_p(double stat, double df);

}  // namespace gravflow
