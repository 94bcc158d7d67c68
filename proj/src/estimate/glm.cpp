#include "gravflow/estimate/glm.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "gravflow/simd/kernels.hpp"

namespace gravflow {

namespace {

constexpr double kMaxEta = 700.0;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
// Above this count the per-count sums switch to gamma/digamma identities.
constexpr double kDirectSumLimit = 200.0;

void linear_predictor(const DesignMatrix& d, std::span<const double> beta, std::vector<double>& eta) {
    eta.assign(d.n_rows, 0.0);
    for (std::size_t j = 0; j < d.cols(); ++j) simd::axpy(beta[j], d.column(j), eta);
}

void means_from(const std::vector<double>& eta, std::vector<double>& mu) {
    mu.resize(eta.size());
    for (std::size_t i = 0; i < eta.size(); ++i) mu[i] = std::exp(std::min(eta[i], kMaxEta));
}

Eigen::MatrixXd weighted_gram(const DesignMatrix& d, std::span<const double> w) {
    const auto k = static_cast<Eigen::Index>(d.cols());
    Eigen::MatrixXd g(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = a; b < k; ++b) {
            const double v = simd::weighted_dot(w, d.column(static_cast<std::size_t>(a)),
                                                d.column(static_cast<std::size_t>(b)));
            g(a, b) = v;
            g(b, a) = v;
        }
    }
    return g;
}

Eigen::VectorXd weighted_rhs(const DesignMatrix& d, std::span<const double> w, std::span<const double> z) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(d.cols()));
    for (std::size_t a = 0; a < d.cols(); ++a) r[static_cast<Eigen::Index>(a)] = simd::weighted_dot(w, z, d.column(a));
    return r;
}

void check_rank(const DesignMatrix& d) {
    const std::vector<double> ones(d.n_rows, 1.0);
    const Eigen::MatrixXd g = weighted_gram(d, ones);
    Eigen::VectorXd scale = g.diagonal();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
        if (!(scale[j] > 0.0))
            throw RankDeficientError("design column '" + d.names[static_cast<std::size_t>(j)] + "' is identically zero");
        scale[j] = 1.0 / std::sqrt(scale[j]);
    }
    const Eigen::MatrixXd corr = scale.asDiagonal() * g * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 1e-11 * es.eigenvalues().maxCoeff()))
        throw RankDeficientError("design matrix is rank deficient");
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& g, const Eigen::VectorXd& r) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
        throw RankDeficientError("weighted normal equations are singular");
    return ldlt.solve(r);
}

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& g) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    if (ldlt.info() != Eigen::Success) throw RankDeficientError("information matrix is singular");
    Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
    return 0.5 * (inv + inv.transpose());
}

// Parts of the NB2 log-likelihood that vary with the coefficients; used to
// accept or halve IRLS steps.
double coefficient_kernel(std::span<const double> y, std::span<const double> eta, std::span<const double> mu,
                          double alpha) {
    double s = 0.0;
    if (alpha <= 0.0) {
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * eta[i] - mu[i];
    } else {
        const double r = 1.0 / alpha;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * eta[i] - (y[i] + r) * std::log1p(alpha * mu[i]);
    }
    return s;
}

struct IrlsOutcome {
    int iterations = 0;
    bool converged = false;
    double last_change = 0.0;
};

// Fisher scoring for the coefficients at fixed alpha (alpha = 0 is Poisson).
IrlsOutcome irls(const DesignMatrix& d, double alpha, std::vector<double>& beta, const FitOptions& opt,
                 std::vector<double>& eta, std::vector<double>& mu) {
    const std::size_t n = d.n_rows;
    const std::size_t k = d.cols();
    std::vector<double> w(n), z(n), trial_eta, trial_mu;
    IrlsOutcome out;

    linear_predictor(d, beta, eta);
    means_from(eta, mu);
    double current = coefficient_kernel(d.response, eta, mu, alpha);

    for (int it = 1; it <= opt.max_irls; ++it) {
        out.iterations = it;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = mu[i] / (1.0 + alpha * mu[i]);
            z[i] = eta[i] + (d.response[i] - mu[i]) / mu[i];
        }
        const Eigen::VectorXd next = solve_spd(weighted_gram(d, w), weighted_rhs(d, w, z));
        std::vector<double> step(k);
        for (std::size_t j = 0; j < k; ++j) step[j] = next[static_cast<Eigen::Index>(j)] - beta[j];

        double scale = 1.0;
        std::vector<double> candidate(k);
        double value = 0.0;
        for (int halving = 0; halving < 40; ++halving) {
            for (std::size_t j = 0; j < k; ++j) candidate[j] = beta[j] + scale * step[j];
            linear_predictor(d, candidate, trial_eta);
            means_from(trial_eta, trial_mu);
            value = coefficient_kernel(d.response, trial_eta, trial_mu, alpha);
            if (std::isfinite(value) && value >= current - 1e-12 * std::abs(current)) break;
            scale *= 0.5;
        }
        double change = 0.0;
        for (std::size_t j = 0; j < k; ++j) change = std::max(change, std::abs(candidate[j] - beta[j]));
        beta = candidate;
        eta.swap(trial_eta);
        mu.swap(trial_mu);
        current = value;
        out.last_change = change;
        if (change < opt.tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

double alpha_score_sum(std::span<const double> y, std::span<const double> mu, double alpha) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += nb2_alpha_score(y[i], mu[i], alpha);
    return s;
}

// Maximizes the profile likelihood in alpha for fixed means: the root of the
// alpha score, or the boundary 0 when the score at 0 is non-positive.
double solve_alpha(std::span<const double> y, std::span<const double> mu, double hint) {
    auto score = [&](double a) { return alpha_score_sum(y, mu, a); };
    if (score(0.0) <= 0.0) return 0.0;
    double lo = 0.0;
    double hi = std::max(2.0 * hint, 0.25);
    while (score(hi) > 0.0) {
        lo = hi;
        hi *= 4.0;
        if (hi > 1e8) return hi;
    }
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15 * std::max(1.0, std::abs(a)); };
    const auto [a, b] = boost::math::tools::toms748_solve(score, lo, hi, tol, iters);
    return 0.5 * (a + b);
}

double observed_alpha_information(std::span<const double> y, std::span<const double> mu, double alpha) {
    const double h = std::max(1e-6, 1e-4 * alpha);
    const double lo = std::max(alpha - h, 0.0);
    const double hi = alpha + h;
    return -(alpha_score_sum(y, mu, hi) - alpha_score_sum(y, mu, lo)) / (hi - lo);
}

std::vector<double> initial_coefficients(const DesignMatrix& d, double alpha) {
    const std::size_t n = d.n_rows;
    std::vector<double> w(n), z(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double m = d.response[i] + 0.1;
        w[i] = m / (1.0 + alpha * m);
        z[i] = std::log(m);
    }
    const Eigen::VectorXd b = solve_spd(weighted_gram(d, w), weighted_rhs(d, w, z));
    return {b.data(), b.data() + b.size()};
}

void finish_information_criteria(FittedModel& f) {
    const double k = static_cast<double>(f.k_params);
    f.aic = 2.0 * k - 2.0 * f.log_likelihood;
    f.bic = k * std::log(static_cast<double>(f.n_obs)) - 2.0 * f.log_likelihood;
}

FittedModel fit_count_model(const DesignMatrix& d, const FitOptions& opt, bool estimate_alpha) {
    check_rank(d);
    for (double y : d.response)
        if (!(y >= 0.0) || y != std::floor(y)) throw std::invalid_argument("response must be non-negative integers");

    FittedModel f;
    f.family = estimate_alpha ? Family::negbin : Family::poisson;
    f.names = d.names;
    f.n_obs = d.n_rows;
    f.n_clusters = d.n_clusters();

    double alpha = estimate_alpha ? opt.start_alpha.value_or(0.1) : 0.0;
    std::vector<double> beta = opt.start_coefficients.size() == d.cols() ? opt.start_coefficients
                                                                         : initial_coefficients(d, alpha);
    std::vector<double> eta, mu;

    if (!estimate_alpha) {
        const auto r = irls(d, 0.0, beta, opt, eta, mu);
        f.iterations = r.iterations;
        f.converged = r.converged;
        f.last_change = r.last_change;
    } else {
        for (int outer = 1; outer <= opt.max_outer; ++outer) {
            const std::vector<double> before = beta;
            const auto r = irls(d, alpha, beta, opt, eta, mu);
            const double next_alpha = solve_alpha(d.response, mu, alpha);
            double change = std::abs(next_alpha - alpha);
            for (std::size_t j = 0; j < beta.size(); ++j) change = std::max(change, std::abs(beta[j] - before[j]));
            alpha = next_alpha;
            f.iterations = outer;
            f.last_change = change;
            if (change < opt.tol && r.converged) {
                f.converged = true;
                break;
            }
        }
        // Means at the final coefficients (alpha does not enter them).
        linear_predictor(d, beta, eta);
        means_from(eta, mu);
    }

    f.coefficients = beta;
    f.dispersion_alpha = alpha;
    f.alpha_at_boundary = estimate_alpha && alpha == 0.0;
    f.log_likelihood = nb2_loglik(d.response, mu, alpha);
    f.k_params = d.cols() + (estimate_alpha ? 1 : 0);
    finish_information_criteria(f);

    std::vector<double> w(d.n_rows);
    for (std::size_t i = 0; i < d.n_rows; ++i) w[i] = mu[i] / (1.0 + alpha * mu[i]);
    f.covariance = inverse_spd(weighted_gram(d, w));
    if (estimate_alpha && alpha > 0.0) {
        const double info = observed_alpha_information(d.response, mu, alpha);
        if (info > 0.0) f.alpha_std_error = std::sqrt(1.0 / info);
    }
    return f;
}

// Per-row scores of the coefficients; rows of the returned n x k matrix.
Eigen::MatrixXd coefficient_scores(const FittedModel& f, const DesignMatrix& d, std::vector<double>& alpha_scores) {
    const auto n = static_cast<Eigen::Index>(d.n_rows);
    const auto k = static_cast<Eigen::Index>(d.cols());
    std::vector<double> eta;
    linear_predictor(d, f.coefficients, eta);
    std::vector<double> resid(d.n_rows);
    alpha_scores.clear();
    if (f.family == Family::ols_log) {
        for (std::size_t i = 0; i < d.n_rows; ++i) resid[i] = std::log(d.response[i]) - eta[i];
    } else {
        const double a = f.dispersion_alpha;
        for (std::size_t i = 0; i < d.n_rows; ++i) {
            const double mu = std::exp(std::min(eta[i], kMaxEta));
            resid[i] = (d.response[i] - mu) / (1.0 + a * mu);
            if (f.family == Family::negbin) alpha_scores.push_back(nb2_alpha_score(d.response[i], mu, a));
        }
    }
    Eigen::MatrixXd s(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto col = d.column(static_cast<std::size_t>(j));
        for (Eigen::Index i = 0; i < n; ++i) s(i, j) = col[static_cast<std::size_t>(i)] * resid[static_cast<std::size_t>(i)];
    }
    return s;
}

Eigen::MatrixXd bread_inverse(const FittedModel& f, const DesignMatrix& d) {
    std::vector<double> w(d.n_rows, 1.0);
    if (f.family != Family::ols_log) {
        std::vector<double> eta;
        linear_predictor(d, f.coefficients, eta);
        for (std::size_t i = 0; i < d.n_rows; ++i) {
            const double mu = std::exp(std::min(eta[i], kMaxEta));
            w[i] = mu / (1.0 + f.dispersion_alpha * mu);
        }
    }
    return inverse_spd(weighted_gram(d, w));
}

void check_same_design(const FittedModel& f, const DesignMatrix& d) {
    if (f.names != d.names) throw std::invalid_argument("model was not fitted on this design");
}

}  // namespace

std::string_view to_string(Family f) {
    switch (f) {
        case Family::negbin: return "negbin";
        case Family::poisson: return "poisson";
        case Family::ols_log: return "ols_log";
    }
    return "?";
}

Family parse_family(std::string_view text) {
    if (text == "negbin") return Family::negbin;
    if (text == "poisson") return Family::poisson;
    if (text == "ols_log") return Family::ols_log;
    throw std::invalid_argument("unknown family '" + std::string(text) + "'");
}

std::size_t FittedModel::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    throw std::invalid_argument("model has no term '" + std::string(name) + "'");
}

double FittedModel::std_error(std::size_t i) const {
    const auto j = static_cast<Eigen::Index>(i);
    return std::sqrt(covariance(j, j));
}

double FittedModel::z_value(std::size_t i) const { return coefficients[i] / std_error(i); }

double FittedModel::p_value(std::size_t i) const { return normal_two_sided_p(z_value(i)); }

double nb2_log_density(double y, double mu, double alpha) {
    if (alpha <= 0.0) return (y > 0.0 ? y * std::log(mu) : 0.0) - mu - std::lgamma(y + 1.0);
    double counts = 0.0;
    if (y < kDirectSumLimit) {
        for (double t = 0.0; t < y; t += 1.0) counts += std::log1p(alpha * t);
    } else {
        const double r = 1.0 / alpha;
        counts = std::lgamma(y + r) - std::lgamma(r) + y * std::log(alpha);
    }
    return counts - std::lgamma(y + 1.0) + (y > 0.0 ? y * std::log(mu) : 0.0) - (y + 1.0 / alpha) * std::log1p(alpha * mu);
}

double nb2_alpha_score(double y, double mu, double alpha) {
    if (alpha <= 0.0) return 0.5 * ((y - mu) * (y - mu) - y);
    const double x = alpha * mu;
    // g(x) = (log1p(x) - x/(1+x)) / x^2, by series near 0 to avoid cancellation.
    double g = 0.0;
    if (x < 1e-4) g = 0.5 - x * (2.0 / 3.0) + x * x * 0.75 - x * x * x * 0.8;
    else g = (std::log1p(x) - x / (1.0 + x)) / (x * x);
    double s = mu * mu * g - y * mu / (1.0 + x);
    if (y < kDirectSumLimit) {
        for (double t = 1.0; t < y; t += 1.0) s += t / (1.0 + alpha * t);
    } else {
        const double r = 1.0 / alpha;
        s += y * r - r * r * (boost::math::digamma(r + y) - boost::math::digamma(r));
    }
    return s;
}

double nb2_loglik(std::span<const double> y, std::span<const double> mu, double alpha) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += nb2_log_density(y[i], mu[i], alpha);
    return s;
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double chi_squared_upper_p(double stat, double df) {
    if (df <= 0.0) return 1.0;
    if (stat <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * stat);
}

FittedModel fit_negbin(const DesignMatrix& d, const FitOptions& opt) { return fit_count_model(d, opt, true); }

FittedModel fit_poisson(const DesignMatrix& d, const FitOptions& opt) { return fit_count_model(d, opt, false); }

FittedModel fit_ols_log(const DesignMatrix& d) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < d.n_rows; ++i)
        if (d.response[i] > 0.0) keep.push_back(i);
    if (keep.empty()) throw std::invalid_argument("log-OLS needs at least one positive response");
    const DesignMatrix pos = subset_rows(d, keep);
    check_rank(pos);

    std::vector<double> ln_y(pos.n_rows);
    for (std::size_t i = 0; i < pos.n_rows; ++i) ln_y[i] = std::log(pos.response[i]);
    const std::vector<double> ones(pos.n_rows, 1.0);
    const Eigen::MatrixXd xtx = weighted_gram(pos, ones);
    const Eigen::VectorXd b = solve_spd(xtx, weighted_rhs(pos, ones, ln_y));

    FittedModel f;
    f.family = Family::ols_log;
    f.names = pos.names;
    f.coefficients.assign(b.data(), b.data() + b.size());
    f.n_obs = pos.n_rows;
    f.n_clusters = pos.n_clusters();
    f.excluded_zero_rows = d.n_rows - pos.n_rows;
    f.comparable_to_count_models = false;
    f.converged = true;
    f.iterations = 1;

    std::vector<double> fitted;
    linear_predictor(pos, f.coefficients, fitted);
    double rss = 0.0;
    for (std::size_t i = 0; i < pos.n_rows; ++i) rss += (ln_y[i] - fitted[i]) * (ln_y[i] - fitted[i]);
    const double n = static_cast<double>(pos.n_rows);
    f.k_params = pos.cols();
    f.log_likelihood = rss > 0.0 ? -0.5 * n * (kLog2Pi + std::log(rss / n) + 1.0)
                                 : std::numeric_limits<double>::infinity();
    finish_information_criteria(f);
    const double dof = std::max(1.0, n - static_cast<double>(pos.cols()));
    f.covariance = (rss / dof) * inverse_spd(xtx);
    return f;
}

double cr1_factor(std::size_t n_clusters, std::size_t n_obs, std::size_t k) {
    if (n_clusters < 2) throw std::invalid_argument("clustered covariance needs at least two clusters");
    if (n_obs <= k) throw std::invalid_argument("clustered covariance needs more rows than coefficients");
    const double g = static_cast<double>(n_clusters);
    const double n = static_cast<double>(n_obs);
    return g / (g - 1.0) * (n - 1.0) / (n - static_cast<double>(k));
}

Eigen::MatrixXd clustered_covariance(const FittedModel& f, const DesignMatrix& d) {
    check_same_design(f, d);
    const DesignMatrix* used = &d;
    DesignMatrix positive;
    if (f.family == Family::ols_log) {
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < d.n_rows; ++i)
            if (d.response[i] > 0.0) keep.push_back(i);
        positive = subset_rows(d, keep);
        used = &positive;
    }
    const double factor = cr1_factor(used->n_clusters(), used->n_rows, used->cols());
    std::vector<double> alpha_scores;
    const Eigen::MatrixXd s = coefficient_scores(f, *used, alpha_scores);
    Eigen::MatrixXd by_cluster = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(used->n_clusters()), s.cols());
    for (std::size_t i = 0; i < used->n_rows; ++i)
        by_cluster.row(static_cast<Eigen::Index>(used->cluster[i])) += s.row(static_cast<Eigen::Index>(i));
    const Eigen::MatrixXd meat = by_cluster.transpose() * by_cluster;
    const Eigen::MatrixXd bread = bread_inverse(f, *used);
    Eigen::MatrixXd v = factor * bread * meat * bread;
    return 0.5 * (v + v.transpose());
}

void apply_clustered_covariance(FittedModel& f, const DesignMatrix& d) {
    f.covariance = clustered_covariance(f, d);
    f.covariance_type = "cluster-robust (CR1, origin school)";
    if (f.family == Family::negbin && f.dispersion_alpha > 0.0) {
        std::vector<double> eta, mu;
        linear_predictor(d, f.coefficients, eta);
        means_from(eta, mu);
        std::vector<double> per_cluster(d.n_clusters(), 0.0);
        for (std::size_t i = 0; i < d.n_rows; ++i)
            per_cluster[d.cluster[i]] += nb2_alpha_score(d.response[i], mu[i], f.dispersion_alpha);
        double meat = 0.0;
        for (double v : per_cluster) meat += v * v;
        const double info = observed_alpha_information(d.response, mu, f.dispersion_alpha);
        const double factor = cr1_factor(d.n_clusters(), d.n_rows, d.cols());
        if (info > 0.0) f.alpha_std_error = std::sqrt(factor * meat) / info;
    }
}

Eigen::MatrixXd robust_covariance(const FittedModel& f, const DesignMatrix& d) {
    check_same_design(f, d);
    std::vector<double> alpha_scores;
    const Eigen::MatrixXd s = coefficient_scores(f, d, alpha_scores);
    const Eigen::MatrixXd bread = bread_inverse(f, d);
    Eigen::MatrixXd v = bread * (s.transpose() * s) * bread;
    return 0.5 * (v + v.transpose());
}

double predict_flow(const FittedModel& f, std::span<const double> row) {
    if (row.size() != f.coefficients.size()) throw std::invalid_argument("predictor row has the wrong length");
    double eta = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) eta += f.coefficients[j] * row[j];
    return std::exp(eta);
}

double predict_flow(const FittedModel& f, const std::map<std::string, double>& row) {
    std::vector<double> x(f.names.size());
    for (std::size_t j = 0; j < f.names.size(); ++j) {
        if (f.names[j] == "intercept") {
            auto it = row.find("intercept");
            x[j] = it == row.end() ? 1.0 : it->second;
            continue;
        }
        auto it = row.find(f.names[j]);
        if (it == row.end()) throw std::invalid_argument("missing predictor '" + f.names[j] + "'");
        x[j] = it->second;
    }
    return predict_flow(f, x);
}

std::vector<double> fitted_means(const FittedModel& f, const DesignMatrix& d) {
    check_same_design(f, d);
    std::vector<double> eta, mu;
    linear_predictor(d, f.coefficients, eta);
    means_from(eta, mu);
    return mu;
}

Metrics eval_metrics(const FittedModel& f, const DesignMatrix& d) {
    const auto mu = fitted_means(f, d);
    const auto& k = simd::active();
    const double n = static_cast<double>(d.n_rows);
    Metrics m;
    m.mae = k.sum_abs_diff(d.response.data(), mu.data(), d.n_rows) / n;
    m.rmse = std::sqrt(k.sum_sq_diff(d.response.data(), mu.data(), d.n_rows) / n);
    return m;
}

}  // namespace gravflow
