#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "gravflow/core/synthetic.hpp"
#include "gravflow/estimate/compare.hpp"
#include "gravflow/estimate/glm.hpp"
#include "support.hpp"

using namespace gravflow;

namespace {

DesignMatrix make_design(std::vector<std::string> names, const std::vector<std::vector<double>>& cols,
                         std::vector<double> y, std::vector<std::size_t> clusters = {}) {
    DesignMatrix d;
    d.names = std::move(names);
    d.n_rows = y.size();
    for (const auto& c : cols) d.values.insert(d.values.end(), c.begin(), c.end());
    d.response = std::move(y);
    if (clusters.empty())
        for (std::size_t i = 0; i < d.n_rows; ++i) clusters.push_back(i);
    std::size_t g = 0;
    for (auto c : clusters) g = std::max(g, c + 1);
    d.cluster = std::move(clusters);
    for (std::size_t c = 0; c < g; ++c) d.cluster_ids.push_back("C" + std::to_string(c));
    for (std::size_t i = 0; i < d.n_rows; ++i) d.row_keys.emplace_back(d.cluster_ids[d.cluster[i]], std::to_string(i));
    return d;
}

// NB2 draw with its own generator, independent of the library's sampler.
double draw_nb2(std::mt19937_64& g, double mu, double alpha) {
    double lambda = mu;
    if (alpha > 0.0) lambda = std::gamma_distribution<double>(1.0 / alpha, alpha * mu)(g);
    return static_cast<double>(std::poisson_distribution<long long>(lambda)(g));
}

struct Dataset {
    DesignMatrix d;
    std::vector<double> truth;
};

// intercept + two independent uniforms, clusters of 10 rows.
Dataset simulated(std::size_t n, std::vector<double> beta, double alpha, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> c0(n, 1.0), c1(n), c2(n), y(n);
    std::vector<std::size_t> cl(n);
    for (std::size_t i = 0; i < n; ++i) {
        c1[i] = u(g);
        c2[i] = u(g);
        y[i] = draw_nb2(g, std::exp(beta[0] + beta[1] * c1[i] + beta[2] * c2[i]), alpha);
        cl[i] = i / 10;
    }
    return {make_design({"intercept", "x1", "x2"}, {c0, c1, c2}, y, cl), beta};
}

// Reference log-likelihood written in the textbook Gamma-function form.
double oracle_loglik(const DesignMatrix& d, const std::vector<double>& beta, double alpha) {
    const double r = 1.0 / alpha;
    double ll = 0.0;
    for (std::size_t i = 0; i < d.n_rows; ++i) {
        double eta = 0.0;
        for (std::size_t j = 0; j < d.cols(); ++j) eta += beta[j] * d.at(i, j);
        const double mu = std::exp(eta);
        const double y = d.response[i];
        ll += std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0) + r * std::log(r / (r + mu)) +
              y * std::log(mu / (r + mu));
    }
    return ll;
}

// Coordinate-wise Newton on (beta, log alpha) with finite-difference
// derivatives and step halving; the best of several starts.
std::pair<std::vector<double>, double> brute_force_mle(const DesignMatrix& d) {
    std::vector<double> best_theta;
    double best_ll = -std::numeric_limits<double>::infinity();
    const std::size_t k = d.cols();
    for (const double start : {-0.5, 0.0, 0.7}) {
        std::vector<double> theta(k + 1, start);
        theta[k] = std::log(1.0);
        auto ll = [&](const std::vector<double>& t) {
            return oracle_loglik(d, std::vector<double>(t.begin(), t.begin() + static_cast<long>(k)), std::exp(t[k]));
        };
        double current = ll(theta);
        for (int sweep = 0; sweep < 20000; ++sweep) {
            double biggest = 0.0;
            for (std::size_t j = 0; j <= k; ++j) {
                const double h = 1e-4;
                auto tp = theta, tm = theta;
                tp[j] += h;
                tm[j] -= h;
                const double fp = ll(tp), fm = ll(tm);
                const double g = (fp - fm) / (2 * h);
                const double hess = (fp - 2 * current + fm) / (h * h);
                double step = hess < 0 ? -g / hess : 0.1 * g;
                for (int halving = 0; halving < 50; ++halving) {
                    auto t = theta;
                    t[j] += step;
                    const double v = ll(t);
                    if (std::isfinite(v) && v >= current) {
                        theta = t;
                        current = v;
                        break;
                    }
                    step *= 0.5;
                }
                biggest = std::max(biggest, std::abs(step));
            }
            if (biggest < 1e-11) break;
        }
        if (current > best_ll) {
            best_ll = current;
            best_theta = theta;
        }
    }
    std::vector<double> beta(best_theta.begin(), best_theta.begin() + static_cast<long>(k));
    return {beta, std::exp(best_theta[k])};
}

std::vector<double> coefficient_score(const DesignMatrix& d, const std::vector<double>& beta, double alpha) {
    std::vector<double> g(d.cols(), 0.0);
    for (std::size_t i = 0; i < d.n_rows; ++i) {
        double eta = 0.0;
        for (std::size_t j = 0; j < d.cols(); ++j) eta += beta[j] * d.at(i, j);
        const double mu = std::exp(eta);
        for (std::size_t j = 0; j < d.cols(); ++j) g[j] += d.at(i, j) * (d.response[i] - mu) / (1.0 + alpha * mu);
    }
    return g;
}

double lgamma_density(double y, double mu, double alpha) {
    const double r = 1.0 / alpha;
    return std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0) + r * std::log(r / (r + mu)) +
           y * std::log(mu / (r + mu));
}

}  // namespace

TEST_CASE("NB2 fit matches a brute-force maximizer") {
    const auto data = simulated(200, {0.8, -0.6, 0.4}, 0.5, 17);
    const auto f = fit_negbin(data.d);
    REQUIRE(f.converged);
    const auto [beta, alpha] = brute_force_mle(data.d);
    for (std::size_t j = 0; j < beta.size(); ++j) CHECK(std::abs(f.coefficients[j] - beta[j]) < 1e-4);
    CHECK(std::abs(f.dispersion_alpha - alpha) < 1e-4);
    CHECK(f.log_likelihood == doctest::Approx(oracle_loglik(data.d, beta, alpha)).epsilon(1e-9));

    // Score at the optimum, analytic and by finite differences.
    const auto g = coefficient_score(data.d, f.coefficients, f.dispersion_alpha);
    for (double v : g) CHECK(std::abs(v) < 1e-7);
}

TEST_CASE("analytic coefficient score agrees with finite differences") {
    const auto data = simulated(200, {0.8, -0.6, 0.4}, 0.5, 18);
    const std::vector<double> beta{0.5, -0.2, 0.1};
    const double alpha = 0.7;
    const auto g = coefficient_score(data.d, beta, alpha);
    for (std::size_t j = 0; j < beta.size(); ++j) {
        auto bp = beta, bm = beta;
        const double h = 1e-6;
        bp[j] += h;
        bm[j] -= h;
        const double fd = (oracle_loglik(data.d, bp, alpha) - oracle_loglik(data.d, bm, alpha)) / (2 * h);
        CHECK(std::abs(fd - g[j]) <= 1e-4 * std::abs(g[j]));
    }
}

TEST_CASE("per-row density and alpha score against the Gamma-function form") {
    for (double y : {0.0, 1.0, 3.0, 17.0, 199.0, 200.0, 201.0, 1500.0}) {
        for (double mu : {0.05, 1.0, 20.0, 500.0}) {
            for (double alpha : {0.01, 0.4, 3.0}) {
                CAPTURE(y);
                CAPTURE(mu);
                CAPTURE(alpha);
                CHECK(nb2_log_density(y, mu, alpha) ==
                      doctest::Approx(lgamma_density(y, mu, alpha)).epsilon(1e-9).scale(1.0));
                const double h = 1e-5 * alpha;
                const double fd =
                    (lgamma_density(y, mu, alpha + h) - lgamma_density(y, mu, alpha - h)) / (2 * h);
                const double s = nb2_alpha_score(y, mu, alpha);
                CHECK(std::abs(s - fd) <= 1e-5 * std::max(1.0, std::abs(s)));
            }
        }
    }
}

TEST_CASE("alpha score is continuous across the small-argument series and tends to the Poisson limit") {
    for (double y : {0.0, 2.0, 9.0}) {
        const double mu = 3.0;
        const double below = nb2_alpha_score(y, mu, 0.99999e-4 / mu);
        const double above = nb2_alpha_score(y, mu, 1.00001e-4 / mu);
        CHECK(below == doctest::Approx(above).epsilon(1e-6));
        CHECK(nb2_alpha_score(y, mu, 1e-12) == doctest::Approx(nb2_alpha_score(y, mu, 0.0)).epsilon(1e-8));
        CHECK(nb2_log_density(y, mu, 1e-12) == doctest::Approx(nb2_log_density(y, mu, 0.0)).epsilon(1e-9));
    }
}

TEST_CASE("intercept-only constant response gives ln 5 with alpha on the boundary") {
    const auto d = make_design({"intercept"}, {std::vector<double>(40, 1.0)}, std::vector<double>(40, 5.0));
    const auto nb = fit_negbin(d);
    CHECK(nb.converged);
    CHECK(nb.coefficients[0] == doctest::Approx(std::log(5.0)).epsilon(1e-9));
    CHECK(nb.dispersion_alpha == 0.0);
    CHECK(nb.alpha_at_boundary);
    const auto po = fit_poisson(d);
    CHECK(po.coefficients[0] == doctest::Approx(std::log(5.0)).epsilon(1e-9));
    CHECK(po.k_params == 1);
    CHECK(nb.k_params == 2);
}

TEST_CASE("information criteria follow their definitions") {
    const auto data = simulated(300, {1.0, -0.5, 0.2}, 0.3, 5);
    for (const auto& f : {fit_negbin(data.d), fit_poisson(data.d), fit_ols_log(data.d)}) {
        const double k = static_cast<double>(f.k_params);
        CHECK(f.aic == doctest::Approx(2 * k - 2 * f.log_likelihood).epsilon(1e-14));
        CHECK(f.bic == doctest::Approx(k * std::log(static_cast<double>(f.n_obs)) - 2 * f.log_likelihood).epsilon(1e-14));
    }
}

TEST_CASE("Poisson and NB2 agree on equidispersed data") {
    const auto data = simulated(5000, {1.2, -0.5, 0.3}, 0.0, 23);
    const auto nb = fit_negbin(data.d);
    const auto po = fit_poisson(data.d);
    CHECK(nb.dispersion_alpha < 0.02);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(nb.coefficients[j] - po.coefficients[j]) < 1e-3);
}

TEST_CASE("overdispersed data favour NB2 over Poisson") {
    const auto data = simulated(3000, {1.2, -0.5, 0.3}, 0.6, 29);
    const auto nb = fit_negbin(data.d);
    const auto po = fit_poisson(data.d);
    CHECK(nb.log_likelihood > po.log_likelihood);
    CHECK(nb.aic < po.aic);
    CHECK(nb.dispersion_alpha == doctest::Approx(0.6).epsilon(0.2));
}

TEST_CASE("dispersion estimates across repeated synthetic draws") {
    int poisson_ok = 0, nb_ok = 0;
    const int runs = 10;
    for (int r = 0; r < runs; ++r) {
        SyntheticConfig cfg;
        cfg.n_origins = 1000;
        cfg.n_esc = 200;
        cfg.n_public = 20;
        cfg.rng_seed = 500 + static_cast<std::uint64_t>(r);
        ModelSpec spec;
        spec.zero_flow_policy = ZeroFlowPolicy::include_zeros;

        cfg.true_coefficients["alpha"] = 0.0;
        const auto d0 = build_design(generate_synthetic(cfg), spec);
        REQUIRE(d0.n_rows >= 20000);
        if (fit_negbin(d0).dispersion_alpha < 0.02) ++poisson_ok;

        cfg.true_coefficients["alpha"] = 0.4;
        const double a = fit_negbin(build_design(generate_synthetic(cfg), spec)).dispersion_alpha;
        if (a >= 0.3 && a <= 0.5) ++nb_ok;
    }
    CHECK(poisson_ok >= 9);
    CHECK(nb_ok >= 9);
}

TEST_CASE("log-OLS recovers noiseless coefficients and reports excluded zeros") {
    std::vector<double> c0, c1, y;
    for (int i = 0; i < 30; ++i) {
        c0.push_back(1.0);
        c1.push_back(0.1 * i);
        y.push_back(std::exp(0.7 - 1.3 * 0.1 * i));
    }
    for (int i = 0; i < 4; ++i) {
        c0.push_back(1.0);
        c1.push_back(0.5);
        y.push_back(0.0);
    }
    const auto d = make_design({"intercept", "x"}, {c0, c1}, y);
    const auto f = fit_ols_log(d);
    CHECK(f.coefficients[0] == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(f.coefficients[1] == doctest::Approx(-1.3).epsilon(1e-10));
    CHECK(f.excluded_zero_rows == 4);
    CHECK(f.n_obs == 30);
    CHECK_FALSE(f.comparable_to_count_models);
    CHECK(f.family == Family::ols_log);
}

TEST_CASE("log-OLS is biased under heteroskedastic counts while NB2 is not") {
    int ols_biased_nb_fine = 0;
    const int reps = 50;
    const double truth = -0.45;
    for (int r = 0; r < reps; ++r) {
        std::mt19937_64 g(9000 + static_cast<std::uint64_t>(r));
        std::uniform_real_distribution<double> u(0.0, 3.5);
        const std::size_t n = 2000;
        std::vector<double> c0(n, 1.0), c1(n), y(n);
        std::vector<std::size_t> cl(n);
        for (std::size_t i = 0; i < n; ++i) {
            c1[i] = u(g);
            y[i] = draw_nb2(g, std::exp(1.5 + truth * c1[i]), 1.0);
            cl[i] = i / 10;
        }
        const auto d = make_design({"intercept", "ln_distance"}, {c0, c1}, y, cl);
        auto ols = fit_ols_log(d);
        apply_clustered_covariance(ols, d);
        auto nb = fit_negbin(d);
        apply_clustered_covariance(nb, d);
        const bool ols_off = std::abs(ols.coefficients[1] - truth) > 2 * ols.std_error(1);
        const bool nb_in = std::abs(nb.coefficients[1] - truth) <= 2 * nb.std_error(1);
        if (ols_off && nb_in) ++ols_biased_nb_fine;
    }
    CHECK(ols_biased_nb_fine >= 40);
}

TEST_CASE("clustered covariance with singleton clusters is the robust sandwich times CR1") {
    const auto data = simulated(400, {1.0, -0.5, 0.2}, 0.4, 31);
    auto d = data.d;
    d.cluster.clear();
    d.cluster_ids.clear();
    for (std::size_t i = 0; i < d.n_rows; ++i) {
        d.cluster.push_back(i);
        d.cluster_ids.push_back("R" + std::to_string(i));
    }
    for (const auto& f : {fit_negbin(d), fit_poisson(d)}) {
        const auto vc = clustered_covariance(f, d);
        const auto vr = robust_covariance(f, d);
        const double factor = cr1_factor(d.n_rows, d.n_rows, d.cols());
        CHECK(factor == doctest::Approx(static_cast<double>(d.n_rows) / (d.n_rows - 1.0) * (d.n_rows - 1.0) /
                                        (d.n_rows - 3.0)));
        CHECK((vc - factor * vr).cwiseAbs().maxCoeff() <= 1e-12 * vr.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("duplicating every cluster's rows only changes the small-sample factor") {
    const auto data = simulated(400, {1.0, -0.5, 0.2}, 0.4, 37);
    const auto& d = data.d;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < d.n_rows; ++i) {
        rows.push_back(i);
        rows.push_back(i);
    }
    const auto dup = subset_rows(d, rows);
    auto f1 = fit_negbin(d);
    auto f2 = fit_negbin(dup);
    for (std::size_t j = 0; j < 3; ++j) CHECK(f2.coefficients[j] == doctest::Approx(f1.coefficients[j]).epsilon(1e-7));
    CHECK(f2.dispersion_alpha == doctest::Approx(f1.dispersion_alpha).epsilon(1e-7));
    const auto v1 = clustered_covariance(f1, d);
    const auto v2 = clustered_covariance(f2, dup);
    const double ratio = cr1_factor(dup.n_clusters(), dup.n_rows, 3) / cr1_factor(d.n_clusters(), d.n_rows, 3);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(v2(j, j) / v1(j, j) == doctest::Approx(ratio).epsilon(1e-5));
}

TEST_CASE("clustered and unclustered errors agree when clusters carry no shared shock") {
    int agree = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto cfg = gravflow::testing::small_config(seed);
        ModelSpec spec;
        spec.zero_flow_policy = ZeroFlowPolicy::include_zeros;
        spec.include_origin_region_fe = spec.include_dest_region_fe = false;
        const auto d = build_design(generate_synthetic(cfg), spec);
        const auto f = fit_negbin(d);
        const auto vc = clustered_covariance(f, d);
        const auto vr = robust_covariance(f, d);
        bool ok = true;
        for (Eigen::Index j = 0; j < vc.rows(); ++j) {
            const double r = std::sqrt(vc(j, j) / vr(j, j));
            ok = ok && r > 0.8 && r < 1.2;
        }
        agree += ok;
    }
    CHECK(agree == 20);
}

TEST_CASE("clustered alpha standard error is reported") {
    const auto data = simulated(600, {1.0, -0.5, 0.2}, 0.4, 41);
    auto f = fit_negbin(data.d);
    const double model_se = f.alpha_std_error;
    CHECK(model_se > 0.0);
    apply_clustered_covariance(f, data.d);
    CHECK(f.covariance_type.find("CR1") != std::string::npos);
    CHECK(f.alpha_std_error > 0.0);
    CHECK(f.alpha_std_error == doctest::Approx(model_se).epsilon(0.5));
}

TEST_CASE("single cluster is rejected") {
    const auto data = simulated(50, {1.0, -0.5, 0.2}, 0.4, 43);
    auto d = data.d;
    std::fill(d.cluster.begin(), d.cluster.end(), 0);
    d.cluster_ids = {"only"};
    CHECK_THROWS_AS(clustered_covariance(fit_negbin(d), d), std::invalid_argument);
}

TEST_CASE("rank deficiency and bad responses") {
    std::vector<double> c0(20, 1.0), c1(20), y(20);
    for (int i = 0; i < 20; ++i) {
        c1[i] = i;
        y[i] = i % 4;
    }
    CHECK_THROWS_AS(fit_negbin(make_design({"intercept", "a", "b"}, {c0, c1, c1}, y)), RankDeficientError);
    auto bad = y;
    bad[3] = 1.5;
    CHECK_THROWS_AS(fit_negbin(make_design({"intercept", "a"}, {c0, c1}, bad)), std::invalid_argument);
    bad[3] = -1.0;
    CHECK_THROWS_AS(fit_poisson(make_design({"intercept", "a"}, {c0, c1}, bad)), std::invalid_argument);
}

TEST_CASE("iteration cap leaves the model flagged unconverged") {
    const auto data = simulated(300, {1.0, -0.5, 0.2}, 0.4, 47);
    FitOptions opt;
    opt.max_outer = 1;
    opt.max_irls = 1;
    const auto f = fit_negbin(data.d, opt);
    CHECK_FALSE(f.converged);
    CHECK(f.iterations == 1);
}

TEST_CASE("warm start reaches the same optimum") {
    const auto data = simulated(500, {1.0, -0.5, 0.2}, 0.4, 53);
    const auto cold = fit_negbin(data.d);
    FitOptions opt;
    opt.start_coefficients = cold.coefficients;
    opt.start_alpha = cold.dispersion_alpha;
    const auto warm = fit_negbin(data.d, opt);
    for (std::size_t j = 0; j < 3; ++j) CHECK(warm.coefficients[j] == doctest::Approx(cold.coefficients[j]).epsilon(1e-7));
}

TEST_CASE("predict_flow elasticities") {
    FittedModel f;
    f.names = {"intercept", "ln_distance", "ln_net_cost", "rating"};
    f.coefficients = {3.3944, -0.4509, -0.1004, -0.0204};
    const std::map<std::string, double> base{{"ln_distance", std::log(7.0)}, {"ln_net_cost", std::log(20.0)}, {"rating", 3}};
    auto farther = base;
    farther["ln_distance"] = std::log(14.0);
    const double factor = predict_flow(f, farther) / predict_flow(f, base);
    CHECK(std::abs(factor - std::pow(2.0, -0.4509)) < 1e-12);
    // 2^-0.4509 = 0.731586, a 26.8% drop.
    CHECK(factor == doctest::Approx(0.731586).epsilon(1e-6));
    CHECK(std::round(1000.0 * (factor - 1.0)) == -268.0);

    auto cheaper = base;
    cheaper["ln_net_cost"] = std::log(10.0);
    CHECK(predict_flow(f, cheaper) / predict_flow(f, base) == doctest::Approx(1.0721).epsilon(1e-4));

    const std::map<std::string, double> zeros{{"ln_distance", 0.0}, {"ln_net_cost", 0.0}, {"rating", 0.0}};
    CHECK(predict_flow(f, zeros) == doctest::Approx(std::exp(3.3944)).epsilon(1e-14));

    std::map<std::string, double> missing{{"ln_distance", 1.0}, {"rating", 2.0}};
    CHECK_THROWS_AS(predict_flow(f, missing), std::invalid_argument);
    CHECK(predict_flow(f, std::vector<double>{1.0, 50.0, 50.0, 50.0}) > 0.0);
}

TEST_CASE("MAE and RMSE") {
    FittedModel f;
    f.names = {"intercept"};
    f.coefficients = {std::log(5.0)};
    const auto one = make_design({"intercept"}, {{1.0}}, {3.0});
    CHECK(eval_metrics(f, one).mae == doctest::Approx(2.0));
    CHECK(eval_metrics(f, one).rmse == doctest::Approx(2.0));
    const auto perfect = make_design({"intercept"}, {{1.0, 1.0}}, {5.0, 5.0});
    CHECK(eval_metrics(f, perfect).mae == doctest::Approx(0.0).scale(1.0));
    const auto mixed = make_design({"intercept"}, {{1.0, 1.0, 1.0}}, {5.0, 2.0, 11.0});
    const auto m = eval_metrics(f, mixed);
    CHECK(m.mae == doctest::Approx(3.0));
    CHECK(m.rmse == doctest::Approx(std::sqrt(15.0)));
    CHECK(m.rmse >= m.mae);
}

TEST_CASE("tail probabilities") {
    CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_squared_upper_p(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_squared_upper_p(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_squared_upper_p(0.0, 3) == 1.0);
    CHECK(chi_squared_upper_p(4.0, 0) == 1.0);
}
