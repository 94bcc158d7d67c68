#include "gravflow/estimate/bootstrap.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

#include "gravflow/core/parallel.hpp"
#include "gravflow/core/rng.hpp"
#include "gravflow/core/stats.hpp"

namespace gravflow {

PercentileInterval percentile_interval(std::vector<double> draws) {
    std::sort(draws.begin(), draws.end());
    return {quantile_sorted(draws, 0.025), quantile_sorted(draws, 0.5), quantile_sorted(draws, 0.975)};
}

namespace {

struct Replicate {
    std::vector<double> coefficients;
    double alpha = 0.0;
    Metrics metrics;
};

}  // namespace

BootstrapReport cluster_bootstrap(const DesignMatrix& d, const BootstrapOptions& opt) {
    if (opt.replicates < 1) throw std::invalid_argument("bootstrap needs at least one replicate");
    const FittedModel full = fit_negbin(d, opt.fit);

    std::vector<std::vector<std::size_t>> rows_of(d.n_clusters());
    for (std::size_t i = 0; i < d.n_rows; ++i) rows_of[d.cluster[i]].push_back(i);
    const std::size_t g = rows_of.size();

    FitOptions warm = opt.fit;
    warm.start_coefficients = full.coefficients;
    warm.start_alpha = full.dispersion_alpha > 0.0 ? full.dispersion_alpha : 0.1;

    std::vector<std::optional<Replicate>> results(opt.replicates);
    parallel_for(
        opt.replicates,
        [&](std::size_t b) {
            rng::Xoshiro256 gen(rng::stream_seed(opt.seed, b));
            std::vector<std::size_t> rows;
            rows.reserve(d.n_rows + d.n_rows / 4);
            for (std::size_t draw = 0; draw < g; ++draw) {
                const auto& members = rows_of[gen.below(g)];
                rows.insert(rows.end(), members.begin(), members.end());
            }
            try {
                const DesignMatrix sample = subset_rows(d, rows);
                const FittedModel f = fit_negbin(sample, warm);
                if (!f.converged) return;
                results[b] = Replicate{f.coefficients, f.dispersion_alpha, eval_metrics(f, sample)};
            } catch (const std::exception&) {
                // Counted as failed below.
            }
        },
        opt.threads ? opt.threads : thread_count());

    BootstrapReport rep;
    rep.replicates = opt.replicates;
    rep.seed = opt.seed;
    rep.names = d.names;
    rep.point_estimates = full.coefficients;
    const std::size_t k = d.cols();
    std::vector<std::vector<double>> coef(k);
    std::vector<double> alpha, mae, rmse;
    for (const auto& r : results) {
        if (!r) {
            ++rep.failed_replicates;
            continue;
        }
        for (std::size_t j = 0; j < k; ++j) coef[j].push_back(r->coefficients[j]);
        alpha.push_back(r->alpha);
        mae.push_back(r->metrics.mae);
        rmse.push_back(r->metrics.rmse);
    }
    if (alpha.empty()) throw std::runtime_error("every bootstrap replicate failed");
    for (auto& c : coef) rep.coefficients.push_back(percentile_interval(std::move(c)));
    rep.alpha = percentile_interval(std::move(alpha));
    rep.mae = percentile_interval(std::move(mae));
    rep.rmse = percentile_interval(std::move(rmse));
    return rep;
}

BootstrapReport cluster_bootstrap(const SystemSnapshot& s, const ModelSpec& spec, const BootstrapOptions& opt) {
    return cluster_bootstrap(build_design(s, spec), opt);
}

}  // namespace gravflow
