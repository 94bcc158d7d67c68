#include <cmath>

#include "doctest.h"
#include "gravflow/core/rng.hpp"
#include "gravflow/estimate/bootstrap.hpp"
#include "gravflow/estimate/model_io.hpp"
#include "support.hpp"

using namespace gravflow;

namespace {

DesignMatrix small_design(std::uint64_t seed = 6) {
    auto cfg = gravflow::testing::small_config(seed);
    cfg.n_origins = 150;
    ModelSpec spec;
    spec.zero_flow_policy = ZeroFlowPolicy::include_zeros;
    spec.include_origin_region_fe = spec.include_dest_region_fe = false;
    return build_design(generate_synthetic(cfg), spec);
}

}  // namespace

TEST_CASE("percentile interval uses type-7 quantiles") {
    const auto p = percentile_interval({4, 1, 3, 2, 5});
    CHECK(p.lower == doctest::Approx(1.1));
    CHECK(p.median == doctest::Approx(3.0));
    CHECK(p.upper == doctest::Approx(4.9));
}

TEST_CASE("one replicate collapses every interval to that replicate") {
    const auto d = small_design();
    BootstrapOptions opt;
    opt.replicates = 1;
    opt.seed = 3;
    const auto r = cluster_bootstrap(d, opt);
    REQUIRE(r.failed_replicates == 0);
    for (const auto& c : r.coefficients) {
        CHECK(c.lower == c.median);
        CHECK(c.median == c.upper);
    }
    CHECK(r.alpha.lower == r.alpha.upper);

    // Rebuild replicate 0 by hand: G cluster draws from the replicate stream.
    rng::Xoshiro256 g(rng::stream_seed(3, 0));
    std::vector<std::vector<std::size_t>> members(d.n_clusters());
    for (std::size_t i = 0; i < d.n_rows; ++i) members[d.cluster[i]].push_back(i);
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < d.n_clusters(); ++k) {
        const auto c = g.below(d.n_clusters());
        rows.insert(rows.end(), members[c].begin(), members[c].end());
    }
    FitOptions fo;
    const auto full = fit_negbin(d);
    fo.start_coefficients = full.coefficients;
    fo.start_alpha = full.dispersion_alpha;
    const auto refit = fit_negbin(subset_rows(d, rows), fo);
    for (std::size_t j = 0; j < refit.coefficients.size(); ++j)
        CHECK(r.coefficients[j].median == doctest::Approx(refit.coefficients[j]).epsilon(1e-10));
}

TEST_CASE("bootstrap is reproducible and independent of thread count") {
    const auto d = small_design();
    BootstrapOptions opt;
    opt.replicates = 24;
    opt.seed = 11;
    opt.threads = 1;
    const auto a = cluster_bootstrap(d, opt);
    opt.threads = 4;
    const auto b = cluster_bootstrap(d, opt);
    CHECK(to_json(a).dump() == to_json(b).dump());
    opt.seed = 12;
    CHECK(to_json(cluster_bootstrap(d, opt)).dump() != to_json(a).dump());
}

TEST_CASE("intervals are ordered and cover the point estimate on a clean fit") {
    const auto d = small_design(9);
    BootstrapOptions opt;
    opt.replicates = 60;
    opt.seed = 1;
    const auto r = cluster_bootstrap(d, opt);
    CHECK(r.names == d.names);
    for (std::size_t j = 0; j < r.coefficients.size(); ++j) {
        const auto& c = r.coefficients[j];
        CHECK(c.lower <= c.median);
        CHECK(c.median <= c.upper);
        CHECK(c.lower <= r.point_estimates[j]);
        CHECK(r.point_estimates[j] <= c.upper);
    }
    CHECK(r.mae.lower > 0.0);
    CHECK(r.rmse.lower >= r.mae.lower);
    const auto j = to_json(r);
    CHECK(j["coefficients"].size() == r.names.size());
}
