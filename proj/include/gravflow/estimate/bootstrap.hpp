#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gravflow/estimate/glm.hpp"

namespace gravflow {

struct PercentileInterval {
    double lower = 0.0;   // 2.5%
    double median = 0.0;
    double upper = 0.0;   // 97.5%
};

struct BootstrapReport {
    std::size_t replicates = 0;   // B requested
    std::uint64_t seed = 0;
    std::size_t failed_replicates = 0;
    std::vector<std::string> names;
    std::vector<double> point_estimates;   // full-sample fit
    std::vector<PercentileInterval> coefficients;
    PercentileInterval alpha;
    PercentileInterval mae;
    PercentileInterval rmse;
};

struct BootstrapOptions {
    std::size_t replicates = 200;
    std::uint64_t seed = 0;
    FitOptions fit;
    unsigned threads = 0;   // 0 = thread_count()
};

// Resamples origin clusters with replacement (G draws from G clusters) and
// refits NB2 on each replicate, warm-started at the full-sample estimate.
// Replicate b draws from the stream stream_seed(seed, b), so the report does
// not depend on the thread count. MAE/RMSE are evaluated on each replicate's
// own rows. Replicates that throw or fail to converge are counted and
// dropped. Throws std::runtime_error when every replicate fails.
BootstrapReport cluster_bootstrap(const DesignMatrix& d, const BootstrapOptions& opt);
BootstrapReport cluster_bootstrap(const SystemSnapshot& s, const ModelSpec& spec, const BootstrapOptions& opt);

PercentileInterval percentile_interval(std::vector<double> draws);

}  // namespace gravflow
