#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "gravflow/alloc/scenario.hpp"
#include "gravflow/core/json_io.hpp"

namespace httplib {
class Server;
}

namespace gravflow {

struct HttpResponse {
    int status = 200;
    json body;
};

// Read-only what-if service over one snapshot and one fitted model loaded at
// boot. Handlers are plain member functions so they can be exercised without
// a socket; mount() wires them to /v1 routes.
class ScenarioService {
public:
    ScenarioService(std::optional<SystemSnapshot> snapshot, std::optional<FittedModel> model,
                    SimulationOptions defaults = {});

    HttpResponse get_system() const;
    HttpResponse get_model() const;
    // Body fields: cost_reduction (required), label, slot_scale (number or
    // region map), seeds or seed_count (default 100), augmentation
    // {max_new_per_origin, distance_cutoff_km, restrict_to_congested_feeders},
    // reference_cost_reduction (default 1), top_n (default 10).
    HttpResponse run_scenario(const std::string& body,
                              const std::function<void(std::size_t, std::size_t)>& progress = {});
    HttpResponse get_run(const std::string& id) const;

    void mount(httplib::Server& server);

private:
    struct Request {
        ScenarioSpec spec;
        SimulationOptions sim;
        double reference_cost_reduction = 1.0;
        std::size_t top_n = 10;
    };
    Request parse_request(const std::string& body) const;
    std::shared_ptr<const ScenarioRunner> runner_for(const SimulationOptions& sim);
    // Runs (or fetches from cache) the full artifact for a spec.
    json artifact_for(const ScenarioRunner& runner, const ScenarioSpec& spec, const std::string& id,
                      const std::function<void(std::size_t, std::size_t)>& progress);

    std::optional<SystemSnapshot> snapshot_;
    std::optional<FittedModel> model_;
    SimulationOptions defaults_;
    std::optional<json> system_summary_;

    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<const ScenarioRunner>> runners_;
    std::map<std::string, json> runs_;
};

// Deterministic run id: leading 16 hex digits of SHA-256 over the canonical
// request (scenario spec plus simulation options).
std::string run_id_for(const ScenarioSpec& spec, const SimulationOptions& sim);

HttpResponse error_response(int status, const std::string& message);

}  // namespace gravflow
