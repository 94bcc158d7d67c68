#include "gravflow/service/service.hpp"

#include <algorithm>
#include <atomic>

#include "httplib.h"

#include "gravflow/core/types.hpp"
#include "gravflow/estimate/model_io.hpp"
#include "gravflow/report/report.hpp"

namespace gravflow {

namespace {

std::atomic<std::uint64_t> g_error_counter{0};

}  // namespace

HttpResponse error_response(int status, const std::string& message) {
    json err{{"status", status}, {"message", message}};
    if (status >= 500) {
        const auto n = g_error_counter.fetch_add(1);
        err["correlation_id"] = sha256_hex_of(message + "#" + std::to_string(n) + "#" +
                                              std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()))
                                    .substr(0, 16);
    }
    return {status, {{"error", err}}};
}

std::string run_id_for(const ScenarioSpec& spec, const SimulationOptions& sim) {
    const json canonical{{"scenario", to_json(spec)}, {"simulation", to_json(sim)}};
    return sha256_hex_of(canonical.dump()).substr(0, 16);
}

ScenarioService::ScenarioService(std::optional<SystemSnapshot> snapshot, std::optional<FittedModel> model,
                                 SimulationOptions defaults)
    : snapshot_(std::move(snapshot)), model_(std::move(model)), defaults_(defaults) {
    if (snapshot_ && !snapshot_->schools().empty()) {
        const auto& s = *snapshot_;
        std::size_t origins = 0, esc = 0, pub = 0;
        double slots = 0.0;
        for (const auto& sc : s.schools()) {
            switch (sc.sector) {
                case Sector::public_origin: ++origins; break;
                case Sector::esc_destination:
                    ++esc;
                    slots += static_cast<double>(sc.slots.value_or(0));
                    break;
                case Sector::public_destination: ++pub; break;
            }
        }
        double pools = 0.0;
        for (const auto& p : candidate_pools(s)) pools += p.pool;
        std::size_t existing = 0;
        for (const auto& r : s.od()) existing += r.pair_class == PairClass::existing;
        system_summary_ = json{
            {"schools", {{"public_origin", origins}, {"esc_destination", esc}, {"public_destination", pub}}},
            {"od_pairs", {{"total", s.od().size()}, {"existing", existing}, {"zero_flow", s.od().size() - existing}}},
            {"pools_total", pools},
            {"slots_total", slots},
            {"demand_supply_ratio", slots > 0.0 ? json(pools / slots) : json(nullptr)},
            {"demand_supply_ratio_text", format_ratio(pools, slots)},
            {"congested",
             {{"public_destinations", s.congested_set().size()},
              {"feeding_origins", congested_feeding_origins(s).size()}}},
            {"subsidy_baseline", s.subsidy_baseline()}};
    }
}

HttpResponse ScenarioService::get_system() const {
    if (!system_summary_) return error_response(409, "no snapshot loaded");
    return {200, *system_summary_};
}

HttpResponse ScenarioService::get_model() const {
    if (!model_) return error_response(409, "no model loaded");
    return {200, to_json(*model_)};
}

ScenarioService::Request ScenarioService::parse_request(const std::string& body) const {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw InputError(std::string("request is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InputError("request must be a JSON object");
    Request r;
    json scenario = j;
    if (!scenario.contains("seeds") && !scenario.contains("seed_count")) scenario["seed_count"] = 100;
    if (!scenario.contains("label") && scenario.contains("cost_reduction") && scenario["cost_reduction"].is_number())
        scenario["label"] = "delta_" + scenario["cost_reduction"].dump();
    r.spec = scenario_from_json(scenario);
    r.sim = defaults_;
    try {
        if (j.contains("augmentation")) {
            const auto& a = j.at("augmentation");
            if (!a.is_object()) throw InputError("augmentation must be an object");
            r.sim.augmentation.max_new_per_origin = a.value("max_new_per_origin", r.sim.augmentation.max_new_per_origin);
            r.sim.augmentation.distance_cutoff_km = a.value("distance_cutoff_km", r.sim.augmentation.distance_cutoff_km);
            r.sim.augmentation.restrict_to_congested_feeders =
                a.value("restrict_to_congested_feeders", r.sim.augmentation.restrict_to_congested_feeders);
        }
        r.reference_cost_reduction = j.value("reference_cost_reduction", 1.0);
        const auto top = j.value("top_n", std::int64_t{10});
        if (top < 0) throw InputError("top_n must be >= 0");
        r.top_n = static_cast<std::size_t>(top);
    } catch (const json::exception& e) {
        throw InputError(e.what());
    }
    try {
        check_policy(r.sim.augmentation);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    if (!(r.reference_cost_reduction >= 0.0)) throw InputError("reference_cost_reduction must be >= 0");
    return r;
}

std::shared_ptr<const ScenarioRunner> ScenarioService::runner_for(const SimulationOptions& sim) {
    const std::string key = to_json(sim).dump();
    {
        std::lock_guard lock(mu_);
        if (auto it = runners_.find(key); it != runners_.end()) return it->second;
    }
    auto runner = std::make_shared<const ScenarioRunner>(*snapshot_, *model_, sim);
    std::lock_guard lock(mu_);
    return runners_.emplace(key, std::move(runner)).first->second;
}

json ScenarioService::artifact_for(const ScenarioRunner& runner, const ScenarioSpec& spec, const std::string& id,
                                   const std::function<void(std::size_t, std::size_t)>& progress) {
    {
        std::lock_guard lock(mu_);
        if (auto it = runs_.find(id); it != runs_.end()) {
            if (progress) progress(spec.seeds.size(), spec.seeds.size());
            return it->second;
        }
    }
    MonteCarloOptions mc;
    mc.progress = progress;
    json artifact = to_json(runner.run(spec, mc), runner);
    artifact["run_id"] = id;
    std::lock_guard lock(mu_);
    return runs_.emplace(id, std::move(artifact)).first->second;
}

HttpResponse ScenarioService::run_scenario(const std::string& body,
                                           const std::function<void(std::size_t, std::size_t)>& progress) {
    if (!model_) return error_response(409, "no model loaded");
    if (!system_summary_) return error_response(409, "no snapshot loaded");
    Request req;
    try {
        req = parse_request(body);
    } catch (const InputError& e) {
        return error_response(400, e.what());
    }
    try {
        const auto runner = runner_for(req.sim);
        const std::string id = run_id_for(req.spec, req.sim);
        const json run = artifact_for(*runner, req.spec, id, progress);

        ScenarioSpec ref = req.spec;
        ref.cost_reduction = req.reference_cost_reduction;
        ref.label = "reference_delta_" + json(ref.cost_reduction).dump();
        const std::string ref_id = run_id_for(ref, req.sim);
        const json ref_run = ref_id == id ? run : artifact_for(*runner, ref, ref_id, {});

        const double predicted = run.at("system").at("y").at("mean").get<double>();
        const double observed = run.at("system").at("observed_total").get<double>();
        const double reference = ref_run.at("system").at("y").at("mean").get<double>();

        std::vector<const json*> dests;
        for (const auto& d : run.at("destinations")) dests.push_back(&d);
        std::stable_sort(dests.begin(), dests.end(), [](const json* a, const json* b) {
            return a->at("d_marg").at("mean").get<double>() > b->at("d_marg").at("mean").get<double>();
        });
        json top = json::array();
        for (std::size_t i = 0; i < std::min(req.top_n, dests.size()); ++i) top.push_back(*dests[i]);

        json out{{"run_id", id},
                 {"label", req.spec.label},
                 {"cost_reduction", req.spec.cost_reduction},
                 {"summary",
                  {{"predicted_mean", predicted},
                   {"observed_total", observed},
                   {"delta_from_observed", format_percent_change(observed, predicted)},
                   {"reference_cost_reduction", req.reference_cost_reduction},
                   {"reference_predicted_mean", reference},
                   {"delta_from_reference", format_percent_change(reference, predicted)}}},
                 {"demand", run.at("demand")},
                 {"system", run.at("system")},
                 {"classification", run.at("classification")},
                 {"top_destinations", top},
                 {"manifest", run.at("manifest")}};
        return {200, out};
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

HttpResponse ScenarioService::get_run(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = runs_.find(id);
    if (it == runs_.end()) return error_response(404, "unknown run id '" + id + "'");
    return {200, it->second};
}

void ScenarioService::mount(httplib::Server& server) {
    auto send = [](httplib::Response& res, const HttpResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(2) + "\n", "application/json");
    };
    server.Get("/v1/system", [this, send](const httplib::Request&, httplib::Response& res) { send(res, get_system()); });
    server.Get("/v1/model", [this, send](const httplib::Request&, httplib::Response& res) { send(res, get_model()); });
    server.Get(R"(/v1/runs/([0-9a-f]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, get_run(req.matches[1]));
    });
    server.Post("/v1/scenarios/run", [this, send](const httplib::Request& req, httplib::Response& res) {
        const bool stream = req.has_param("stream") && req.get_param_value("stream") == "true";
        if (!stream) {
            send(res, run_scenario(req.body));
            return;
        }
        // Newline-delimited JSON: progress events, then one result event.
        const std::string body = req.body;
        res.set_chunked_content_provider("application/x-ndjson", [this, body](std::size_t, httplib::DataSink& sink) {
            std::mutex write_mu;
            auto progress = [&](std::size_t done, std::size_t total) {
                const std::string line = json{{"event", "progress"}, {"done", done}, {"total", total}}.dump() + "\n";
                std::lock_guard lock(write_mu);
                sink.write(line.data(), line.size());
            };
            const HttpResponse r = run_scenario(body, progress);
            const std::string line =
                json{{"event", "result"}, {"status", r.status}, {"body", r.body}}.dump() + "\n";
            sink.write(line.data(), line.size());
            sink.done();
            return true;
        });
    });
    server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send(res, error_response(500, what));
    });
}

}  // namespace gravflow
