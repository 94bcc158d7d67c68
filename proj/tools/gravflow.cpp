// gravflow command-line front end.
//
// Exit codes: 0 success, 2 invalid input or failed validation, 3 a fit did
// not converge, 4 I/O error, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gravflow/alloc/scenario.hpp"
#include "gravflow/core/snapshot_io.hpp"
#include "gravflow/core/synthetic.hpp"
#include "gravflow/estimate/bootstrap.hpp"
#include "gravflow/estimate/compare.hpp"
#include "gravflow/estimate/model_io.hpp"
#include "gravflow/report/report.hpp"
#include "gravflow/service/service.hpp"

// After the project headers: httplib pulls in <resolv.h>, whose _res macro
// collides with parameter names inside Eigen.
#include "CLI11.hpp"
#include "httplib.h"

namespace fs = std::filesystem;
using namespace gravflow;

namespace {

class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tracks everything written under an output directory so a failed command
// leaves nothing half-written behind.
class OutputDir {
public:
    explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
        if (!fs::exists(dir_)) {
            std::error_code ec;
            fs::create_directories(dir_, ec);
            if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
            created_ = true;
        } else if (!fs::is_directory(dir_)) {
            throw IoError(dir_.string() + " is not a directory");
        }
    }
    ~OutputDir() {
        if (committed_) return;
        std::error_code ec;
        for (auto it = written_.rbegin(); it != written_.rend(); ++it) fs::remove(*it, ec);
        for (auto it = made_dirs_.rbegin(); it != made_dirs_.rend(); ++it) fs::remove(*it, ec);
        if (created_) fs::remove(dir_, ec);
    }

    const fs::path& path() const { return dir_; }
    fs::path subdir(const fs::path& rel) {
        fs::path p = dir_;
        for (const auto& part : rel) {
            p /= part;
            if (!fs::exists(p)) {
                fs::create_directory(p);
                made_dirs_.push_back(p);
            }
        }
        return p;
    }
    void json_file(const fs::path& rel, const json& j) {
        const fs::path p = dir_ / rel;
        written_.push_back(p);
        write_json(p, j);
        names_.push_back(rel.generic_string());
    }
    void text_file(const fs::path& rel, const std::string& text) {
        const fs::path p = dir_ / rel;
        written_.push_back(p);
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw IoError("write failed for " + p.string());
        names_.push_back(rel.generic_string());
    }
    // For files written by other code: expect() before writing so a failure
    // cleans them up, adopt() afterwards to list them in the manifest.
    void expect(const fs::path& rel) { written_.push_back(dir_ / rel); }
    void adopt(const fs::path& rel) { names_.push_back(rel.generic_string()); }
    void manifest(RunManifest m) {
        m.outputs = names_;
        json_file("manifest.json", m.to_json());
    }
    void commit() { committed_ = true; }

private:
    fs::path dir_;
    bool created_ = false;
    bool committed_ = false;
    std::vector<fs::path> written_;
    std::vector<fs::path> made_dirs_;
    std::vector<std::string> names_;
};

// "0..99" (inclusive range), "3,5,8" or a single seed.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    auto number = [&](const std::string& s) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size()) throw InputError("bad seed '" + s + "' in --seeds");
        return static_cast<std::uint64_t>(v);
    };
    if (auto dots = text.find(".."); dots != std::string::npos) {
        const auto lo = number(text.substr(0, dots));
        const auto hi = number(text.substr(dots + 2));
        if (hi < lo) throw InputError("--seeds range is empty");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
        return out;
    }
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        out.push_back(number(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

struct SpecFlags {
    std::string model_spec_path;
    std::string zero_flow_policy;
    std::optional<double> cost_floor;

    void add(CLI::App* cmd) {
        cmd->add_option("--model-spec", model_spec_path, "JSON model spec (terms, reference region, filters)")
            ->check(CLI::ExistingFile);
        cmd->add_option("--zero-flow-policy", zero_flow_policy, "positive_only | include_zeros")
            ->check(CLI::IsMember({"positive_only", "include_zeros"}));
        cmd->add_option("--cost-floor", cost_floor, "floor on net cost before the log, thousands of pesos");
    }
    ModelSpec resolve() const {
        ModelSpec m = model_spec_path.empty() ? ModelSpec{} : model_spec_from_json(read_json(model_spec_path));
        if (!zero_flow_policy.empty()) m.zero_flow_policy = parse_zero_flow_policy(zero_flow_policy);
        if (cost_floor) {
            if (!(*cost_floor > 0.0)) throw InputError("--cost-floor must be positive");
            m.cost_floor = *cost_floor;
        }
        return m;
    }
    std::vector<fs::path> inputs() const {
        return model_spec_path.empty() ? std::vector<fs::path>{} : std::vector<fs::path>{model_spec_path};
    }
};

struct SimFlags {
    std::optional<int> augment_k;
    std::optional<double> augment_cutoff_km;
    bool restrict_feeders = false;
    double phi_cost_reduction = 0.0;

    void add(CLI::App* cmd) {
        cmd->add_option("--augment-k", augment_k, "hypothetical pairs added per origin (default 10)");
        cmd->add_option("--augment-cutoff-km", augment_cutoff_km, "distance cutoff for added pairs (default 30)");
        cmd->add_flag("--restrict-to-congested-feeders", restrict_feeders,
                      "only origins feeding a congested public school gain pairs");
        cmd->add_option("--phi-cost-reduction", phi_cost_reduction,
                        "cost reduction whose uncapped predictions define the congested fraction (default 0)");
    }
    SimulationOptions resolve() const {
        SimulationOptions o;
        if (augment_k) o.augmentation.max_new_per_origin = *augment_k;
        if (augment_cutoff_km) o.augmentation.distance_cutoff_km = *augment_cutoff_km;
        o.augmentation.restrict_to_congested_feeders = restrict_feeders;
        o.phi_cost_reduction = phi_cost_reduction;
        try {
            check_policy(o.augmentation);
        } catch (const std::invalid_argument& e) {
            throw InputError(e.what());
        }
        if (!(o.phi_cost_reduction >= 0.0)) throw InputError("--phi-cost-reduction must be >= 0");
        return o;
    }
};

FittedModel load_model(const std::string& path) {
    FittedModel f = fitted_model_from_json(read_json(path));
    if (!f.converged) throw NonConvergence("model in " + path + " did not converge");
    return f;
}

void print_fit(const FittedModel& f) {
    std::printf("%-22s %12s %10s %9s %9s\n", "term", "estimate", "std.err", "z", "p");
    for (std::size_t i = 0; i < f.names.size(); ++i)
        std::printf("%-22s %12.4f %10.4f %9.2f %9.4f\n", f.names[i].c_str(), f.coefficients[i], f.std_error(i),
                    f.z_value(i), f.p_value(i));
    if (f.family == Family::negbin)
        std::printf("%-22s %12.4f %10.4f%s\n", "alpha", f.dispersion_alpha, f.alpha_std_error,
                    f.alpha_at_boundary ? "  (boundary)" : "");
    std::printf("log-likelihood %.2f  AIC %.2f  BIC %.2f  n %zu  clusters %zu  iterations %d\n", f.log_likelihood,
                f.aic, f.bic, f.n_obs, f.n_clusters, f.iterations);
}

int run(int argc, char** argv) {
    CLI::App app{"Gravity-model estimation and subsidy scenario simulation for school transition flows"};
    app.set_config("--config", "", "INI/TOML file with flag defaults (flags given on the command line win)");
    app.require_subcommand(1);

    std::string snapshot_path, model_path, scenarios_path, seeds_text, out_dir, runs_dir;
    SpecFlags spec_flags;
    SimFlags sim_flags;

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic snapshot with known coefficients");
    std::string synth_config;
    std::optional<std::uint64_t> gen_seed;
    std::optional<double> gen_zero_fraction;
    gen->add_option("--synthetic-config", synth_config, "JSON SyntheticConfig overrides")->check(CLI::ExistingFile);
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--zero-pair-fraction", gen_zero_fraction, "share of pairs forced to zero flow");
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* val = app.add_subcommand("validate", "check a snapshot against its invariants");
    val->add_option("--snapshot", snapshot_path, "snapshot.json manifest")->required()->check(CLI::ExistingFile);

    auto* fit = app.add_subcommand("fit", "estimate the gravity model");
    std::string family_text = "negbin";
    fit->add_option("--snapshot", snapshot_path, "snapshot.json manifest")->required()->check(CLI::ExistingFile);
    spec_flags.add(fit);
    fit->add_option("--family", family_text, "negbin | poisson | ols_log")
        ->check(CLI::IsMember({"negbin", "poisson", "ols_log"}));
    fit->add_option("--out", out_dir, "output directory")->required();

    auto* cmp = app.add_subcommand("compare", "specification ladder and family comparison");
    cmp->add_option("--snapshot", snapshot_path, "snapshot.json manifest")->required()->check(CLI::ExistingFile);
    spec_flags.add(cmp);
    cmp->add_option("--out", out_dir, "output directory")->required();

    auto* boot = app.add_subcommand("bootstrap", "origin-cluster bootstrap of coefficients and MAE/RMSE");
    std::size_t bootstrap_b = 200;
    std::uint64_t bootstrap_seed = 0;
    boot->add_option("--snapshot", snapshot_path, "snapshot.json manifest")->required()->check(CLI::ExistingFile);
    spec_flags.add(boot);
    boot->add_option("--bootstrap-b", bootstrap_b, "replicates")->check(CLI::PositiveNumber);
    boot->add_option("--seed", bootstrap_seed, "resampling seed");
    boot->add_option("--out", out_dir, "output directory")->required();

    auto* sim = app.add_subcommand("simulate", "run the scenario suite");
    bool per_seed = false;
    sim->add_option("--snapshot", snapshot_path, "snapshot.json manifest")->required()->check(CLI::ExistingFile);
    sim->add_option("--model", model_path, "model.json from fit")->required()->check(CLI::ExistingFile);
    sim->add_option("--scenarios", scenarios_path, "scenarios.json (default: 1, 5, 10, 15, 20 thousand)")
        ->check(CLI::ExistingFile);
    sim->add_option("--seeds", seeds_text, "override seeds: 0..99, 1,2,3 or one seed");
    sim_flags.add(sim);
    sim->add_flag("--per-seed", per_seed, "also write per_seed/<label>/seed_<n>.json");
    sim->add_option("--out", out_dir, "output directory")->required();

    auto* rep = app.add_subcommand("report", "rebuild the scenario summary from allocation_*.json files");
    rep->add_option("--runs", runs_dir, "directory holding allocation_*.json")->required()->check(CLI::ExistingDirectory);
    rep->add_option("--out", out_dir, "write summary files here");

    auto* srv = app.add_subcommand("serve", "HTTP/JSON scenario service");
    int port = 8080;
    std::string host = "127.0.0.1";
    srv->add_option("--snapshot", snapshot_path, "snapshot.json manifest")->check(CLI::ExistingFile);
    srv->add_option("--model", model_path, "model.json from fit")->check(CLI::ExistingFile);
    srv->add_option("--serve-port", port, "port")->check(CLI::Range(1, 65535));
    srv->add_option("--host", host, "bind address");
    sim_flags.add(srv);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::vector<std::string> args(argv + 1, argv + argc);
    RunManifest manifest;
    manifest.command = "gravflow";
    for (const auto& a : args) manifest.command += " " + a;

    if (*gen) {
        SyntheticConfig cfg = synth_config.empty() ? SyntheticConfig{} : synthetic_config_from_json(read_json(synth_config));
        if (gen_seed) cfg.rng_seed = *gen_seed;
        if (gen_zero_fraction) cfg.zero_pair_fraction = *gen_zero_fraction;
        try {
            check_config(cfg);
        } catch (const std::invalid_argument& e) {
            throw InputError(e.what());
        }
        const SystemSnapshot s = generate_synthetic(cfg);
        OutputDir out(out_dir);
        for (const char* f : {"schools.csv", "od_pairs.csv", "feeder_flows.csv", "snapshot.json"}) out.expect(f);
        write_snapshot(s, out.path());
        manifest.config = {{"synthetic", to_json(cfg)}};
        if (!synth_config.empty()) manifest.inputs.push_back(synth_config);
        for (const char* f : {"schools.csv", "od_pairs.csv", "feeder_flows.csv", "snapshot.json"}) out.adopt(f);
        out.manifest(manifest);
        out.commit();
        std::printf("wrote %zu schools, %zu pairs to %s\n", s.schools().size(), s.od().size(), out_dir.c_str());
        return 0;
    }

    if (*val) {
        const SystemSnapshot s = load_snapshot(snapshot_path);
        const auto report = validate_snapshot(s);
        std::printf("valid: %zu schools, %zu pairs, %zu feeder flows\n", s.schools().size(), s.od().size(),
                    s.feeder_flows().size());
        return report.ok() ? 0 : 2;
    }

    if (*fit) {
        const SystemSnapshot s = load_snapshot(snapshot_path);
        const ModelSpec spec = spec_flags.resolve();
        const FittedModel f = fit_specification(s, spec, parse_family(family_text));
        print_fit(f);
        if (!f.converged)
            throw NonConvergence("fit did not converge after " + std::to_string(f.iterations) +
                                 " iterations (last change " + std::to_string(f.last_change) + ")");
        OutputDir out(out_dir);
        out.json_file("model.json", to_json(f));
        if (f.floored_rows > 0 && f.family != Family::ols_log) {
            const double fl = f.spec.cost_floor;
            const auto rows = cost_floor_sensitivity(s, f.spec, {fl / 10.0, fl, fl * 10.0});
            out.json_file("cost_floor_sensitivity.json", to_json(rows));
            std::printf("%zu rows had net cost at or below the floor %g; ln_net_cost under floors:\n", f.floored_rows,
                        fl);
            for (const auto& r : rows) std::printf("  floor %-10g ln_net_cost %.4f  LL %.2f\n", r.cost_floor,
                                                   r.ln_net_cost, r.log_likelihood);
        }
        manifest.config = {{"family", family_text}, {"spec", to_json(f.spec)}};
        manifest.inputs = {snapshot_path};
        for (auto& p : spec_flags.inputs()) manifest.inputs.push_back(p);
        out.manifest(manifest);
        out.commit();
        return 0;
    }

    if (*cmp) {
        const SystemSnapshot s = load_snapshot(snapshot_path);
        const ModelSpec spec = spec_flags.resolve();
        const auto ladder = fit_ladder(s, spec);
        for (const auto& [label, f] : ladder)
            if (!f.converged) throw NonConvergence("ladder model '" + label + "' did not converge");
        const FamilyComparison fam = compare_families(build_design(s, DesignBuilder(s, spec).spec()));
        if (!fam.poisson.converged || !fam.negbin.converged) throw NonConvergence("family comparison did not converge");
        const ModelComparison c = compare_models(ladder);
        std::printf("%-28s %12s %12s %12s %9s %8s %7s\n", "model", "log-lik", "AIC", "BIC", "LRT", "p", "alpha");
        for (const auto& r : c.rows)
            std::printf("%-28s %12.1f %12.1f %12.1f %9s %8s %7.4f\n", r.label.c_str(), r.log_likelihood, r.aic, r.bic,
                        r.lrt ? std::to_string(r.lrt->stat).substr(0, 8).c_str() : "---",
                        r.lrt ? std::to_string(r.lrt->p_value).substr(0, 6).c_str() : "---", r.dispersion_alpha);
        std::printf("Poisson LL %.2f AIC %.2f | NB LL %.2f AIC %.2f | alpha=0 boundary LRT p %.3g\n",
                    fam.poisson.log_likelihood, fam.poisson.aic, fam.negbin.log_likelihood, fam.negbin.aic,
                    fam.dispersion_test.p_value);
        OutputDir out(out_dir);
        out.json_file("comparison.json", {{"ladder", to_json(c)}, {"families", to_json(fam)}});
        manifest.config = {{"spec", to_json(spec)}};
        manifest.inputs = {snapshot_path};
        for (auto& p : spec_flags.inputs()) manifest.inputs.push_back(p);
        out.manifest(manifest);
        out.commit();
        return 0;
    }

    if (*boot) {
        const SystemSnapshot s = load_snapshot(snapshot_path);
        const ModelSpec spec = DesignBuilder(s, spec_flags.resolve()).spec();
        BootstrapOptions opt;
        opt.replicates = bootstrap_b;
        opt.seed = bootstrap_seed;
        const BootstrapReport r = cluster_bootstrap(s, spec, opt);
        std::printf("%-22s %10s %10s %10s\n", "term", "2.5%", "median", "97.5%");
        for (std::size_t i = 0; i < r.names.size(); ++i)
            std::printf("%-22s %10.4f %10.4f %10.4f\n", r.names[i].c_str(), r.coefficients[i].lower,
                        r.coefficients[i].median, r.coefficients[i].upper);
        std::printf("%-22s %10.4f %10.4f %10.4f\n%-22s %10.4f %10.4f %10.4f\nfailed replicates: %zu of %zu\n", "MAE",
                    r.mae.lower, r.mae.median, r.mae.upper, "RMSE", r.rmse.lower, r.rmse.median, r.rmse.upper,
                    r.failed_replicates, r.replicates);
        OutputDir out(out_dir);
        json j = to_json(r);
        j["spec"] = to_json(spec);
        out.json_file("bootstrap.json", j);
        manifest.config = {{"spec", to_json(spec)}, {"replicates", bootstrap_b}, {"seed", bootstrap_seed}};
        manifest.inputs = {snapshot_path};
        for (auto& p : spec_flags.inputs()) manifest.inputs.push_back(p);
        out.manifest(manifest);
        out.commit();
        return 0;
    }

    if (*sim) {
        const SystemSnapshot s = load_snapshot(snapshot_path);
        const FittedModel f = load_model(model_path);
        std::vector<ScenarioSpec> scenarios =
            scenarios_path.empty() ? standard_scenarios() : scenarios_from_json(read_json(scenarios_path));
        if (!seeds_text.empty()) {
            const auto seeds = parse_seeds(seeds_text);
            for (auto& sc : scenarios) sc.seeds = seeds;
        }
        const SimulationOptions opts = sim_flags.resolve();
        const ScenarioRunner runner(s, f, opts);

        OutputDir out(out_dir);
        std::vector<json> artifacts;
        json scenario_echo = json::array();
        for (const auto& sc : scenarios) {
            MonteCarloOptions mc;
            mc.keep_accepted = per_seed;
            const ScenarioResult r = runner.run(sc, mc);
            artifacts.push_back(to_json(r, runner));
            out.json_file("allocation_" + sc.label + ".json", artifacts.back());
            if (per_seed) {
                out.subdir(fs::path("per_seed") / sc.label);
                for (std::size_t i = 0; i < r.monte_carlo.seeds.size(); ++i)
                    out.json_file(fs::path("per_seed") / sc.label / ("seed_" + std::to_string(r.monte_carlo.seeds[i]) + ".json"),
                                  per_seed_json(r, i));
            }
            scenario_echo.push_back(to_json(sc));
        }
        double observed = 0.0;
        for (const auto& r : s.od())
            if (s.find(r.dest_id) && s.find(r.dest_id)->sector == Sector::esc_destination)
                observed += static_cast<double>(r.observed_flow);
        const SummaryTable table = summary_from_artifacts(artifacts, observed);
        out.json_file("summary.json", to_json(table));
        out.text_file("summary.csv", to_csv(table));
        std::cout << to_text(table);
        manifest.config = {{"simulation", to_json(opts)}, {"scenarios", scenario_echo}, {"per_seed", per_seed}};
        manifest.inputs = {snapshot_path, model_path};
        if (!scenarios_path.empty()) manifest.inputs.push_back(scenarios_path);
        out.manifest(manifest);
        out.commit();
        return 0;
    }

    if (*rep) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(runs_dir)) {
            const auto name = e.path().filename().string();
            if (name.rfind("allocation_", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        std::vector<json> artifacts;
        for (const auto& p : files) artifacts.push_back(read_json(p));
        const SummaryTable table = summary_from_artifacts(artifacts, 0.0);
        std::cout << to_text(table);
        if (!out_dir.empty()) {
            OutputDir out(out_dir);
            out.json_file("summary.json", to_json(table));
            out.text_file("summary.csv", to_csv(table));
            manifest.inputs = files;
            out.manifest(manifest);
            out.commit();
        }
        return 0;
    }

    if (*srv) {
        std::optional<SystemSnapshot> s;
        std::optional<FittedModel> f;
        if (!snapshot_path.empty()) s = load_snapshot(snapshot_path);
        if (!model_path.empty()) f = load_model(model_path);
        ScenarioService service(std::move(s), std::move(f), sim_flags.resolve());
        httplib::Server server;
        service.mount(server);
        std::printf("listening on http://%s:%d/v1\n", host.c_str(), port);
        std::fflush(stdout);
        if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const RankDeficientError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NonConvergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
