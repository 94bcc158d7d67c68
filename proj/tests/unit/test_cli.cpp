#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "gravflow/core/json_io.hpp"
#include "gravflow/core/synthetic.hpp"
#include "support.hpp"

using namespace gravflow;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(GRAVFLOW_CLI) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// A small generated snapshot shared by the cases below.
const fs::path& snapshot_dir() {
    static gravflow::testing::TempDir dir("cli_snapshot");
    static const fs::path snap = [] {
        const auto cfg_path = dir / "cfg.json";
        write_json(cfg_path, to_json(gravflow::testing::small_config(5)));
        REQUIRE(run("generate --synthetic-config " + q(cfg_path) + " --out " + q(dir / "snap")) == 0);
        return dir / "snap";
    }();
    return snap;
}

}  // namespace

TEST_CASE("generate, fit and simulate end to end") {
    gravflow::testing::TempDir dir("cli_pipeline");
    const auto snap = snapshot_dir() / "snapshot.json";
    CHECK(run("validate --snapshot " + q(snap)) == 0);
    REQUIRE(run("fit --snapshot " + q(snap) + " --zero-flow-policy include_zeros --out " + q(dir / "fit")) == 0);
    CHECK(fs::exists(dir / "fit" / "model.json"));
    const auto manifest = read_json(dir / "fit" / "manifest.json");
    CHECK(manifest["outputs"][0] == "model.json");
    CHECK(manifest["inputs"][0]["sha256"].get<std::string>().size() == 64);

    REQUIRE(run("simulate --snapshot " + q(snap) + " --model " + q(dir / "fit" / "model.json") +
                " --seeds 0..4 --out " + q(dir / "sim")) == 0);
    for (const char* label : {"minus_1k", "minus_5k", "minus_10k", "minus_15k", "minus_20k"})
        CHECK(fs::exists(dir / "sim" / (std::string("allocation_") + label + ".json")));
    const auto summary = read_json(dir / "sim" / "summary.json");
    CHECK(summary["rows"].size() == 6);

    REQUIRE(run("report --runs " + q(dir / "sim") + " --out " + q(dir / "rep")) == 0);
    CHECK(gravflow::testing::slurp(dir / "rep" / "summary.csv") == gravflow::testing::slurp(dir / "sim" / "summary.csv"));
}

TEST_CASE("invalid input exits 2") {
    gravflow::testing::TempDir dir("cli_bad");
    fs::copy(snapshot_dir(), dir / "snap", fs::copy_options::recursive);
    {
        std::ofstream out(dir / "snap" / "od_pairs.csv", std::ios::app);
        out << "NOPE,NOPE,1,1,1\n";
    }
    CHECK(run("validate --snapshot " + q(dir / "snap" / "snapshot.json")) == 2);
    CHECK(run("fit --snapshot " + q(dir / "snap" / "snapshot.json") + " --out " + q(dir / "fit")) == 2);
    CHECK_FALSE(fs::exists(dir / "fit"));
    CHECK(run("fit --snapshot " + q(snapshot_dir() / "snapshot.json") + " --family gamma --out " + q(dir / "f2")) == 2);
    CHECK(run("simulate --snapshot " + q(snapshot_dir() / "snapshot.json") + " --model " +
              q(snapshot_dir() / "snapshot.json") + " --out " + q(dir / "s")) == 2);
    CHECK(run("--no-such-flag") == 2);
}

TEST_CASE("unconverged model exits 3") {
    gravflow::testing::TempDir dir("cli_unconverged");
    const auto snap = snapshot_dir() / "snapshot.json";
    REQUIRE(run("fit --snapshot " + q(snap) + " --out " + q(dir / "fit")) == 0);
    auto model = read_json(dir / "fit" / "model.json");
    model["convergence"]["converged"] = false;
    write_json(dir / "bad_model.json", model);
    CHECK(run("simulate --snapshot " + q(snap) + " --model " + q(dir / "bad_model.json") + " --seeds 1 --out " +
              q(dir / "sim")) == 3);
    CHECK_FALSE(fs::exists(dir / "sim"));
}

TEST_CASE("unwritable output exits 4 and leaves nothing behind") {
    gravflow::testing::TempDir dir("cli_io");
    const auto snap = snapshot_dir() / "snapshot.json";
    {
        std::ofstream(dir / "plain_file") << "x";
    }
    CHECK(run("fit --snapshot " + q(snap) + " --out " + q(dir / "plain_file" / "sub")) == 4);

    REQUIRE(run("fit --snapshot " + q(snap) + " --out " + q(dir / "fit")) == 0);
    // per_seed exists as a file, so the first per-seed directory fails after
    // allocation_minus_1k.json has been written.
    fs::create_directory(dir / "sim");
    {
        std::ofstream(dir / "sim" / "per_seed") << "x";
    }
    CHECK(run("simulate --snapshot " + q(snap) + " --model " + q(dir / "fit" / "model.json") +
              " --seeds 1 --per-seed --out " + q(dir / "sim")) == 4);
    std::vector<std::string> left;
    for (const auto& e : fs::directory_iterator(dir / "sim")) left.push_back(e.path().filename().string());
    CHECK(left == std::vector<std::string>{"per_seed"});
}
