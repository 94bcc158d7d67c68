#pragma once

// Small hand-built snapshots and helpers shared by the test binaries.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gravflow/core/snapshot_io.hpp"
#include "gravflow/core/synthetic.hpp"

namespace gravflow::testing {

class Fixture {
public:
    Fixture& origin(const std::string& id, std::int64_t enrollment, const std::string& region = "NCR",
                    double income = 1e8) {
        schools_ << id << ",public_origin," << region << ',' << income << ",,,," << enrollment << ",\n";
        return *this;
    }
    Fixture& esc(const std::string& id, double tuition, std::int64_t slots, int rating = 3,
                 const std::string& region = "NCR", double income = 1e8) {
        schools_ << id << ",esc_destination," << region << ',' << income << ',' << rating << ',' << tuition << ','
                 << slots << ",,\n";
        return *this;
    }
    Fixture& publik(const std::string& id, bool congested, const std::string& region = "NCR") {
        schools_ << id << ",public_destination," << region << ",1e8,,,,," << (congested ? "true" : "false") << '\n';
        return *this;
    }
    Fixture& pair(const std::string& o, const std::string& d, std::int64_t flow, double km, double cost) {
        od_ << o << ',' << d << ',' << flow << ',' << km << ',' << cost << '\n';
        return *this;
    }
    Fixture& feeder(const std::string& o, const std::string& g, std::int64_t flow) {
        feeders_ << o << ',' << g << ',' << flow << '\n';
        return *this;
    }
    Fixture& subsidy(double s) {
        subsidy_ = s;
        return *this;
    }

    SnapshotSources sources() const {
        SnapshotSources src;
        src.schools_csv = "school_id,sector,region,lgu_income,rating,tuition_thousands,slots,enrollment_g6,is_congested\n" +
                          schools_.str();
        src.od_pairs_csv = "origin_id,dest_id,observed_flow,distance_km,net_cost_thousands\n" + od_.str();
        src.feeder_flows_csv = "origin_id,public_dest_id,flow\n" + feeders_.str();
        src.subsidy_baseline = subsidy_;
        return src;
    }
    SystemSnapshot build() const { return parse_snapshot(sources()); }

private:
    std::ostringstream schools_, od_, feeders_;
    double subsidy_ = 9.0;
};

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("gravflow-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// A few hundred origins; fits in well under a second.
inline SyntheticConfig small_config(std::uint64_t seed = 1) {
    SyntheticConfig c;
    c.n_origins = 300;
    c.n_esc = 80;
    c.n_public = 20;
    c.pairs_per_origin = 10;
    c.box_width_km = 60.0;
    c.box_height_km = 40.0;
    c.rng_seed = seed;
    return c;
}

}  // namespace gravflow::testing
