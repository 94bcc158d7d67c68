#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gravflow {

// Thrown for malformed input files (bad columns, non-numeric cells, dangling ids).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown when a snapshot parses but violates its invariants.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Sector { public_origin, esc_destination, public_destination };
enum class PairClass { existing, hypothetical };

std::string_view to_string(Sector s);
std::string_view to_string(PairClass c);
std::optional<Sector> parse_sector(std::string_view text);

struct School {
    std::string school_id;
    Sector sector = Sector::public_origin;
    std::string region;
    double lgu_income = 0.0;                 // pesos per year
    std::optional<int> rating;               // ESC destinations only
    std::optional<double> tuition;           // thousands of pesos, ESC only
    std::optional<std::int64_t> slots;       // ESC only
    std::optional<std::int64_t> enrollment_g6;  // origins only
    std::optional<bool> is_congested;        // public destinations only
};

struct ODRecord {
    std::string origin_id;
    std::string dest_id;
    std::int64_t observed_flow = 0;
    double distance_km = 0.0;
    double net_cost = 0.0;  // thousands of pesos, tuition minus subsidy
    PairClass pair_class = PairClass::hypothetical;
};

struct FeederFlow {
    std::string origin_id;
    std::string public_dest_id;
    std::int64_t flow = 0;
};

using Metadata = std::map<std::string, std::string>;

// Full school-network state for one transition cohort. Immutable once built;
// the constructor derives pair classes, the congested set and the id index.
class SystemSnapshot {
public:
    SystemSnapshot() = default;
    SystemSnapshot(std::vector<School> schools, std::vector<ODRecord> od,
                   std::vector<FeederFlow> feeder_flows, double subsidy_baseline,
                   Metadata metadata = {});

    const std::vector<School>& schools() const { return schools_; }
    const std::vector<ODRecord>& od() const { return od_; }
    const std::vector<FeederFlow>& feeder_flows() const { return feeder_flows_; }
    const std::vector<std::string>& congested_set() const { return congested_set_; }
    double subsidy_baseline() const { return subsidy_baseline_; }
    const Metadata& metadata() const { return metadata_; }

    // First school with this id, or nullptr.
    const School* find(std::string_view id) const;

    std::vector<std::string> regions() const;

private:
    std::vector<School> schools_;
    std::vector<ODRecord> od_;
    std::vector<FeederFlow> feeder_flows_;
    std::vector<std::string> congested_set_;
    double subsidy_baseline_ = 0.0;
    Metadata metadata_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Canonical ordering used wherever iteration order could leak into output.
bool od_key_less(const ODRecord& a, const ODRecord& b);

}  // namespace gravflow
