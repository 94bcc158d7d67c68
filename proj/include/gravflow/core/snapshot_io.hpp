#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gravflow/core/types.hpp"

namespace gravflow {

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Checks every snapshot invariant. Never throws; violations are data.
ValidationReport validate_snapshot(const SystemSnapshot& s);

// In-memory CSV contents, mainly for fixtures.
struct SnapshotSources {
    std::string schools_csv;
    std::string od_pairs_csv;
    std::string feeder_flows_csv;
    double subsidy_baseline = 0.0;  // thousands of pesos
    Metadata metadata;
};

// Parses and validates. Throws InputError for schema, parse and referential
// problems, ValidationError when the parsed snapshot violates an invariant.
SystemSnapshot parse_snapshot(const SnapshotSources& src);

// Reads a snapshot.json manifest and the three CSV files it names
// (relative paths resolve against the manifest's directory).
SystemSnapshot load_snapshot(const std::filesystem::path& manifest);

// Writes schools.csv, od_pairs.csv, feeder_flows.csv and snapshot.json into
// `dir` in canonical (id-sorted) order.
void write_snapshot(const SystemSnapshot& s, const std::filesystem::path& dir);

// True when both snapshots hold the same content after canonical ordering.
bool same_content(const SystemSnapshot& a, const SystemSnapshot& b);

}  // namespace gravflow
