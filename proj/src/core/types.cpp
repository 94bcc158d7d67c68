#include "gravflow/core/types.hpp"

#include <algorithm>
#include <set>

namespace gravflow {

namespace {

std::string join_violations(const std::vector<std::string>& v) {
    std::string out = "snapshot invalid";
    for (const auto& s : v) {
        out += "\n  - ";
        out += s;
    }
    return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

std::string_view to_string(Sector s) {
    switch (s) {
        case Sector::public_origin: return "public_origin";
        case Sector::esc_destination: return "esc_destination";
        case Sector::public_destination: return "public_destination";
    }
    return "?";
}

std::string_view to_string(PairClass c) {
    return c == PairClass::existing ? "existing" : "hypothetical";
}

std::optional<Sector> parse_sector(std::string_view text) {
    if (text == "public_origin") return Sector::public_origin;
    if (text == "esc_destination") return Sector::esc_destination;
    if (text == "public_destination") return Sector::public_destination;
    return std::nullopt;
}

SystemSnapshot::SystemSnapshot(std::vector<School> schools, std::vector<ODRecord> od,
                               std::vector<FeederFlow> feeder_flows, double subsidy_baseline,
                               Metadata metadata)
    : schools_(std::move(schools)),
      od_(std::move(od)),
      feeder_flows_(std::move(feeder_flows)),
      subsidy_baseline_(subsidy_baseline),
      metadata_(std::move(metadata)) {
    for (std::size_t i = 0; i < schools_.size(); ++i) index_.emplace(schools_[i].school_id, i);
    for (auto& r : od_) r.pair_class = r.observed_flow > 0 ? PairClass::existing : PairClass::hypothetical;
    for (const auto& s : schools_) {
        if (s.sector == Sector::public_destination && s.is_congested.value_or(false))
            congested_set_.push_back(s.school_id);
    }
    std::sort(congested_set_.begin(), congested_set_.end());
    congested_set_.erase(std::unique(congested_set_.begin(), congested_set_.end()),
                         congested_set_.end());
}

const School* SystemSnapshot::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &schools_[it->second];
}

std::vector<std::string> SystemSnapshot::regions() const {
    std::set<std::string> r;
    for (const auto& s : schools_) r.insert(s.region);
    return {r.begin(), r.end()};
}

bool od_key_less(const ODRecord& a, const ODRecord& b) {
    if (a.origin_id != b.origin_id) return a.origin_id < b.origin_id;
    return a.dest_id < b.dest_id;
}

}  // namespace gravflow
