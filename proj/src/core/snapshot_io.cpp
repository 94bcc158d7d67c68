#include "gravflow/core/snapshot_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "gravflow/core/csv.hpp"

namespace gravflow {

namespace {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<School> parse_schools(const csv::Table& t) {
    const auto c_id = t.require_column("school_id");
    const auto c_sector = t.require_column("sector");
    const auto c_region = t.require_column("region");
    const auto c_income = t.require_column("lgu_income");
    const auto c_rating = t.require_column("rating");
    const auto c_tuition = t.require_column("tuition_thousands");
    const auto c_slots = t.require_column("slots");
    const auto c_enroll = t.require_column("enrollment_g6");
    const auto c_cong = t.require_column("is_congested");

    std::vector<School> out;
    out.reserve(t.rows());
    std::set<std::string> seen;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        School s;
        s.school_id = t.cell(r, c_id);
        if (s.school_id.empty())
            throw InputError(t.source() + ": row " + std::to_string(r + 1) + ", column 'school_id': empty id");
        if (!seen.insert(s.school_id).second)
            throw InputError(t.source() + ": row " + std::to_string(r + 1) +
                             ", column 'school_id': duplicate school_id '" + s.school_id + "'");
        auto sector = parse_sector(t.cell(r, c_sector));
        if (!sector)
            throw InputError(t.source() + ": row " + std::to_string(r + 1) + ", column 'sector': unknown sector '" +
                             t.cell(r, c_sector) + "'");
        s.sector = *sector;
        s.region = t.cell(r, c_region);
        s.lgu_income = t.number(r, c_income);
        if (auto v = t.opt_integer(r, c_rating)) s.rating = static_cast<int>(*v);
        s.tuition = t.opt_number(r, c_tuition);
        s.slots = t.opt_integer(r, c_slots);
        s.enrollment_g6 = t.opt_integer(r, c_enroll);
        s.is_congested = t.opt_boolean(r, c_cong);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ODRecord> parse_od(const csv::Table& t, const std::set<std::string>& ids) {
    const auto c_o = t.require_column("origin_id");
    const auto c_d = t.require_column("dest_id");
    const auto c_f = t.require_column("observed_flow");
    const auto c_dist = t.require_column("distance_km");
    const auto c_cost = t.require_column("net_cost_thousands");
    std::vector<ODRecord> out;
    out.reserve(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) {
        ODRecord rec;
        rec.origin_id = t.cell(r, c_o);
        rec.dest_id = t.cell(r, c_d);
        for (auto [col, id] : {std::pair{c_o, &rec.origin_id}, std::pair{c_d, &rec.dest_id}}) {
            if (!ids.count(*id))
                throw InputError(t.source() + ": row " + std::to_string(r + 1) + ", column '" +
                                 (col == c_o ? "origin_id" : "dest_id") + "': unknown school '" + *id + "'");
        }
        rec.observed_flow = t.integer(r, c_f);
        rec.distance_km = t.number(r, c_dist);
        rec.net_cost = t.number(r, c_cost);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<FeederFlow> parse_feeders(const csv::Table& t, const std::set<std::string>& ids) {
    const auto c_o = t.require_column("origin_id");
    const auto c_g = t.require_column("public_dest_id");
    const auto c_f = t.require_column("flow");
    std::vector<FeederFlow> out;
    out.reserve(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) {
        FeederFlow f{t.cell(r, c_o), t.cell(r, c_g), t.integer(r, c_f)};
        if (!ids.count(f.origin_id))
            throw InputError(t.source() + ": row " + std::to_string(r + 1) +
                             ", column 'origin_id': unknown school '" + f.origin_id + "'");
        if (!ids.count(f.public_dest_id))
            throw InputError(t.source() + ": row " + std::to_string(r + 1) +
                             ", column 'public_dest_id': unknown school '" + f.public_dest_id + "'");
        out.push_back(std::move(f));
    }
    return out;
}

template <class T>
std::string opt_cell(const std::optional<T>& v) {
    if (!v) return {};
    if constexpr (std::is_same_v<T, double>) return csv::format_number(*v);
    else if constexpr (std::is_same_v<T, bool>) return *v ? "true" : "false";
    else return std::to_string(*v);
}

}  // namespace

ValidationReport validate_snapshot(const SystemSnapshot& s) {
    ValidationReport rep;
    auto add = [&](std::string v) { rep.violations.push_back(std::move(v)); };

    std::set<std::string> ids;
    for (const auto& sc : s.schools()) {
        const std::string tag = "school " + sc.school_id + ": ";
        if (!ids.insert(sc.school_id).second) add(tag + "duplicate school_id");
        if (!(sc.lgu_income > 0.0) || !std::isfinite(sc.lgu_income)) add(tag + "lgu_income must be positive");
        if (sc.region.empty()) add(tag + "empty region");
        const bool esc = sc.sector == Sector::esc_destination;
        const bool origin = sc.sector == Sector::public_origin;
        if (esc != sc.slots.has_value()) add(tag + "slots present iff esc_destination");
        if (esc != sc.tuition.has_value()) add(tag + "tuition present iff esc_destination");
        if (esc != sc.rating.has_value()) add(tag + "rating present iff esc_destination");
        if (origin != sc.enrollment_g6.has_value()) add(tag + "enrollment_g6 present iff public_origin");
        if (sc.is_congested && sc.sector != Sector::public_destination)
            add(tag + "is_congested only applies to public_destination");
        if (sc.slots && *sc.slots < 0) add(tag + "negative slots");
        if (sc.tuition && (*sc.tuition < 0.0 || !std::isfinite(*sc.tuition))) add(tag + "negative tuition");
        if (sc.rating && *sc.rating < 0) add(tag + "negative rating");
        if (sc.enrollment_g6 && *sc.enrollment_g6 < 0) add(tag + "negative enrollment_g6");
    }

    std::map<std::string, std::int64_t> beneficiaries;
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& r : s.od()) {
        const std::string tag = "od " + r.origin_id + "->" + r.dest_id + ": ";
        const School* o = s.find(r.origin_id);
        const School* d = s.find(r.dest_id);
        if (!o) add(tag + "unknown origin");
        else if (o->sector != Sector::public_origin) add(tag + "origin is not a public_origin");
        if (!d) add(tag + "unknown destination");
        else if (d->sector != Sector::esc_destination) add(tag + "destination is not an esc_destination");
        if (!(r.distance_km > 0.0) || !std::isfinite(r.distance_km)) add(tag + "non-positive distance");
        if (!std::isfinite(r.net_cost)) add(tag + "non-finite net cost");
        if (r.observed_flow < 0) add(tag + "negative observed_flow");
        if ((r.pair_class == PairClass::existing) != (r.observed_flow > 0)) add(tag + "pair_class inconsistent with flow");
        if (!keys.emplace(r.origin_id, r.dest_id).second) add(tag + "duplicate pair");
        beneficiaries[r.origin_id] += std::max<std::int64_t>(r.observed_flow, 0);
    }
    for (const auto& [origin, total] : beneficiaries) {
        const School* o = s.find(origin);
        if (o && o->enrollment_g6 && total > *o->enrollment_g6)
            add("origin " + origin + ": beneficiary flows " + std::to_string(total) + " exceed enrollment_g6 " +
                std::to_string(*o->enrollment_g6));
    }

    for (const auto& f : s.feeder_flows()) {
        const std::string tag = "feeder " + f.origin_id + "->" + f.public_dest_id + ": ";
        const School* o = s.find(f.origin_id);
        const School* g = s.find(f.public_dest_id);
        if (!o || o->sector != Sector::public_origin) add(tag + "origin is not a public_origin");
        if (!g || g->sector != Sector::public_destination) add(tag + "destination is not a public_destination");
        if (f.flow < 0) add(tag + "negative flow");
    }
    for (const auto& g : s.congested_set()) {
        const School* sc = s.find(g);
        if (!sc || sc->sector != Sector::public_destination || !sc->is_congested.value_or(false))
            add("congested set member " + g + " is not a congested public destination");
    }
    if (!std::isfinite(s.subsidy_baseline())) add("non-finite subsidy_baseline");
    return rep;
}

SystemSnapshot parse_snapshot(const SnapshotSources& src) {
    auto schools = parse_schools(csv::Table::parse(src.schools_csv, "schools.csv"));
    std::set<std::string> ids;
    for (const auto& s : schools) ids.insert(s.school_id);
    auto od = parse_od(csv::Table::parse(src.od_pairs_csv, "od_pairs.csv"), ids);
    auto feeders = parse_feeders(csv::Table::parse(src.feeder_flows_csv, "feeder_flows.csv"), ids);
    SystemSnapshot snap(std::move(schools), std::move(od), std::move(feeders), src.subsidy_baseline, src.metadata);
    auto rep = validate_snapshot(snap);
    if (!rep.ok()) throw ValidationError(std::move(rep.violations));
    return snap;
}

SystemSnapshot load_snapshot(const std::filesystem::path& manifest) {
    json m;
    try {
        m = json::parse(read_file(manifest));
    } catch (const json::parse_error& e) {
        throw InputError(manifest.filename().string() + ": " + e.what());
    }
    const auto base = manifest.parent_path();
    auto file_of = [&](const char* key) {
        if (!m.contains(key) || !m[key].is_string())
            throw InputError(manifest.filename().string() + ": missing file entry '" + key + "'");
        return base / m[key].get<std::string>();
    };
    SnapshotSources src;
    src.schools_csv = read_file(file_of("schools"));
    src.od_pairs_csv = read_file(file_of("od_pairs"));
    src.feeder_flows_csv = read_file(file_of("feeder_flows"));
    if (!m.contains("subsidy_baseline") || !m["subsidy_baseline"].is_number())
        throw InputError(manifest.filename().string() + ": missing numeric 'subsidy_baseline'");
    src.subsidy_baseline = m["subsidy_baseline"].get<double>();
    if (m.contains("metadata")) {
        for (auto& [k, v] : m["metadata"].items())
            src.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    return parse_snapshot(src);
}

void write_snapshot(const SystemSnapshot& s, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    auto schools = s.schools();
    std::sort(schools.begin(), schools.end(),
              [](const School& a, const School& b) { return a.school_id < b.school_id; });
    std::vector<std::vector<std::string>> rows;
    for (const auto& sc : schools) {
        rows.push_back({sc.school_id, std::string(to_string(sc.sector)), sc.region, csv::format_number(sc.lgu_income),
                        opt_cell(sc.rating), opt_cell(sc.tuition), opt_cell(sc.slots), opt_cell(sc.enrollment_g6),
                        opt_cell(sc.is_congested)});
    }
    csv::write(dir / "schools.csv",
               {"school_id", "sector", "region", "lgu_income", "rating", "tuition_thousands", "slots", "enrollment_g6",
                "is_congested"},
               rows);

    auto od = s.od();
    std::sort(od.begin(), od.end(), od_key_less);
    rows.clear();
    for (const auto& r : od) {
        rows.push_back({r.origin_id, r.dest_id, std::to_string(r.observed_flow), csv::format_number(r.distance_km),
                        csv::format_number(r.net_cost)});
    }
    csv::write(dir / "od_pairs.csv", {"origin_id", "dest_id", "observed_flow", "distance_km", "net_cost_thousands"},
               rows);

    auto feeders = s.feeder_flows();
    std::sort(feeders.begin(), feeders.end(), [](const FeederFlow& a, const FeederFlow& b) {
        return std::tie(a.origin_id, a.public_dest_id) < std::tie(b.origin_id, b.public_dest_id);
    });
    rows.clear();
    for (const auto& f : feeders) rows.push_back({f.origin_id, f.public_dest_id, std::to_string(f.flow)});
    csv::write(dir / "feeder_flows.csv", {"origin_id", "public_dest_id", "flow"}, rows);

    json m;
    m["schools"] = "schools.csv";
    m["od_pairs"] = "od_pairs.csv";
    m["feeder_flows"] = "feeder_flows.csv";
    m["subsidy_baseline"] = s.subsidy_baseline();
    m["metadata"] = json::object();
    for (const auto& [k, v] : s.metadata()) m["metadata"][k] = v;
    std::ofstream out(dir / "snapshot.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "snapshot.json").string());
    out << m.dump(2) << '\n';
}

bool same_content(const SystemSnapshot& a, const SystemSnapshot& b) {
    auto schools_of = [](const SystemSnapshot& s) {
        auto v = s.schools();
        std::sort(v.begin(), v.end(), [](const School& x, const School& y) { return x.school_id < y.school_id; });
        return v;
    };
    auto sa = schools_of(a), sb = schools_of(b);
    if (sa.size() != sb.size()) return false;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        const auto &x = sa[i], &y = sb[i];
        if (std::tie(x.school_id, x.sector, x.region, x.lgu_income, x.rating, x.tuition, x.slots, x.enrollment_g6,
                     x.is_congested) != std::tie(y.school_id, y.sector, y.region, y.lgu_income, y.rating, y.tuition,
                                                 y.slots, y.enrollment_g6, y.is_congested))
            return false;
    }
    auto oa = a.od(), ob = b.od();
    std::sort(oa.begin(), oa.end(), od_key_less);
    std::sort(ob.begin(), ob.end(), od_key_less);
    if (oa.size() != ob.size()) return false;
    for (std::size_t i = 0; i < oa.size(); ++i) {
        const auto &x = oa[i], &y = ob[i];
        if (std::tie(x.origin_id, x.dest_id, x.observed_flow, x.distance_km, x.net_cost, x.pair_class) !=
            std::tie(y.origin_id, y.dest_id, y.observed_flow, y.distance_km, y.net_cost, y.pair_class))
            return false;
    }
    auto key = [](const FeederFlow& f) { return std::tie(f.origin_id, f.public_dest_id, f.flow); };
    auto fa = a.feeder_flows(), fb = b.feeder_flows();
    auto cmp = [&](const FeederFlow& x, const FeederFlow& y) { return key(x) < key(y); };
    std::sort(fa.begin(), fa.end(), cmp);
    std::sort(fb.begin(), fb.end(), cmp);
    if (fa.size() != fb.size()) return false;
    for (std::size_t i = 0; i < fa.size(); ++i)
        if (key(fa[i]) != key(fb[i])) return false;
    return a.subsidy_baseline() == b.subsidy_baseline() && a.metadata() == b.metadata() &&
           a.congested_set() == b.congested_set();
}

}  // namespace gravflow
