#include "gravflow/report/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "gravflow/core/csv.hpp"
#include "gravflow/core/rng.hpp"
#include "gravflow/core/types.hpp"

namespace gravflow {

namespace {

std::string fixed1(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

double percent_change(double from, double to) { return 100.0 * (to - from) / from; }

}  // namespace

std::string format_percent_change(double from, double to) {
    if (!(from != 0.0) || !std::isfinite(from) || !std::isfinite(to)) return "n/a";
    const double pct = percent_change(from, to);
    const double rounded = std::round(pct * 10.0) / 10.0;
    if (rounded == 0.0) return "0.0%";
    return (rounded > 0.0 ? "+" : "") + fixed1(rounded) + "%";
}

std::string format_ratio(double numerator, double denominator) {
    if (!(denominator > 0.0)) return "n/a";
    return fixed1(numerator / denominator) + "×";
}

SummaryTable summary_from_artifacts(const std::vector<json>& allocations, double observed_total) {
    SummaryTable t;
    t.observed_total = allocations.empty() ? observed_total
                                           : allocations.front().at("system").at("observed_total").get<double>();
    std::vector<const json*> sorted;
    for (const auto& a : allocations) sorted.push_back(&a);
    std::stable_sort(sorted.begin(), sorted.end(), [](const json* a, const json* b) {
        const double da = a->at("cost_reduction").get<double>(), db = b->at("cost_reduction").get<double>();
        if (da != db) return da < db;
        return a->at("label").get<std::string>() < b->at("label").get<std::string>();
    });

    SummaryRow base;
    base.label = "Observed baseline";
    base.flow = t.observed_total;
    t.rows.push_back(base);
    if (sorted.empty()) return t;

    const double reference = sorted.front()->at("system").at("y").at("mean").get<double>();
    t.reference_label = sorted.front()->at("label").get<std::string>();
    for (const json* a : sorted) {
        SummaryRow r;
        r.label = a->at("label").get<std::string>();
        r.cost_reduction = a->at("cost_reduction").get<double>();
        r.flow = a->at("system").at("y").at("mean").get<double>();
        r.sd = a->at("system").at("y").at("sd").get<double>();
        if (t.observed_total != 0.0) r.pct_from_observed = percent_change(t.observed_total, r.flow);
        if (reference != 0.0) r.pct_from_reference = percent_change(reference, r.flow);
        r.delta_from_observed = format_percent_change(t.observed_total, r.flow);
        r.delta_from_reference = format_percent_change(reference, r.flow);
        t.rows.push_back(std::move(r));
    }
    return t;
}

json to_json(const SummaryTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) {
        json j{{"label", r.label}, {"flow", r.flow}};
        j["cost_reduction"] = r.cost_reduction ? json(*r.cost_reduction) : json(nullptr);
        j["sd"] = r.sd ? json(*r.sd) : json(nullptr);
        j["pct_from_observed"] = r.pct_from_observed ? json(*r.pct_from_observed) : json(nullptr);
        j["pct_from_reference"] = r.pct_from_reference ? json(*r.pct_from_reference) : json(nullptr);
        j["delta_from_observed"] = r.delta_from_observed;
        j["delta_from_reference"] = r.delta_from_reference;
        rows.push_back(std::move(j));
    }
    return {{"observed_total", t.observed_total}, {"reference_label", t.reference_label}, {"rows", rows}};
}

std::string to_csv(const SummaryTable& t) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : t.rows) {
        rows.push_back({r.label, r.cost_reduction ? csv::format_number(*r.cost_reduction) : "",
                        fixed1(r.flow), r.sd ? fixed1(*r.sd) : "", r.delta_from_observed, r.delta_from_reference});
    }
    std::ostringstream out;
    csv::write(out, {"scenario", "cost_reduction_thousands", "predicted_flow", "sd", "delta_from_observed",
                     "delta_from_reference"},
               rows);
    return out.str();
}

std::string to_text(const SummaryTable& t) {
    std::ostringstream out;
    const std::string ref = t.reference_label.empty() ? "reference" : t.reference_label;
    out << std::left << std::setw(22) << "Scenario" << std::right << std::setw(14) << "Flow" << std::setw(12)
        << "SD" << std::setw(18) << "vs observed" << std::setw(18) << ("vs " + ref) << '\n';
    for (const auto& r : t.rows) {
        out << std::left << std::setw(22) << r.label << std::right << std::setw(14) << fixed1(r.flow) << std::setw(12)
            << (r.sd ? fixed1(*r.sd) : "") << std::setw(18) << r.delta_from_observed << std::setw(18)
            << r.delta_from_reference << '\n';
    }
    return out.str();
}

std::string sha256_hex_of(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

std::string sha256_hex(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return sha256_hex_of(buf.str());
}

json RunManifest::to_json() const {
    json ins = json::array();
    for (const auto& p : inputs) ins.push_back({{"path", p.generic_string()}, {"sha256", sha256_hex(p)}});
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return {{"command", command},
            {"software", {{"name", "gravflow"}, {"version", kVersion}}},
            {"config", config},
            {"inputs", ins},
            {"outputs", outputs},
            {"prng", {{"generator", rng::kGeneratorName}, {"shuffle", rng::kShuffleName}}},
            {"created_at", stamp}};
}

}  // namespace gravflow
