#include "gravflow/core/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "gravflow/core/csv.hpp"
#include "gravflow/core/rng.hpp"

namespace gravflow {

namespace {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

std::string make_id(char prefix, int i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*d", prefix, width, i);
    return buf;
}

int id_width(int n) { return std::max(4, static_cast<int>(std::to_string(n).size())); }

double coef(const std::map<std::string, double>& c, const std::string& name) {
    auto it = c.find(name);
    return it == c.end() ? 0.0 : it->second;
}

std::int64_t draw_nb2(rng::Xoshiro256& g, double mu, double alpha) {
    if (!(mu > 0.0)) return 0;
    double lambda = mu;
    if (alpha > 0.0) {
        boost::random::gamma_distribution<double> gamma(1.0 / alpha, alpha * mu);
        lambda = gamma(g);
    }
    if (!(lambda > 0.0)) return 0;
    boost::random::poisson_distribution<std::int64_t, double> pois(lambda);
    return pois(g);
}

}  // namespace

std::map<std::string, double> SyntheticConfig::reference_coefficients() {
    return {
        {"intercept", 3.3944},         {"ln_distance", -0.4509},      {"ln_net_cost", -0.1004},
        {"rating", -0.0204},           {"ln_origin_income", -0.0207}, {"ln_dest_income", -0.0489},
        {"origin_region_R3", -0.0205}, {"origin_region_R4A", -0.0500}, {"dest_region_R3", -0.0237},
        {"dest_region_R4A", 0.0178},   {"alpha", 0.3925},
    };
}

void check_config(const SyntheticConfig& c) {
    if (c.n_origins <= 0 || c.n_esc <= 0 || c.n_public <= 0)
        throw std::invalid_argument("synthetic config needs at least one school of every sector");
    if (c.regions.empty()) throw std::invalid_argument("synthetic config needs at least one region");
    if (!(c.detour_factor >= 1.0)) throw std::invalid_argument("detour_factor must be >= 1");
    if (!(c.zero_pair_fraction >= 0.0 && c.zero_pair_fraction <= 1.0))
        throw std::invalid_argument("zero_pair_fraction must lie in [0,1]");
    if (coef(c.true_coefficients, "alpha") < 0.0) throw std::invalid_argument("dispersion alpha must be >= 0");
    if (c.pairs_per_origin <= 0) throw std::invalid_argument("pairs_per_origin must be positive");
    if (!(c.box_width_km > 0.0 && c.box_height_km > 0.0 && c.lgu_cell_km > 0.0))
        throw std::invalid_argument("coordinate box and LGU cell size must be positive");
    if (!(c.tuition_min <= c.tuition_max) || c.rating_max < 0)
        throw std::invalid_argument("bad tuition or rating range");
    if (!(c.slot_multiplier_min >= 0.0 && c.slot_multiplier_min <= c.slot_multiplier_max))
        throw std::invalid_argument("bad slot multiplier range");
    if (!(c.pool_to_slot_ratio >= 0.0)) throw std::invalid_argument("pool_to_slot_ratio must be >= 0");
    if (!(c.congested_fraction >= 0.0 && c.congested_fraction <= 1.0))
        throw std::invalid_argument("congested_fraction must lie in [0,1]");
    if (c.feeders_per_origin < 0) throw std::invalid_argument("feeders_per_origin must be >= 0");
}

SystemSnapshot generate_synthetic(const SyntheticConfig& cfg) {
    check_config(cfg);
    rng::Xoshiro256 g(cfg.rng_seed);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * g.uniform(); };

    const auto& tc = cfg.true_coefficients;
    const double alpha = coef(tc, "alpha");
    const std::size_t n_regions = cfg.regions.size();

    auto place = [&](int n) {
        std::vector<Point> pts(static_cast<std::size_t>(n));
        for (auto& p : pts) {
            p.x = uniform(0.0, cfg.box_width_km);
            p.y = uniform(0.0, cfg.box_height_km);
        }
        return pts;
    };
    const auto origin_pts = place(cfg.n_origins);
    const auto esc_pts = place(cfg.n_esc);
    const auto public_pts = place(cfg.n_public);

    const int cells_x = static_cast<int>(std::ceil(cfg.box_width_km / cfg.lgu_cell_km));
    const int cells_y = static_cast<int>(std::ceil(cfg.box_height_km / cfg.lgu_cell_km));
    std::vector<double> cell_income(static_cast<std::size_t>(cells_x * cells_y));
    for (auto& inc : cell_income) {
        // Box-Muller from two uniforms keeps the draw sequence implementation-independent.
        const double u1 = 1.0 - g.uniform();
        const double u2 = g.uniform();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        inc = std::max(1.0, std::round(std::exp(cfg.ln_income_mean + cfg.ln_income_sd * z)));
    }
    auto income_at = [&](const Point& p) {
        int cx = std::clamp(static_cast<int>(p.x / cfg.lgu_cell_km), 0, cells_x - 1);
        int cy = std::clamp(static_cast<int>(p.y / cfg.lgu_cell_km), 0, cells_y - 1);
        return cell_income[static_cast<std::size_t>(cy * cells_x + cx)];
    };
    auto region_at = [&](const Point& p) {
        auto k = static_cast<std::size_t>(p.x / cfg.box_width_km * static_cast<double>(n_regions));
        return std::min(k, n_regions - 1);
    };

    std::vector<School> schools;
    schools.reserve(static_cast<std::size_t>(cfg.n_origins + cfg.n_esc + cfg.n_public));
    const int wo = id_width(cfg.n_origins), we = id_width(cfg.n_esc), wp = id_width(cfg.n_public);

    std::vector<int> esc_rating(static_cast<std::size_t>(cfg.n_esc));
    std::vector<double> esc_tuition(static_cast<std::size_t>(cfg.n_esc));
    for (int j = 0; j < cfg.n_esc; ++j) {
        esc_rating[j] = 1 + static_cast<int>(g.below(static_cast<std::uint64_t>(cfg.rating_max)));
        if (cfg.rating_max == 0) esc_rating[j] = 0;
        esc_tuition[j] = std::round(uniform(cfg.tuition_min, cfg.tuition_max) * 100.0) / 100.0;
    }

    // Linear-predictor pieces that depend on one endpoint only.
    auto origin_part = [&](const Point& p) {
        double eta = coef(tc, "intercept") + coef(tc, "ln_origin_income") * std::log(income_at(p));
        const auto r = region_at(p);
        if (r > 0) eta += coef(tc, "origin_region_" + cfg.regions[r]);
        return eta;
    };
    auto dest_part = [&](int j) {
        const Point& p = esc_pts[j];
        double eta = coef(tc, "ln_dest_income") * std::log(income_at(p)) + coef(tc, "rating") * esc_rating[j];
        const auto r = region_at(p);
        if (r > 0) eta += coef(tc, "dest_region_" + cfg.regions[r]);
        return eta;
    };
    std::vector<double> dest_eta(static_cast<std::size_t>(cfg.n_esc));
    for (int j = 0; j < cfg.n_esc; ++j) dest_eta[j] = dest_part(j);

    const int per_origin = std::min(cfg.pairs_per_origin, cfg.n_esc);
    std::vector<ODRecord> od;
    od.reserve(static_cast<std::size_t>(cfg.n_origins) * per_origin);
    std::vector<std::int64_t> origin_flow(static_cast<std::size_t>(cfg.n_origins), 0);
    std::vector<std::int64_t> dest_flow(static_cast<std::size_t>(cfg.n_esc), 0);
    std::vector<int> order(static_cast<std::size_t>(cfg.n_esc));
    std::vector<double> dist(static_cast<std::size_t>(cfg.n_esc));
    for (int i = 0; i < cfg.n_origins; ++i) {
        const Point& o = origin_pts[i];
        for (int j = 0; j < cfg.n_esc; ++j) dist[j] = std::hypot(o.x - esc_pts[j].x, o.y - esc_pts[j].y);
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + per_origin, order.end(), [&](int a, int b) {
            return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
        });
        const double eta_o = origin_part(o);
        for (int k = 0; k < per_origin; ++k) {
            const int j = order[k];
            ODRecord r;
            r.origin_id = make_id('O', i, wo);
            r.dest_id = make_id('E', j, we);
            r.distance_km = std::max(0.05, std::round(dist[j] * cfg.detour_factor * 1000.0) / 1000.0);
            r.net_cost = esc_tuition[j] - cfg.subsidy_baseline;
            const double ln_cost = std::log(std::max(r.net_cost, 1e-3));
            const double mu = std::exp(eta_o + dest_eta[j] + coef(tc, "ln_distance") * std::log(r.distance_km) +
                                       coef(tc, "ln_net_cost") * ln_cost);
            const bool structural_zero = g.uniform() < cfg.zero_pair_fraction;
            const std::int64_t draw = draw_nb2(g, mu, alpha);
            r.observed_flow = structural_zero ? 0 : draw;
            origin_flow[i] += r.observed_flow;
            dest_flow[j] += r.observed_flow;
            od.push_back(std::move(r));
        }
    }

    std::vector<std::int64_t> slots(static_cast<std::size_t>(cfg.n_esc));
    std::int64_t total_slots = 0;
    for (int j = 0; j < cfg.n_esc; ++j) {
        const double m = uniform(cfg.slot_multiplier_min, cfg.slot_multiplier_max);
        slots[j] = std::max<std::int64_t>(1, std::llround(static_cast<double>(dest_flow[j]) * m));
        total_slots += slots[j];
    }

    std::vector<double> pool_weight(static_cast<std::size_t>(cfg.n_origins));
    for (auto& w : pool_weight) w = uniform(0.5, 1.5);
    const double weight_sum = std::accumulate(pool_weight.begin(), pool_weight.end(), 0.0);
    const double pool_target = cfg.pool_to_slot_ratio * static_cast<double>(total_slots);

    for (int i = 0; i < cfg.n_origins; ++i) {
        School s;
        s.school_id = make_id('O', i, wo);
        s.sector = Sector::public_origin;
        s.region = cfg.regions[region_at(origin_pts[i])];
        s.lgu_income = (income_at(origin_pts[i]));
        s.enrollment_g6 = origin_flow[i] + std::llround(pool_target * pool_weight[i] / weight_sum);
        schools.push_back(std::move(s));
    }
    for (int j = 0; j < cfg.n_esc; ++j) {
        School s;
        s.school_id = make_id('E', j, we);
        s.sector = Sector::esc_destination;
        s.region = cfg.regions[region_at(esc_pts[j])];
        s.lgu_income = (income_at(esc_pts[j]));
        s.rating = esc_rating[j];
        s.tuition = esc_tuition[j];
        s.slots = slots[j];
        schools.push_back(std::move(s));
    }
    for (int p = 0; p < cfg.n_public; ++p) {
        School s;
        s.school_id = make_id('P', p, wp);
        s.sector = Sector::public_destination;
        s.region = cfg.regions[region_at(public_pts[p])];
        s.lgu_income = (income_at(public_pts[p]));
        s.is_congested = g.uniform() < cfg.congested_fraction;
        schools.push_back(std::move(s));
    }

    std::vector<FeederFlow> feeders;
    const int per_feeder = std::min(cfg.feeders_per_origin, cfg.n_public);
    std::vector<int> porder(static_cast<std::size_t>(cfg.n_public));
    std::vector<double> pdist(static_cast<std::size_t>(cfg.n_public));
    for (int i = 0; i < cfg.n_origins; ++i) {
        const Point& o = origin_pts[i];
        for (int p = 0; p < cfg.n_public; ++p) pdist[p] = std::hypot(o.x - public_pts[p].x, o.y - public_pts[p].y);
        std::iota(porder.begin(), porder.end(), 0);
        std::partial_sort(porder.begin(), porder.begin() + per_feeder, porder.end(), [&](int a, int b) {
            return pdist[a] != pdist[b] ? pdist[a] < pdist[b] : a < b;
        });
        for (int k = 0; k < per_feeder; ++k) {
            feeders.push_back({make_id('O', i, wo), make_id('P', porder[k], wp),
                               5 + static_cast<std::int64_t>(g.below(56))});
        }
    }

    Metadata meta;
    meta["generator"] = "gravflow-synthetic/1";
    meta["rng_seed"] = std::to_string(cfg.rng_seed);
    meta["detour_factor"] = csv::format_number(cfg.detour_factor);
    meta["zero_pair_fraction"] = csv::format_number(cfg.zero_pair_fraction);
    meta["reference_region"] = cfg.regions.front();
    for (const auto& [name, v] : tc) meta["true_coefficient." + name] = csv::format_number(v);

    return SystemSnapshot(std::move(schools), std::move(od), std::move(feeders), cfg.subsidy_baseline,
                          std::move(meta));
}

}  // namespace gravflow

namespace gravflow {

namespace {

template <class Fn>
void for_each_field(SyntheticConfig& c, Fn&& fn) {
    fn("n_origins", c.n_origins);
    fn("n_esc", c.n_esc);
    fn("n_public", c.n_public);
    fn("box_width_km", c.box_width_km);
    fn("box_height_km", c.box_height_km);
    fn("detour_factor", c.detour_factor);
    fn("pairs_per_origin", c.pairs_per_origin);
    fn("regions", c.regions);
    fn("true_coefficients", c.true_coefficients);
    fn("zero_pair_fraction", c.zero_pair_fraction);
    fn("subsidy_baseline", c.subsidy_baseline);
    fn("tuition_min", c.tuition_min);
    fn("tuition_max", c.tuition_max);
    fn("rating_max", c.rating_max);
    fn("lgu_cell_km", c.lgu_cell_km);
    fn("ln_income_mean", c.ln_income_mean);
    fn("ln_income_sd", c.ln_income_sd);
    fn("slot_multiplier_min", c.slot_multiplier_min);
    fn("slot_multiplier_max", c.slot_multiplier_max);
    fn("pool_to_slot_ratio", c.pool_to_slot_ratio);
    fn("congested_fraction", c.congested_fraction);
    fn("feeders_per_origin", c.feeders_per_origin);
    fn("rng_seed", c.rng_seed);
}

}  // namespace

json to_json(const SyntheticConfig& cfg) {
    json j = json::object();
    SyntheticConfig c = cfg;
    for_each_field(c, [&](const char* name, auto& v) { j[name] = v; });
    return j;
}

SyntheticConfig synthetic_config_from_json(const json& j) {
    if (!j.is_object()) throw InputError("synthetic config must be a JSON object");
    SyntheticConfig c;
    try {
        for_each_field(c, [&](const char* name, auto& v) {
            if (!j.contains(name)) return;
            if (std::string_view(name) == "true_coefficients") {
                // Partial maps override individual coefficients.
                for (const auto& [k, x] : j.at(name).items()) c.true_coefficients[k] = x.template get<double>();
                return;
            }
            v = j.at(name).template get<std::decay_t<decltype(v)>>();
        });
    } catch (const json::exception& e) {
        throw InputError(std::string("synthetic config: ") + e.what());
    }
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for_each_field(c, [&](const char* name, auto&) { known = known || k == name; });
        if (!known) throw InputError("synthetic config: unknown key '" + k + "'");
    }
    try {
        check_config(c);
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("synthetic config: ") + e.what());
    }
    return c;
}

}  // namespace gravflow
