#include "qecsteer/detgraph.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "qecsteer/rng.h"
#include "qecsteer/simulator.h"
#include "qecsteer/util.h"

namespace qecsteer {

std::vector<DetectorClass> fold_detectors(const Circuit& c) {
    const int T = static_cast<int>(c.num_cycles);
    std::map<std::pair<uint32_t, int>, std::vector<uint32_t>> buckets;  // (space, phase rank)
    for (const Detector& det : c.detectors) {
        int phase_rank = det.time_coord == 0 ? 0 : det.time_coord == T ? 2 : 1;
        buckets[{det.space_coord, phase_rank}].push_back(det.det_id);
    }
    std::vector<DetectorClass> classes;
    for (auto& [key, members] : buckets) {
        DetectorClass dc;
        dc.class_id = static_cast<uint32_t>(classes.size());
        dc.members = std::move(members);
        dc.space_coord = key.first;
        dc.phase = key.second == 0 ? Phase::First : key.second == 1 ? Phase::Bulk : Phase::Final;
        classes.push_back(std::move(dc));
    }
    return classes;
}

double FactorGraph::mean_params_per_class() const {
    if (classes.empty()) return 0;
    double s = 0;
    for (const auto& p : class_params) s += static_cast<double>(p.size());
    return s / static_cast<double>(classes.size());
}

double FactorGraph::mean_classes_per_param() const {
    if (num_params == 0) return 0;
    double s = 0;
    for (const auto& cl : param_classes) s += static_cast<double>(cl.size());
    return s / static_cast<double>(num_params);
}

FactorGraph build_factor_graph(const Circuit& c, const DetectingRegionMap& regions,
                               const std::vector<ControlParameter>& params) {
    FactorGraph g;
    g.classes = fold_detectors(c);
    g.num_params = static_cast<uint32_t>(params.size());
    g.class_params.resize(g.classes.size());
    g.param_classes.resize(g.num_params);

    // site -> param ids
    std::vector<std::vector<uint32_t>> site_params(c.sites.size());
    for (const ControlParameter& p : params) site_params[p.site_id].push_back(p.param_id);

    for (const DetectorClass& dc : g.classes) {
        std::vector<uint32_t> sites;
        for (uint32_t det : dc.members) {
            const auto& sr = regions.site_regions[det];
            sites.insert(sites.end(), sr.begin(), sr.end());
        }
        std::sort(sites.begin(), sites.end());
        sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
        auto& cp = g.class_params[dc.class_id];
        for (uint32_t s : sites)
            for (uint32_t p : site_params[s]) cp.push_back(p);
        std::sort(cp.begin(), cp.end());
        for (uint32_t p : cp) g.param_classes[p].push_back(dc.class_id);
    }
    return g;
}

std::vector<std::vector<uint32_t>> default_type_groups(const Circuit& c, const ErrorModel& m) {
    // slot j of all Sq sites, then slot j of all Cz sites
    std::vector<std::vector<uint32_t>> groups(2 * m.params_per_site);
    for (const ControlParameter& p : m.params) {
        bool is_cz = c.sites[p.site_id].kind == SiteKind::Cz;
        groups[(is_cz ? m.params_per_site : 0) + p.slot].push_back(p.param_id);
    }
    groups.erase(std::remove_if(groups.begin(), groups.end(),
                                [](const auto& g) { return g.empty(); }),
                 groups.end());
    return groups;
}

std::vector<std::string> default_type_group_names(const Circuit& c, const ErrorModel& m) {
    std::vector<std::string> names;
    auto groups = default_type_groups(c, m);
    for (const auto& g : groups) {
        const ControlParameter& p = m.params[g.front()];
        bool is_cz = c.sites[p.site_id].kind == SiteKind::Cz;
        names.push_back((is_cz ? std::string("cz/") : std::string("sq/")) + std::to_string(p.slot));
    }
    return names;
}

std::vector<SensitivityScale> calibrate_sensitivities(const Circuit& c, const ErrorModel& m,
                                                      const PolicyVector& base,
                                                      const std::vector<std::vector<uint32_t>>& groups,
                                                      const CalibrationOptions& opt, uint64_t seed) {
    if (opt.sigma_grid.size() < 3) throw std::invalid_argument("sigma grid needs >= 3 points");
    if (base.size() != m.total_params()) throw std::invalid_argument("base policy length mismatch");
    auto names = default_type_group_names(c, m);

    std::vector<SensitivityScale> out(groups.size());
    for (size_t gi = 0; gi < groups.size(); gi++) {
        SensitivityScale& sc = out[gi];
        sc.group = gi < names.size() ? names[gi] : "group" + std::to_string(gi);
        sc.params = groups[gi];
        std::vector<double> xs, ys;  // sigma^2 -> mean DR
        struct Point {
            double sigma;
            double dr;
        };
        std::vector<Point> pts(opt.sigma_grid.size() * static_cast<size_t>(opt.draws_per_point));
        parallel_for(pts.size(), opt.threads, [&](uint64_t i0, uint64_t i1) {
            for (uint64_t i = i0; i < i1; i++) {
                size_t si = i / opt.draws_per_point;
                size_t rep = i % opt.draws_per_point;
                double sigma = opt.sigma_grid[si];
                PolicyVector p = base;
                RngStream rng(derive_seed(seed, seed_tag::kCalib, gi, i), 0);
                for (uint32_t k : groups[gi])
                    p[k] += sigma * rng.next_gaussian() / m.params[k].scale;
                Circuit bound = instantiate_noisy_circuit(c, m, p, 0.0);
                // shots share seeds across the sigma grid (common random
                // numbers), so an insensitive group fits slope exactly zero
                auto rec = sample(bound, opt.shots, derive_seed(seed, seed_tag::kCalib, 2000 + gi, rep));
                pts[i] = {sigma, mean_detection_rate(rec)};
            }
        });
        for (const Point& pt : pts) {
            xs.push_back(pt.sigma * pt.sigma);
            ys.push_back(pt.dr);
        }
        LinearFit fit = fit_linear(xs, ys);
        sc.dr0 = fit.intercept;
        sc.residual = 1.0 - fit.r_squared;
        if (fit.slope <= 0) {
            sc.flagged = true;
            sc.sigma0 = std::numeric_limits<double>::infinity();
        } else {
            sc.sigma0 = 1.0 / std::sqrt(fit.slope);
        }
    }
    return out;
}

void apply_scales(ErrorModel& m, const std::vector<SensitivityScale>& scales) {
    for (const SensitivityScale& sc : scales) {
        if (sc.flagged) continue;
        for (uint32_t k : sc.params) m.params[k].scale = sc.sigma0;
    }
}

std::string dump_graph_json(const FactorGraph& g) {
    nlohmann::json j;
    auto& classes = j["classes"] = nlohmann::json::array();
    for (const DetectorClass& dc : g.classes) {
        nlohmann::json jc;
        jc["id"] = dc.class_id;
        jc["space"] = dc.space_coord;
        jc["phase"] = dc.phase == Phase::First ? "first" : dc.phase == Phase::Bulk ? "bulk" : "final";
        jc["dets"] = dc.members;
        classes.push_back(std::move(jc));
    }
    auto& edges = j["edges"] = nlohmann::json::array();
    for (const DetectorClass& dc : g.classes)
        for (uint32_t p : g.class_params[dc.class_id]) edges.push_back({dc.class_id, p});
    j["degrees"] = {{"mean_params_per_class", g.mean_params_per_class()},
                    {"mean_classes_per_param", g.mean_classes_per_param()},
                    {"num_classes", g.classes.size()},
                    {"num_params", g.num_params}};
    return j.dump(2);
}

}  // namespace qecsteer
