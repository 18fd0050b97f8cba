#include "qecsteer/noise.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "qecsteer/rng.h"

namespace qecsteer {

double DriftProfile::optimum_at(double t) const {
    switch (kind) {
        case Kind::None:
            return 0.0;
        case Kind::Sinusoid:
            return amplitude * std::sin(6.283185307179586476925286766559 * frequency * t);
        case Kind::Step:
            return t >= t0 ? delta : 0.0;
        case Kind::Stroboscopic: {
            if (period <= 0) return 0.0;
            double phase = std::fmod(t, period);
            return phase < duty * period ? delta : 0.0;
        }
    }
    return 0.0;
}

ErrorModel sample_error_model(uint64_t seed, const Circuit& c, uint32_t params_per_site,
                              std::pair<double, double> omega_range,
                              std::pair<double, double> eps_tilde_range, const DriftSpec& drift) {
    if (omega_range.first < 0 || eps_tilde_range.first < 0)
        throw std::invalid_argument("range endpoints must be non-negative");
    if (omega_range.second < omega_range.first || eps_tilde_range.second < eps_tilde_range.first)
        throw std::invalid_argument("range lo must not exceed hi");
    if (params_per_site < 1) throw std::invalid_argument("params_per_site must be >= 1");

    ErrorModel m;
    m.params_per_site = params_per_site;
    m.sites.resize(c.sites.size());

    std::vector<uint8_t> drifting(c.sites.size(), drift.sites.empty() ? 1 : 0);
    for (uint32_t s : drift.sites) {
        if (s >= c.sites.size()) throw std::invalid_argument("drift site out of range");
        drifting[s] = 1;
    }

    for (const GateSite& site : c.sites) {
        RngStream rng(derive_seed(seed, seed_tag::kModel, site.site_id), 0);
        SiteNoise& sn = m.sites[site.site_id];
        sn.kind = site.kind;
        sn.eps_tilde = eps_tilde_range.first +
                       (eps_tilde_range.second - eps_tilde_range.first) * rng.next_double();
        sn.omega.resize(params_per_site);
        sn.drift.resize(params_per_site);
        for (uint32_t j = 0; j < params_per_site; j++) {
            sn.omega[j] = omega_range.first + (omega_range.second - omega_range.first) * rng.next_double();
            sn.drift[j] = drifting[site.site_id] ? drift.profile : DriftProfile{};
        }
        for (uint32_t j = 0; j < params_per_site; j++)
            m.params.push_back({site.site_id * params_per_site + j, site.site_id, j, 1.0});
    }
    return m;
}

PolicyVector optimal_policy(const ErrorModel& m, double t) {
    if (t < 0) throw std::invalid_argument("t must be >= 0");
    PolicyVector p(m.total_params(), 0.0);
    for (const ControlParameter& cp : m.params) {
        double phys = m.sites[cp.site_id].drift[cp.slot].optimum_at(t);
        p[cp.param_id] = phys / cp.scale;
    }
    return p;
}

double epsilon_at(const ErrorModel& m, uint32_t site_id, double t, const PolicyVector& p) {
    if (site_id >= m.sites.size()) throw std::invalid_argument("site out of range");
    if (p.size() != m.total_params()) throw std::invalid_argument("policy length mismatch");
    const SiteNoise& sn = m.sites[site_id];
    double eps = sn.eps_tilde;
    for (uint32_t j = 0; j < m.params_per_site; j++) {
        uint32_t k = m.param_index(site_id, j);
        double offset = p[k] * m.params[k].scale - sn.drift[j].optimum_at(t);
        eps += sn.omega[j] * offset * offset;
    }
    double cap = sn.kind == SiteKind::Cz ? m.eps_max_2q : m.eps_max_1q;
    return std::min(eps, cap);
}

void rebind_noise(Circuit& c, const ErrorModel& m, const PolicyVector& p, double t) {
    if (p.size() != m.total_params()) throw std::invalid_argument("policy length mismatch");
    if (m.sites.size() != c.sites.size()) throw std::invalid_argument("model/circuit site mismatch");
    std::vector<double> site_eps(c.sites.size());
    for (uint32_t s = 0; s < c.sites.size(); s++) site_eps[s] = epsilon_at(m, s, t, p);
    for (uint32_t idx : c.noise_slots) {
        Instruction& ins = c.instructions[idx];
        if (ins.site < 0) throw std::invalid_argument("noise slot without site");
        if (ins.op == Op::XFlip)
            ins.prob = std::min(1.0, m.meas_flip_factor * m.sites[ins.site].eps_tilde);
        else
            ins.prob = site_eps[ins.site];
    }
}

Circuit instantiate_noisy_circuit(const Circuit& c, const ErrorModel& m, const PolicyVector& p, double t) {
    Circuit out = c;
    rebind_noise(out, m, p, t);
    return out;
}

Circuit bind_uniform(const Circuit& c, double p1, double p2, double p_flip) {
    Circuit out = c;
    for (uint32_t idx : out.noise_slots) {
        Instruction& ins = out.instructions[idx];
        ins.prob = ins.op == Op::Depolarize1 ? p1 : ins.op == Op::Depolarize2 ? p2 : p_flip;
    }
    return out;
}

std::string dump_model_json(const ErrorModel& m) {
    nlohmann::json j;
    j["params_per_site"] = m.params_per_site;
    j["eps_max_1q"] = m.eps_max_1q;
    j["eps_max_2q"] = m.eps_max_2q;
    j["meas_flip_factor"] = m.meas_flip_factor;
    auto& sites = j["sites"] = nlohmann::json::array();
    for (uint32_t s = 0; s < m.sites.size(); s++) {
        const SiteNoise& sn = m.sites[s];
        nlohmann::json js;
        js["site_id"] = s;
        js["kind"] = sn.kind == SiteKind::Cz ? "cz" : "sq";
        js["eps_tilde"] = sn.eps_tilde;
        auto& slots = js["slots"] = nlohmann::json::array();
        for (uint32_t k = 0; k < sn.omega.size(); k++) {
            nlohmann::json jd;
            jd["omega"] = sn.omega[k];
            const DriftProfile& d = sn.drift[k];
            switch (d.kind) {
                case DriftProfile::Kind::None:
                    jd["drift"] = {{"kind", "none"}};
                    break;
                case DriftProfile::Kind::Sinusoid:
                    jd["drift"] = {{"kind", "sinusoid"}, {"frequency", d.frequency}, {"amplitude", d.amplitude}};
                    break;
                case DriftProfile::Kind::Step:
                    jd["drift"] = {{"kind", "step"}, {"t0", d.t0}, {"delta", d.delta}};
                    break;
                case DriftProfile::Kind::Stroboscopic:
                    jd["drift"] = {{"kind", "stroboscopic"}, {"period", d.period}, {"duty", d.duty}, {"delta", d.delta}};
                    break;
            }
            slots.push_back(std::move(jd));
        }
        sites.push_back(std::move(js));
    }
    auto& scales = j["scales"] = nlohmann::json::array();
    for (const ControlParameter& cp : m.params) scales.push_back(cp.scale);
    return j.dump(2);
}

}  // namespace qecsteer
