#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qecsteer/circuit.h"

namespace qecsteer {

// Control parameters live in rescaled units; the physical offset applied
// to the error model is value * scale.
using PolicyVector = std::vector<double>;

struct ControlParameter {
    uint32_t param_id;
    uint32_t site_id;
    uint32_t slot;
    double scale = 1.0;  // sigma_0 sensitivity unit
};

struct DriftProfile {
    enum class Kind : uint8_t { None, Sinusoid, Step, Stroboscopic };
    Kind kind = Kind::None;
    double frequency = 0;  // 1/epochs
    double amplitude = 0;
    double t0 = 0;
    double delta = 0;
    double period = 0;
    double duty = 0;  // fraction of the period spent at delta

    double optimum_at(double t) const;
};

struct SiteNoise {
    SiteKind kind;
    double eps_tilde = 0;
    std::vector<double> omega;         // per slot
    std::vector<DriftProfile> drift;   // per slot
};

struct ErrorModel {
    std::vector<SiteNoise> sites;          // indexed by site_id
    std::vector<ControlParameter> params;  // dense ids, site-major slot-minor
    uint32_t params_per_site = 1;
    double eps_max_1q = 0.75;
    double eps_max_2q = 0.9375;
    // Measurement/reset X_FLIP probability = meas_flip_factor * eps_tilde
    // of the owning site; the quadratic policy term applies to the
    // depolarization channels only.
    double meas_flip_factor = 1.0;

    uint32_t total_params() const { return static_cast<uint32_t>(params.size()); }
    // param_id for (site, slot)
    uint32_t param_index(uint32_t site_id, uint32_t slot) const { return site_id * params_per_site + slot; }
};

struct DriftSpec {
    DriftProfile profile;                 // applied to every slot of the drifting sites
    std::vector<uint32_t> sites;          // empty = all sites drift
};

// Omega ~ U(omega_range), eps_tilde ~ U(eps_range), reproducible from seed.
ErrorModel sample_error_model(uint64_t seed, const Circuit& c, uint32_t params_per_site,
                              std::pair<double, double> omega_range,
                              std::pair<double, double> eps_tilde_range, const DriftSpec& drift);

// Componentwise drift optimum at epoch t, in rescaled units.
PolicyVector optimal_policy(const ErrorModel& m, double t);

// eps = min(eps_max, eps_tilde + sum_j omega_j (p_j*scale_j - p_opt_j(t))^2)
double epsilon_at(const ErrorModel& m, uint32_t site_id, double t, const PolicyVector& p);

// Binds every noise slot of `c` to its site's rate under policy p at time t.
Circuit instantiate_noisy_circuit(const Circuit& c, const ErrorModel& m, const PolicyVector& p, double t);

// In-place variant for hot loops; c must share the source circuit's layout.
void rebind_noise(Circuit& c, const ErrorModel& m, const PolicyVector& p, double t);

// Debug helper: bind uniform probabilities irrespective of any model.
Circuit bind_uniform(const Circuit& c, double p1, double p2, double p_flip);

std::string dump_model_json(const ErrorModel& m);

}  // namespace qecsteer
