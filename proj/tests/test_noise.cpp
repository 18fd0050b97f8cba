#include "doctest.h"

#include <cmath>

#include "qecsteer/circuit.h"
#include "qecsteer/noise.h"
#include "qecsteer/simulator.h"

using namespace qecsteer;

namespace {

ErrorModel sample_default(const Circuit& c, uint64_t seed, const DriftSpec& drift = {},
                          uint32_t P = 1) {
    return sample_error_model(seed, c, P, {0.01, 0.1}, {5e-4, 2e-3}, drift);
}

}  // namespace

TEST_CASE("quadratic rate arithmetic") {
    Circuit c = build_repetition_code_memory(3, 1);
    ErrorModel m = sample_default(c, 1);
    m.sites[0].eps_tilde = 1e-3;
    m.sites[0].omega = {0.04};
    m.sites[0].drift = {DriftProfile{}};
    PolicyVector p(m.total_params(), 0.0);
    p[0] = 0.1;
    CHECK(epsilon_at(m, 0, 0.0, p) == doctest::Approx(1.4e-3).epsilon(1e-12));

    // at the optimum the rate is the irreducible floor
    PolicyVector opt = optimal_policy(m, 3.0);
    for (uint32_t s = 0; s < c.sites.size(); s++)
        CHECK(epsilon_at(m, s, 3.0, opt) == doctest::Approx(m.sites[s].eps_tilde));

    // the clamp engages exactly
    p[0] = 1e6;
    CHECK(epsilon_at(m, 0, 0.0, p) == 0.75);
    uint32_t cz_site = c.num_sq_sites();
    PolicyVector big(m.total_params(), 1e6);
    CHECK(epsilon_at(m, cz_site, 0.0, big) == 0.9375);
}

TEST_CASE("zero sensitivity makes the rate policy-independent") {
    Circuit c = build_repetition_code_memory(3, 1);
    ErrorModel m = sample_error_model(3, c, 1, {0.0, 0.0}, {5e-4, 2e-3}, {});
    PolicyVector p(m.total_params(), 17.0);
    for (uint32_t s = 0; s < c.sites.size(); s++)
        CHECK(epsilon_at(m, s, 0.0, p) == doctest::Approx(m.sites[s].eps_tilde));
}

TEST_CASE("model sampling is deterministic and validates ranges") {
    Circuit c = build_surface_code_memory(3, 1);
    ErrorModel a = sample_default(c, 42), b = sample_default(c, 42);
    for (size_t s = 0; s < a.sites.size(); s++) {
        CHECK(a.sites[s].eps_tilde == b.sites[s].eps_tilde);
        CHECK(a.sites[s].omega == b.sites[s].omega);
    }
    CHECK_THROWS(sample_error_model(1, c, 1, {-0.1, 0.1}, {0, 1e-3}, {}));
    CHECK_THROWS(sample_error_model(1, c, 1, {0.2, 0.1}, {0, 1e-3}, {}));
}

TEST_CASE("drift profiles") {
    DriftProfile sine{DriftProfile::Kind::Sinusoid, 1.0 / 1000, 0.7, 0, 0, 0, 0};
    CHECK(sine.optimum_at(0) == doctest::Approx(0.0));
    CHECK(sine.optimum_at(250) == doctest::Approx(0.7));
    CHECK(sine.optimum_at(123.0 + 1000.0) == doctest::Approx(sine.optimum_at(123.0)).epsilon(1e-9));

    DriftProfile step{DriftProfile::Kind::Step, 0, 0, 100, 0.3, 0, 0};
    CHECK(step.optimum_at(99) == 0.0);
    CHECK(step.optimum_at(100) == 0.3);

    DriftProfile strobe{DriftProfile::Kind::Stroboscopic, 0, 0, 0, 0.4, 50, 0.5};
    CHECK(strobe.optimum_at(10) == 0.4);
    CHECK(strobe.optimum_at(30) == 0.0);

    Circuit c = build_repetition_code_memory(3, 1);
    DriftSpec none;
    ErrorModel m = sample_default(c, 5, none);
    PolicyVector opt = optimal_policy(m, 12345.0);
    for (double v : opt) CHECK(v == 0.0);
    CHECK_THROWS(optimal_policy(m, -1.0));
}

TEST_CASE("localized drift injection") {
    Circuit c = build_repetition_code_memory(3, 1);
    DriftSpec spec;
    spec.profile = DriftProfile{DriftProfile::Kind::Step, 0, 0, 0.0, 1.0, 0, 0};
    spec.sites = {2, 4};
    ErrorModel m = sample_default(c, 5, spec);
    PolicyVector opt = optimal_policy(m, 10.0);
    for (const ControlParameter& cp : m.params) {
        bool drifting = cp.site_id == 2 || cp.site_id == 4;
        CHECK(opt[cp.param_id] == (drifting ? 1.0 : 0.0));
    }
}

TEST_CASE("monotone growth away from the optimum") {
    Circuit c = build_repetition_code_memory(3, 1);
    ErrorModel m = sample_default(c, 9, {}, 2);
    PolicyVector p(m.total_params(), 0.05);
    for (uint32_t k = 0; k < m.total_params(); k += 3) {
        PolicyVector larger = p;
        larger[k] = 0.4;
        for (uint32_t s = 0; s < c.sites.size(); s++)
            CHECK(epsilon_at(m, s, 0.0, larger) >= epsilon_at(m, s, 0.0, p) - 1e-15);
    }
}

TEST_CASE("rescaling consistency") {
    Circuit c = build_repetition_code_memory(3, 1);
    ErrorModel m = sample_default(c, 13);
    PolicyVector p(m.total_params());
    for (size_t k = 0; k < p.size(); k++) p[k] = 0.1 * (static_cast<double>(k) + 1);
    std::vector<double> before(c.sites.size());
    for (uint32_t s = 0; s < c.sites.size(); s++) before[s] = epsilon_at(m, s, 0.0, p);

    const double cfac = 3.7;
    for (ControlParameter& cp : m.params) cp.scale *= cfac;
    for (double& v : p) v /= cfac;
    for (uint32_t s = 0; s < c.sites.size(); s++)
        CHECK(epsilon_at(m, s, 0.0, p) == doctest::Approx(before[s]).epsilon(1e-12));
}

TEST_CASE("instantiation binds slot probabilities") {
    Circuit c = build_repetition_code_memory(3, 2);
    ErrorModel m = sample_error_model(3, c, 1, {0.0, 0.0}, {1e-3, 1e-3}, {});
    PolicyVector p(m.total_params(), 9.0);
    Circuit bound = instantiate_noisy_circuit(c, m, p, 0.0);
    CHECK(bound.all_noise_bound());
    for (uint32_t idx : bound.noise_slots) CHECK(bound.instructions[idx].prob == doctest::Approx(1e-3));
    CHECK_THROWS(instantiate_noisy_circuit(c, m, PolicyVector(3, 0.0), 0.0));

    // p at the drift optimum is indistinguishable from a zero-sensitivity model
    ErrorModel live = sample_default(c, 21);
    ErrorModel dead = live;
    for (SiteNoise& sn : dead.sites)
        for (double& w : sn.omega) w = 0.0;
    Circuit b1 = instantiate_noisy_circuit(c, live, optimal_policy(live, 4.0), 4.0);
    Circuit b2 = instantiate_noisy_circuit(c, dead, PolicyVector(live.total_params(), 0.0), 4.0);
    DetectionRecord r1 = sample(b1, 2048, 77);
    DetectionRecord r2 = sample(b2, 2048, 77);
    CHECK(r1.events == r2.events);
}

TEST_CASE("model json dump is well-formed") {
    Circuit c = build_repetition_code_memory(3, 1);
    ErrorModel m = sample_default(c, 2);
    std::string text = dump_model_json(m);
    CHECK(text.find("\"sites\"") != std::string::npos);
    CHECK(text.find("\"scales\"") != std::string::npos);
}
