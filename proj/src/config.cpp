#include "qecsteer/config.h"

#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "qecsteer/util.h"

namespace qecsteer {

using nlohmann::json;

DriftProfile DriftConfig::profile() const {
    DriftProfile p;
    if (kind == "none") {
        p.kind = DriftProfile::Kind::None;
    } else if (kind == "sinusoid") {
        p.kind = DriftProfile::Kind::Sinusoid;
        p.frequency = frequency;
        p.amplitude = amplitude;
    } else if (kind == "step") {
        p.kind = DriftProfile::Kind::Step;
        p.t0 = t0;
        p.delta = delta;
    } else if (kind == "stroboscopic") {
        p.kind = DriftProfile::Kind::Stroboscopic;
        p.period = period;
        p.duty = duty;
        p.delta = delta;
    } else {
        throw std::invalid_argument("unknown drift kind '" + kind + "'");
    }
    return p;
}

DecodeMethod EvalConfig::method() const {
    if (decoder == "mwpm") return DecodeMethod::Mwpm;
    if (decoder == "uf") return DecodeMethod::UnionFind;
    if (decoder == "exhaustive") return DecodeMethod::Exhaustive;
    throw std::invalid_argument("unknown decoder '" + decoder + "'");
}

AgentHyperparams AgentConfig::hyperparams() const {
    AgentHyperparams hp;
    hp.batch = batch;
    hp.lr = lr;
    hp.clip = clip;
    hp.entropy_coeff = entropy;
    hp.buffer = buffer;
    hp.sigma_init = sigma_init;
    hp.sigma_min = sigma_min;
    hp.sigma_max = sigma_max;
    return hp;
}

int ExperimentConfig::effective_threads() const {
    if (threads > 0) return threads;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

void ExperimentConfig::validate() const {
    if (schema != 1) throw std::invalid_argument("unsupported config schema");
    if (code != "surface" && code != "repetition") throw std::invalid_argument("code must be surface or repetition");
    if (basis != "X" && basis != "Z") throw std::invalid_argument("basis must be X or Z");
    if (d < 3 || d % 2 == 0) throw std::invalid_argument("d must be odd and >= 3");
    if (T < 1) throw std::invalid_argument("T must be >= 1");
    if (cycles_per_candidate % T != 0)
        throw std::invalid_argument("cycles_per_candidate must be a multiple of T");
    if (cycles_per_candidate / T < 1) throw std::invalid_argument("cycles_per_candidate too small");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    agent.hyperparams().validate();
    if (model.omega_lo < 0 || model.eps_tilde_lo < 0 || model.omega_hi < model.omega_lo ||
        model.eps_tilde_hi < model.eps_tilde_lo)
        throw std::invalid_argument("bad model ranges");
    drift.profile();   // validates kind
    eval.method();     // validates decoder name
    if (eval.enabled && eval.cadence == 0) throw std::invalid_argument("eval cadence must be >= 1");
}

Circuit ExperimentConfig::build_circuit_for(uint32_t dd, uint32_t TT) const {
    Basis b = basis == "X" ? Basis::X : Basis::Z;
    return code == "surface" ? build_surface_code_memory(dd, TT, b) : build_repetition_code_memory(dd, TT);
}

Circuit ExperimentConfig::build_circuit() const { return build_circuit_for(d, T); }

DriftSpec ExperimentConfig::drift_spec() const {
    DriftSpec spec;
    spec.profile = drift.profile();
    spec.sites = drift.sites;
    return spec;
}

namespace {

json drift_to_json(const DriftConfig& dc) {
    json j;
    j["kind"] = dc.kind;
    j["frequency"] = dc.frequency;
    j["amplitude"] = dc.amplitude;
    j["t0"] = dc.t0;
    j["delta"] = dc.delta;
    j["period"] = dc.period;
    j["duty"] = dc.duty;
    j["sites"] = dc.sites;
    return j;
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string ExperimentConfig::to_json_text() const {
    json j;
    j["schema"] = schema;
    j["code"] = code;
    j["d"] = d;
    j["T"] = T;
    j["basis"] = basis;
    j["cycles_per_candidate"] = cycles_per_candidate;
    j["epochs"] = epochs;
    j["seed"] = seed;
    j["threads"] = threads;
    j["out"] = out;
    j["calibrate"] = calibrate;
    j["checkpoint_every"] = checkpoint_every;
    j["agent"] = {{"batch", agent.batch},         {"lr", agent.lr},
                  {"clip", agent.clip},           {"entropy", agent.entropy},
                  {"buffer", agent.buffer},       {"sigma_init", agent.sigma_init},
                  {"sigma_min", agent.sigma_min}, {"sigma_max", agent.sigma_max}};
    j["model"] = {{"params_per_site", model.params_per_site},
                  {"omega_range", {model.omega_lo, model.omega_hi}},
                  {"eps_tilde_range", {model.eps_tilde_lo, model.eps_tilde_hi}},
                  {"eps_max_1q", model.eps_max_1q},
                  {"eps_max_2q", model.eps_max_2q},
                  {"meas_flip_factor", model.meas_flip_factor}};
    j["drift"] = drift_to_json(drift);
    j["eval"] = {{"enabled", eval.enabled},
                 {"cadence", eval.cadence},
                 {"shots", eval.shots},
                 {"decoder", eval.decoder}};
    j["gradcheck"] = {{"directions", gradcheck.directions},
                      {"shots", gradcheck.shots},
                      {"step", gradcheck.step},
                      {"base_offset", gradcheck.base_offset}};
    j["scaling"] = {{"init_epsilon_boost", scaling.init_epsilon_boost}};
    j["recovery"] = {{"target_p_lo", recovery.target_p_lo},
                     {"target_p_hi", recovery.target_p_hi},
                     {"recover_tol", recovery.recover_tol}};
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j = json::parse(text);
    ExperimentConfig c;
    get_if(j, "schema", c.schema);
    get_if(j, "code", c.code);
    get_if(j, "d", c.d);
    get_if(j, "T", c.T);
    get_if(j, "basis", c.basis);
    get_if(j, "cycles_per_candidate", c.cycles_per_candidate);
    get_if(j, "epochs", c.epochs);
    get_if(j, "seed", c.seed);
    get_if(j, "threads", c.threads);
    get_if(j, "out", c.out);
    get_if(j, "calibrate", c.calibrate);
    get_if(j, "checkpoint_every", c.checkpoint_every);
    if (j.contains("agent")) {
        const json& a = j["agent"];
        get_if(a, "batch", c.agent.batch);
        get_if(a, "lr", c.agent.lr);
        get_if(a, "clip", c.agent.clip);
        get_if(a, "entropy", c.agent.entropy);
        get_if(a, "buffer", c.agent.buffer);
        get_if(a, "sigma_init", c.agent.sigma_init);
        get_if(a, "sigma_min", c.agent.sigma_min);
        get_if(a, "sigma_max", c.agent.sigma_max);
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        get_if(m, "params_per_site", c.model.params_per_site);
        if (m.contains("omega_range")) {
            c.model.omega_lo = m["omega_range"][0];
            c.model.omega_hi = m["omega_range"][1];
        }
        if (m.contains("eps_tilde_range")) {
            c.model.eps_tilde_lo = m["eps_tilde_range"][0];
            c.model.eps_tilde_hi = m["eps_tilde_range"][1];
        }
        get_if(m, "eps_max_1q", c.model.eps_max_1q);
        get_if(m, "eps_max_2q", c.model.eps_max_2q);
        get_if(m, "meas_flip_factor", c.model.meas_flip_factor);
    }
    if (j.contains("drift")) {
        const json& dd = j["drift"];
        get_if(dd, "kind", c.drift.kind);
        get_if(dd, "frequency", c.drift.frequency);
        get_if(dd, "amplitude", c.drift.amplitude);
        get_if(dd, "t0", c.drift.t0);
        get_if(dd, "delta", c.drift.delta);
        get_if(dd, "period", c.drift.period);
        get_if(dd, "duty", c.drift.duty);
        get_if(dd, "sites", c.drift.sites);
    }
    if (j.contains("eval")) {
        const json& e = j["eval"];
        get_if(e, "enabled", c.eval.enabled);
        get_if(e, "cadence", c.eval.cadence);
        get_if(e, "shots", c.eval.shots);
        get_if(e, "decoder", c.eval.decoder);
    }
    if (j.contains("gradcheck")) {
        const json& g = j["gradcheck"];
        get_if(g, "directions", c.gradcheck.directions);
        get_if(g, "shots", c.gradcheck.shots);
        get_if(g, "step", c.gradcheck.step);
        get_if(g, "base_offset", c.gradcheck.base_offset);
    }
    if (j.contains("scaling")) get_if(j["scaling"], "init_epsilon_boost", c.scaling.init_epsilon_boost);
    if (j.contains("recovery")) {
        const json& r = j["recovery"];
        get_if(r, "target_p_lo", c.recovery.target_p_lo);
        get_if(r, "target_p_hi", c.recovery.target_p_hi);
        get_if(r, "recover_tol", c.recovery.recover_tol);
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    return from_json_text(read_text_file(path));
}

}  // namespace qecsteer
