#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qecsteer/agent.h"
#include "qecsteer/decoder.h"
#include "qecsteer/noise.h"

namespace qecsteer {

struct ModelConfig {
    uint32_t params_per_site = 1;
    double omega_lo = 0.01, omega_hi = 0.1;
    double eps_tilde_lo = 5e-4, eps_tilde_hi = 2e-3;
    double eps_max_1q = 0.75, eps_max_2q = 0.9375;
    double meas_flip_factor = 1.0;

    bool operator==(const ModelConfig&) const = default;
};

struct DriftConfig {
    std::string kind = "none";  // none | sinusoid | step | stroboscopic
    double frequency = 0.001;   // 1/epochs
    double amplitude = 1.0;
    double t0 = 0.0;
    double delta = 0.0;
    double period = 0.0;
    double duty = 0.5;
    std::vector<uint32_t> sites;  // empty = all sites drift

    DriftProfile profile() const;
    bool operator==(const DriftConfig&) const = default;
};

struct EvalConfig {
    bool enabled = false;
    uint32_t cadence = 5;  // epochs between decoded evaluations
    uint64_t shots = 20000;
    std::string decoder = "uf";  // mwpm | uf | exhaustive

    DecodeMethod method() const;
    bool operator==(const EvalConfig&) const = default;
};

struct AgentConfig {
    uint32_t batch = 50;
    double lr = 0.05;
    double clip = 0.2;
    double entropy = 0.01;
    uint32_t buffer = 4;
    double sigma_init = 0.15;
    double sigma_min = 1e-3;
    double sigma_max = 1.0;

    AgentHyperparams hyperparams() const;
    bool operator==(const AgentConfig&) const = default;
};

struct GradCheckConfig {
    uint32_t directions = 40;
    uint64_t shots = 1000000;
    double step = 0.15;        // rescaled perturbation scale per direction
    double base_offset = 0.25; // rescaled offset of the base policy from optimum

    bool operator==(const GradCheckConfig&) const = default;
};

struct ScalingConfig {
    double init_epsilon_boost = 3e-3;  // mean added error of the random initial policy

    bool operator==(const ScalingConfig&) const = default;
};

struct RecoveryConfig {
    double target_p_lo = 0.45;
    double target_p_hi = 0.50;
    double recover_tol = 1.5;  // acceptable ratio to the calibrated p_err

    bool operator==(const RecoveryConfig&) const = default;
};

struct ExperimentConfig {
    int schema = 1;
    std::string code = "surface";  // surface | repetition
    uint32_t d = 3;
    uint32_t T = 10;
    std::string basis = "Z";
    uint64_t cycles_per_candidate = 3600;  // = shots_per_candidate * T
    uint32_t epochs = 300;
    uint64_t seed = 1;
    int threads = 0;  // 0 = hardware concurrency
    std::string out = "out";
    bool calibrate = false;
    uint32_t checkpoint_every = 0;  // 0 = off

    AgentConfig agent;
    ModelConfig model;
    DriftConfig drift;
    EvalConfig eval;
    GradCheckConfig gradcheck;
    ScalingConfig scaling;
    RecoveryConfig recovery;

    uint64_t shots_per_candidate() const { return cycles_per_candidate / T; }
    int effective_threads() const;
    void validate() const;
    Circuit build_circuit() const;
    Circuit build_circuit_for(uint32_t dd, uint32_t TT) const;
    DriftSpec drift_spec() const;

    std::string to_json_text() const;
    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig load(const std::string& path);

    bool operator==(const ExperimentConfig&) const = default;
};

}  // namespace qecsteer
