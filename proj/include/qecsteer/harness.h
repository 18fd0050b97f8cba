#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qecsteer/agent.h"
#include "qecsteer/config.h"
#include "qecsteer/decoder.h"
#include "qecsteer/detgraph.h"
#include "qecsteer/psd.h"

namespace qecsteer {

// Decoded evaluation of the learned policy at one epoch.
struct EvalPoint {
    uint64_t epoch = 0;
    double p_err = 0;
    double eps_l = 0;
    double dr_q25 = 0, dr_q50 = 0, dr_q75 = 0;  // quartiles across detectors
    double phys_err = 0;  // average error probability of the policy's decoding prior
};

// Per-epoch traces of the four evaluation scenarios: (i) fixed, (ii)
// optimal, (iii) stochastic, (iv) learned. All four share the epoch axis,
// the drift realization and the cycle budget.
struct ScenarioTrace {
    std::vector<double> dr_fixed, dr_optimal, dr_stochastic, dr_learned;
    std::vector<uint64_t> n_fixed, n_optimal, n_stochastic, n_learned;  // cumulative event counts
    std::vector<double> entropy, mu_norm, sigma_mean, drift_t;
    std::vector<EvalPoint> evals;
    uint64_t training_cycles = 0;
    uint64_t evaluation_cycles = 0;
    uint32_t num_detectors = 0;
};

// Resumable training state; serializes losslessly to JSON.
struct TrainState {
    PolicyDistribution policy;
    ReplayBuffer buffer;
    ScenarioTrace trace;
    uint64_t next_epoch = 0;

    std::string to_json_text() const;
    static TrainState from_json_text(const std::string& text);
};

struct SteeringAdvantage {
    double r_stochastic = 0;
    double r_learned = 0;
    bool defined = false;  // false when N_(ii) == N_(i)
};

ScenarioTrace run_steering(const ExperimentConfig& cfg);
// Continues from *state (fresh when state->next_epoch == 0) up to cfg.epochs.
ScenarioTrace run_steering_resumable(const ExperimentConfig& cfg, TrainState& state);

// r = (N_x - N_(i)) / (N_(ii) - N_(i)) with x = stochastic or learned,
// over whole-run cumulative event counts.
SteeringAdvantage steering_advantage(const ScenarioTrace& trace);

struct PhasePoint {
    double frequency = 0;
    double entropy_coeff = 0;
    double r_stochastic = 0;
    double r_learned = 0;
    bool defined = false;
    bool failed = false;
    std::string error;
};

std::vector<PhasePoint> run_phase_diagram(const ExperimentConfig& cfg, const std::vector<double>& freqs,
                                          const std::vector<double>& entropy_coeffs);

struct GammaFit {
    double gamma_fd = 0;        // regression of dLambda/dt / Lambda* on (1 - Lambda/Lambda*)
    double gamma_fd_stderr = 0;
    double gamma_exp = 0;       // slope of log((Lambda*-Lambda)/Lambda*) vs t
    double gamma_exp_stderr = 0;
    double ci_lo = 0, ci_hi = 0;  // 95% interval on gamma_exp
    double r_squared = 0;
    bool flagged = false;  // no decaying signal or non-positive rate
};

// lambda trace indexed by times; a moving average of smooth_window points
// is applied first and the fit window ends where the normalized distance
// to Lambda* falls below 0.05.
GammaFit fit_gamma(const std::vector<double>& times, const std::vector<double>& lambdas,
                   double lambda_star, int smooth_window = 3);

struct ScalingRun {
    uint32_t d = 0, P = 0;
    std::vector<uint64_t> epochs;
    std::vector<double> eps_l;
    std::vector<double> lambda;
    std::vector<double> phys_err;  // average physical error rate per evaluation
    double floor_eps_l = 0;
    GammaFit gamma;
    uint64_t p_tot = 0;
};

struct ScalingResult {
    std::vector<ScalingRun> runs;
    double lambda_star = 0;
};

ScalingResult run_scaling(const ExperimentConfig& cfg, const std::vector<uint32_t>& d_list,
                          const std::vector<uint32_t>& P_list);

struct GradCheckResult {
    std::vector<double> dlog_c;      // per direction
    std::vector<double> dlog_eps_l;
    double slope = 0;
    double slope_stderr = 0;
    double expected_slope = 0;  // (d+1)/2
};

GradCheckResult run_gradient_relation_check(const ExperimentConfig& cfg);

struct RecoveryResult {
    std::vector<EvalPoint> evals;
    double reference_p_err = 0;
    double reference_dr_median = 0;
    double spoil_scale = 0;      // 0 for fine-tune runs
    double initial_p_err = 0;
    double final_p_err = 0;      // median of the last evaluations
    double final_p_ratio = 0;    // final_p_err / reference_p_err
    uint64_t epochs_to_dr_recovery = 0;  // first eval with median DR within 10% of reference
    bool dr_recovered = false;
    bool recovered = false;      // final_p_ratio within the configured tolerance
};

RecoveryResult run_randomized_recovery(const ExperimentConfig& cfg);
RecoveryResult run_finetune(const ExperimentConfig& cfg);

// P_tot = (2d^2 - 1) P + (4d^2 - 4d) P
uint64_t total_parameter_count(uint32_t d, uint32_t P);

// ---- output emission ----
std::string trace_to_jsonl(const ScenarioTrace& trace);
std::string phase_to_csv(const std::vector<PhasePoint>& points);
std::string scaling_to_csv(const ScalingResult& result);
std::string psd_to_csv(const PsdResult& psd);

}  // namespace qecsteer
