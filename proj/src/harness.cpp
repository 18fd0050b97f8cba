#include "qecsteer/harness.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "qecsteer/rng.h"
#include "qecsteer/simulator.h"
#include "qecsteer/util.h"

namespace qecsteer {

using nlohmann::json;

uint64_t total_parameter_count(uint32_t d, uint32_t P) {
    uint64_t dd = d;
    return (2 * dd * dd - 1) * P + (4 * dd * dd - 4 * dd) * P;
}

// ---- train state serialization --------------------------------------------

namespace {

json trace_to_json(const ScenarioTrace& t) {
    json j;
    j["dr_fixed"] = t.dr_fixed;
    j["dr_optimal"] = t.dr_optimal;
    j["dr_stochastic"] = t.dr_stochastic;
    j["dr_learned"] = t.dr_learned;
    j["n_fixed"] = t.n_fixed;
    j["n_optimal"] = t.n_optimal;
    j["n_stochastic"] = t.n_stochastic;
    j["n_learned"] = t.n_learned;
    j["entropy"] = t.entropy;
    j["mu_norm"] = t.mu_norm;
    j["sigma_mean"] = t.sigma_mean;
    j["drift_t"] = t.drift_t;
    j["training_cycles"] = t.training_cycles;
    j["evaluation_cycles"] = t.evaluation_cycles;
    j["num_detectors"] = t.num_detectors;
    auto& evals = j["evals"] = json::array();
    for (const EvalPoint& e : t.evals)
        evals.push_back({{"epoch", e.epoch},
                         {"p_err", e.p_err},
                         {"eps_l", e.eps_l},
                         {"dr_q25", e.dr_q25},
                         {"dr_q50", e.dr_q50},
                         {"dr_q75", e.dr_q75},
                         {"phys_err", e.phys_err}});
    return j;
}

ScenarioTrace trace_from_json(const json& j) {
    ScenarioTrace t;
    t.dr_fixed = j.at("dr_fixed").get<std::vector<double>>();
    t.dr_optimal = j.at("dr_optimal").get<std::vector<double>>();
    t.dr_stochastic = j.at("dr_stochastic").get<std::vector<double>>();
    t.dr_learned = j.at("dr_learned").get<std::vector<double>>();
    t.n_fixed = j.at("n_fixed").get<std::vector<uint64_t>>();
    t.n_optimal = j.at("n_optimal").get<std::vector<uint64_t>>();
    t.n_stochastic = j.at("n_stochastic").get<std::vector<uint64_t>>();
    t.n_learned = j.at("n_learned").get<std::vector<uint64_t>>();
    t.entropy = j.at("entropy").get<std::vector<double>>();
    t.mu_norm = j.at("mu_norm").get<std::vector<double>>();
    t.sigma_mean = j.at("sigma_mean").get<std::vector<double>>();
    t.drift_t = j.at("drift_t").get<std::vector<double>>();
    t.training_cycles = j.at("training_cycles").get<uint64_t>();
    t.evaluation_cycles = j.at("evaluation_cycles").get<uint64_t>();
    t.num_detectors = j.at("num_detectors").get<uint32_t>();
    for (const json& je : j.at("evals"))
        t.evals.push_back({je.at("epoch").get<uint64_t>(), je.at("p_err").get<double>(),
                           je.at("eps_l").get<double>(), je.at("dr_q25").get<double>(),
                           je.at("dr_q50").get<double>(), je.at("dr_q75").get<double>(),
                           je.at("phys_err").get<double>()});
    return t;
}

}  // namespace

std::string TrainState::to_json_text() const {
    json j;
    j["next_epoch"] = next_epoch;
    j["policy"] = {{"mu", policy.mu}, {"log_sigma", policy.log_sigma}, {"epoch", policy.epoch}};
    json jb;
    jb["capacity"] = buffer.capacity;
    auto& batches = jb["batches"] = json::array();
    for (const CandidateBatch& cb : buffer.batches) {
        json jcb;
        jcb["epoch"] = cb.epoch;
        jcb["mu_s"] = cb.mu_s;
        jcb["sigma_s"] = cb.sigma_s;
        jcb["thetas"] = cb.thetas;
        jcb["rewards"] = cb.rewards;
        batches.push_back(std::move(jcb));
    }
    j["buffer"] = std::move(jb);
    j["trace"] = trace_to_json(trace);
    return j.dump();
}

TrainState TrainState::from_json_text(const std::string& text) {
    json j = json::parse(text);
    TrainState st;
    st.next_epoch = j.at("next_epoch").get<uint64_t>();
    st.policy.mu = j.at("policy").at("mu").get<std::vector<double>>();
    st.policy.log_sigma = j.at("policy").at("log_sigma").get<std::vector<double>>();
    st.policy.epoch = j.at("policy").at("epoch").get<uint64_t>();
    st.buffer.capacity = j.at("buffer").at("capacity").get<uint32_t>();
    for (const json& jcb : j.at("buffer").at("batches")) {
        CandidateBatch cb;
        cb.epoch = jcb.at("epoch").get<uint64_t>();
        cb.mu_s = jcb.at("mu_s").get<std::vector<double>>();
        cb.sigma_s = jcb.at("sigma_s").get<std::vector<double>>();
        cb.thetas = jcb.at("thetas").get<std::vector<PolicyVector>>();
        cb.rewards = jcb.at("rewards").get<std::vector<std::vector<double>>>();
        st.buffer.batches.push_back(std::move(cb));
    }
    st.trace = trace_from_json(j.at("trace"));
    return st;
}

// ---- shared run machinery ---------------------------------------------------

namespace {

struct RunContext {
    ExperimentConfig cfg;
    Circuit circuit;
    ErrorModel model;
    std::vector<DetectorClass> classes;
    FactorGraph graph;
    AgentHyperparams hp;
    PolicyVector fixed_policy;  // p_opt(0), the policy calibrated at t = 0
    int threads = 1;
};

RunContext make_context(const ExperimentConfig& cfg, uint64_t model_salt = 0) {
    cfg.validate();
    RunContext ctx;
    ctx.cfg = cfg;
    ctx.threads = cfg.effective_threads();
    ctx.circuit = cfg.build_circuit();
    ctx.model = sample_error_model(derive_seed(cfg.seed, seed_tag::kModel, model_salt), ctx.circuit,
                                   cfg.model.params_per_site, {cfg.model.omega_lo, cfg.model.omega_hi},
                                   {cfg.model.eps_tilde_lo, cfg.model.eps_tilde_hi}, cfg.drift_spec());
    ctx.model.eps_max_1q = cfg.model.eps_max_1q;
    ctx.model.eps_max_2q = cfg.model.eps_max_2q;
    ctx.model.meas_flip_factor = cfg.model.meas_flip_factor;
    if (cfg.calibrate) {
        CalibrationOptions copt;
        copt.threads = ctx.threads;
        PolicyVector base(ctx.model.total_params(), 0.0);
        auto scales = calibrate_sensitivities(ctx.circuit, ctx.model, base,
                                              default_type_groups(ctx.circuit, ctx.model), copt,
                                              derive_seed(cfg.seed, seed_tag::kCalib));
        apply_scales(ctx.model, scales);
    }
    DetectingRegionMap regions = compute_detecting_regions(ctx.circuit);
    ctx.classes = fold_detectors(ctx.circuit);
    ctx.graph = build_factor_graph(ctx.circuit, regions, ctx.model.params);
    ctx.hp = cfg.agent.hyperparams();
    ctx.fixed_policy = optimal_policy(ctx.model, 0.0);
    return ctx;
}

// Decoded evaluation of one policy at drift time t.
EvalPoint evaluate_policy(const RunContext& ctx, const PolicyVector& pol, double t, uint64_t epoch,
                          uint64_t eval_seed, double* phys_err_out = nullptr) {
    Circuit bound = instantiate_noisy_circuit(ctx.circuit, ctx.model, pol, t);
    DetectionRecord rec = sample(bound, ctx.cfg.eval.shots, eval_seed, ctx.threads);
    DecodingGraph g = build_decoding_graph(bound, PriorKind::TrueModel);
    if (ctx.cfg.eval.method() == DecodeMethod::Mwpm) prepare_matching(g);
    auto pred = decode(g, rec, ctx.cfg.eval.method(), ctx.threads);
    LogicalStats st = logical_error_rate(pred, rec);
    auto fractions = detection_fractions(rec);
    EvalPoint pt;
    pt.epoch = epoch;
    pt.p_err = st.p_err;
    pt.eps_l = st.eps_l;
    pt.dr_q25 = quantile_of(fractions, 0.25);
    pt.dr_q50 = quantile_of(fractions, 0.50);
    pt.dr_q75 = quantile_of(fractions, 0.75);
    pt.phys_err = g.mean_error_rate;
    if (phys_err_out) *phys_err_out = g.mean_error_rate;
    return pt;
}

// One learning epoch: sample candidates, simulate them (scenario (iii)),
// optionally simulate scenarios (i), (ii), (iv) on a matched budget with
// matched seeds, update the policy, book-keep the trace.
void train_epoch(RunContext& ctx, TrainState& st, bool scenarios) {
    const ExperimentConfig& cfg = ctx.cfg;
    const uint64_t e = st.next_epoch;
    const double t = static_cast<double>(e);
    const uint32_t B = ctx.hp.batch;
    const uint64_t shots = cfg.shots_per_candidate();
    const uint32_t D = static_cast<uint32_t>(ctx.circuit.detectors.size());

    std::vector<PolicyVector> thetas = sample_candidates(st.policy, B, cfg.seed);
    PolicyVector optimal = optimal_policy(ctx.model, t);
    const PolicyVector& learned = st.policy.mu;

    // task layout: [0,B) candidates, then fixed, optimal, learned blocks
    const uint32_t groups = scenarios ? 4 : 1;
    std::vector<uint64_t> events(static_cast<size_t>(groups) * B, 0);
    std::vector<std::vector<double>> rewards(B);

    parallel_for(static_cast<uint64_t>(groups) * B, ctx.threads, [&](uint64_t i0, uint64_t i1) {
        Circuit scratch = ctx.circuit;
        for (uint64_t i = i0; i < i1; i++) {
            uint32_t group = static_cast<uint32_t>(i / B);
            uint32_t b = static_cast<uint32_t>(i % B);
            const PolicyVector& pol = group == 0   ? thetas[b]
                                      : group == 1 ? ctx.fixed_policy
                                      : group == 2 ? optimal
                                                   : learned;
            rebind_noise(scratch, ctx.model, pol, t);
            DetectionRecord rec = sample(scratch, shots, derive_seed(cfg.seed, seed_tag::kTrain, e, b));
            events[i] = count_events(rec);
            if (group == 0) rewards[b] = reward_from_record(rec, ctx.classes);
        }
    });

    auto group_sum = [&](uint32_t g) {
        uint64_t s = 0;
        for (uint32_t b = 0; b < B; b++) s += events[static_cast<size_t>(g) * B + b];
        return s;
    };
    const double denom = static_cast<double>(B) * static_cast<double>(shots) * D;
    const uint64_t n_iii = group_sum(0);

    ScenarioTrace& tr = st.trace;
    tr.num_detectors = D;
    tr.dr_stochastic.push_back(n_iii / denom);
    tr.n_stochastic.push_back((tr.n_stochastic.empty() ? 0 : tr.n_stochastic.back()) + n_iii);
    if (scenarios) {
        const uint64_t n_i = group_sum(1), n_ii = group_sum(2), n_iv = group_sum(3);
        tr.dr_fixed.push_back(n_i / denom);
        tr.dr_optimal.push_back(n_ii / denom);
        tr.dr_learned.push_back(n_iv / denom);
        tr.n_fixed.push_back((tr.n_fixed.empty() ? 0 : tr.n_fixed.back()) + n_i);
        tr.n_optimal.push_back((tr.n_optimal.empty() ? 0 : tr.n_optimal.back()) + n_ii);
        tr.n_learned.push_back((tr.n_learned.empty() ? 0 : tr.n_learned.back()) + n_iv);
        tr.evaluation_cycles += 3ull * B * shots * cfg.T;
    }
    tr.training_cycles += static_cast<uint64_t>(B) * shots * cfg.T;
    tr.drift_t.push_back(t);

    // decoded evaluation uses the pre-update mean
    if (cfg.eval.enabled && e % cfg.eval.cadence == 0) {
        EvalPoint pt = evaluate_policy(ctx, learned, t, e, derive_seed(cfg.seed, seed_tag::kEval, e));
        tr.evals.push_back(pt);
        tr.evaluation_cycles += cfg.eval.shots * cfg.T;
    }

    CandidateBatch cb;
    cb.epoch = e;
    cb.mu_s = st.policy.mu;
    cb.sigma_s.resize(st.policy.log_sigma.size());
    for (size_t k = 0; k < cb.sigma_s.size(); k++) cb.sigma_s[k] = std::exp(st.policy.log_sigma[k]);
    cb.thetas = std::move(thetas);
    cb.rewards = std::move(rewards);
    st.buffer.capacity = ctx.hp.buffer;
    st.buffer.push(std::move(cb));

    update(st.policy, st.buffer, ctx.graph, ctx.hp);

    tr.entropy.push_back(st.policy.entropy());
    double norm = 0, smean = 0;
    for (double m : st.policy.mu) norm += m * m;
    for (double ls : st.policy.log_sigma) smean += std::exp(ls);
    tr.mu_norm.push_back(std::sqrt(norm));
    tr.sigma_mean.push_back(st.policy.log_sigma.empty() ? 0 : smean / st.policy.log_sigma.size());

    st.next_epoch++;
}

TrainState fresh_state(const RunContext& ctx) {
    TrainState st;
    st.policy = make_policy(ctx.model.total_params(), ctx.hp);
    st.policy.mu = ctx.fixed_policy;  // start from the policy calibrated at t = 0
    st.buffer.capacity = ctx.hp.buffer;
    return st;
}

}  // namespace

ScenarioTrace run_steering_resumable(const ExperimentConfig& cfg, TrainState& state) {
    RunContext ctx = make_context(cfg);
    if (state.next_epoch == 0) state = fresh_state(ctx);
    while (state.next_epoch < cfg.epochs) train_epoch(ctx, state, /*scenarios=*/true);
    return state.trace;
}

ScenarioTrace run_steering(const ExperimentConfig& cfg) {
    TrainState st;
    return run_steering_resumable(cfg, st);
}

SteeringAdvantage steering_advantage(const ScenarioTrace& trace) {
    SteeringAdvantage adv;
    if (trace.n_fixed.empty() || trace.n_optimal.empty()) return adv;
    double n_i = static_cast<double>(trace.n_fixed.back());
    double n_ii = static_cast<double>(trace.n_optimal.back());
    double n_iii = static_cast<double>(trace.n_stochastic.back());
    double n_iv = static_cast<double>(trace.n_learned.back());
    if (n_ii == n_i) return adv;
    adv.defined = true;
    adv.r_stochastic = (n_iii - n_i) / (n_ii - n_i);
    adv.r_learned = (n_iv - n_i) / (n_ii - n_i);
    return adv;
}

std::vector<PhasePoint> run_phase_diagram(const ExperimentConfig& cfg, const std::vector<double>& freqs,
                                          const std::vector<double>& entropy_coeffs) {
    if (freqs.empty() || entropy_coeffs.empty()) throw std::invalid_argument("empty grid axes");
    const size_t n = freqs.size() * entropy_coeffs.size();
    std::vector<PhasePoint> points(n);
    int total_threads = cfg.effective_threads();
    int workers = static_cast<int>(std::min<size_t>(n, static_cast<size_t>(total_threads)));
    int inner = std::max(1, total_threads / std::max(1, workers));

    parallel_for(n, workers, [&](uint64_t i0, uint64_t i1) {
        for (uint64_t i = i0; i < i1; i++) {
            size_t fi = i / entropy_coeffs.size(), li = i % entropy_coeffs.size();
            PhasePoint& pt = points[i];
            pt.frequency = freqs[fi];
            pt.entropy_coeff = entropy_coeffs[li];
            try {
                ExperimentConfig sub = cfg;
                sub.drift.kind = "sinusoid";
                sub.drift.frequency = freqs[fi];
                sub.agent.entropy = entropy_coeffs[li];
                sub.threads = inner;
                sub.seed = derive_seed(cfg.seed, seed_tag::kGrid, fi, li);
                ScenarioTrace tr = run_steering(sub);
                SteeringAdvantage adv = steering_advantage(tr);
                pt.defined = adv.defined;
                pt.r_stochastic = adv.r_stochastic;
                pt.r_learned = adv.r_learned;
            } catch (const std::exception& ex) {
                pt.failed = true;
                pt.error = ex.what();
            }
        }
    });
    return points;
}

// ---- scaling ----------------------------------------------------------------

GammaFit fit_gamma(const std::vector<double>& times, const std::vector<double>& lambdas,
                   double lambda_star, int smooth_window) {
    GammaFit fit;
    if (times.size() != lambdas.size() || times.size() < 4 || lambda_star <= 0) {
        fit.flagged = true;
        return fit;
    }
    // moving-average smoothing of the lambda trace
    std::vector<double> sm(lambdas.size());
    int half = std::max(0, smooth_window / 2);
    for (size_t i = 0; i < lambdas.size(); i++) {
        size_t lo = i >= static_cast<size_t>(half) ? i - half : 0;
        size_t hi = std::min(lambdas.size() - 1, i + half);
        double s = 0;
        size_t cnt = 0;
        for (size_t k = lo; k <= hi; k++) {
            if (!std::isfinite(lambdas[k])) continue;
            s += lambdas[k];
            cnt++;
        }
        sm[i] = cnt ? s / cnt : std::numeric_limits<double>::quiet_NaN();
    }

    // decay window: from the start until z first drops below the floor
    constexpr double kZFloor = 0.05;
    std::vector<double> ts, zs;
    for (size_t i = 0; i < sm.size(); i++) {
        if (!std::isfinite(sm[i])) continue;
        double z = (lambda_star - sm[i]) / lambda_star;
        if (z < kZFloor) {
            if (ts.size() >= 4) break;  // reached the noise floor
            continue;
        }
        ts.push_back(times[i]);
        zs.push_back(z);
    }
    if (ts.size() < 4) {
        fit.flagged = true;
        return fit;
    }

    std::vector<double> log_z(zs.size());
    for (size_t i = 0; i < zs.size(); i++) log_z[i] = std::log(zs[i]);
    LinearFit lf = fit_linear(ts, log_z);
    fit.gamma_exp = -lf.slope;
    fit.gamma_exp_stderr = lf.slope_stderr;
    fit.r_squared = lf.r_squared;
    fit.ci_lo = fit.gamma_exp - 1.96 * fit.gamma_exp_stderr;
    fit.ci_hi = fit.gamma_exp + 1.96 * fit.gamma_exp_stderr;

    // finite-difference route through the origin
    std::vector<double> xs, ys;
    for (size_t i = 0; i + 1 < ts.size(); i++) {
        double dt = ts[i + 1] - ts[i];
        if (dt <= 0) continue;
        double lam_i = lambda_star * (1.0 - zs[i]);
        double lam_n = lambda_star * (1.0 - zs[i + 1]);
        xs.push_back(zs[i]);
        ys.push_back((lam_n - lam_i) / (dt * lambda_star));
    }
    if (xs.size() >= 2) {
        OriginFit of = fit_through_origin(xs, ys);
        fit.gamma_fd = of.slope;
        fit.gamma_fd_stderr = of.slope_stderr;
    }
    if (fit.gamma_exp <= 0) fit.flagged = true;
    return fit;
}

ScalingResult run_scaling(const ExperimentConfig& cfg, const std::vector<uint32_t>& d_list,
                          const std::vector<uint32_t>& P_list) {
    if (d_list.empty() || P_list.empty()) throw std::invalid_argument("empty scaling lists");
    ScalingResult result;

    for (uint32_t d : d_list) {
        for (uint32_t P : P_list) {
            ExperimentConfig sub = cfg;
            sub.code = "surface";
            sub.d = d;
            sub.model.params_per_site = P;
            sub.drift.kind = "none";
            sub.eval.enabled = true;
            sub.validate();

            RunContext ctx = make_context(sub, /*model_salt=*/d);  // shared landscape across P
            TrainState st = fresh_state(ctx);

            // random initial policy sized to sit above threshold
            double omega_mean = 0;
            size_t cnt = 0;
            for (const SiteNoise& sn : ctx.model.sites)
                for (double w : sn.omega) {
                    omega_mean += w;
                    cnt++;
                }
            omega_mean /= static_cast<double>(cnt);
            double halfwidth =
                std::sqrt(3.0 * sub.scaling.init_epsilon_boost / (static_cast<double>(P) * omega_mean));
            RngStream init_rng(derive_seed(cfg.seed, seed_tag::kInit, d, P), 0);
            for (double& m : st.policy.mu) m = halfwidth * (2.0 * init_rng.next_double() - 1.0);

            ScalingRun run;
            run.d = d;
            run.P = P;
            run.p_tot = ctx.model.total_params();
            while (st.next_epoch < sub.epochs) train_epoch(ctx, st, /*scenarios=*/false);
            for (const EvalPoint& pt : st.trace.evals) {
                run.epochs.push_back(pt.epoch);
                run.eps_l.push_back(pt.eps_l);
                run.phys_err.push_back(pt.phys_err);
            }
            size_t tail = std::max<size_t>(3, run.eps_l.size() / 5);
            double floor_sum = 0;
            size_t floor_cnt = 0;
            for (size_t i = run.eps_l.size() >= tail ? run.eps_l.size() - tail : 0; i < run.eps_l.size(); i++) {
                if (run.eps_l[i] <= 0) continue;
                floor_sum += std::log(run.eps_l[i]);
                floor_cnt++;
            }
            run.floor_eps_l = floor_cnt ? std::exp(floor_sum / floor_cnt) : 0;
            result.runs.push_back(std::move(run));
        }
    }

    // Lambda* from the converged floors of the two largest distances
    std::vector<uint32_t> ds = d_list;
    std::sort(ds.begin(), ds.end());
    ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
    if (ds.size() >= 2) {
        uint32_t d_hi = ds.back(), d_lo = ds[ds.size() - 2];
        auto pooled_floor = [&](uint32_t d) {
            double s = 0;
            size_t n = 0;
            for (const ScalingRun& r : result.runs)
                if (r.d == d && r.floor_eps_l > 0) {
                    s += std::log(r.floor_eps_l);
                    n++;
                }
            return n ? std::exp(s / n) : 0.0;
        };
        double f_lo = pooled_floor(d_lo), f_hi = pooled_floor(d_hi);
        if (f_lo > 0 && f_hi > 0 && f_hi < f_lo)
            result.lambda_star = std::pow(f_lo / f_hi, 2.0 / static_cast<double>(d_hi - d_lo));
    }

    if (result.lambda_star > 0) {
        for (ScalingRun& run : result.runs) {
            run.lambda.resize(run.eps_l.size());
            std::vector<double> times(run.eps_l.size());
            for (size_t i = 0; i < run.eps_l.size(); i++) {
                times[i] = static_cast<double>(run.epochs[i]);
                run.lambda[i] = run.eps_l[i] > 0 && run.floor_eps_l > 0
                                    ? lambda_point_estimate(run.eps_l[i], run.d, result.lambda_star,
                                                            run.floor_eps_l)
                                    : std::numeric_limits<double>::quiet_NaN();
            }
            run.gamma = fit_gamma(times, run.lambda, result.lambda_star);
        }
    }
    return result;
}

// ---- gradient relation check -------------------------------------------------

GradCheckResult run_gradient_relation_check(const ExperimentConfig& cfg) {
    ExperimentConfig sub = cfg;
    sub.drift.kind = "none";
    sub.validate();
    RunContext ctx = make_context(sub);
    const uint32_t P = ctx.model.total_params();
    const GradCheckConfig& gc = sub.gradcheck;

    PolicyVector base(P);
    {
        RngStream rng(derive_seed(sub.seed, seed_tag::kInit), 0);
        for (double& v : base) v = gc.base_offset * rng.next_gaussian();
    }
    std::vector<PolicyVector> dirs(gc.directions, PolicyVector(P));
    for (uint32_t i = 0; i < gc.directions; i++) {
        RngStream rng(derive_seed(sub.seed, seed_tag::kDirs, i), 0);
        for (double& v : dirs[i]) v = gc.step * rng.next_gaussian();
    }

    struct Eval {
        double log_c;
        double log_eps;
        uint64_t errors;
    };
    std::vector<Eval> evals(2 * gc.directions);
    std::string failure;
    std::mutex failure_mu;

    parallel_for(evals.size(), ctx.threads, [&](uint64_t i0, uint64_t i1) {
        Circuit scratch = ctx.circuit;
        for (uint64_t i = i0; i < i1; i++) {
            uint32_t dir = static_cast<uint32_t>(i / 2);
            double sign = i % 2 == 0 ? 1.0 : -1.0;
            PolicyVector p = base;
            for (uint32_t k = 0; k < P; k++) p[k] += sign * dirs[dir][k];
            rebind_noise(scratch, ctx.model, p, 0.0);
            DetectionRecord rec = sample(scratch, gc.shots, derive_seed(sub.seed, seed_tag::kEval, i));
            double c_val = mean_detection_rate(rec);
            DecodingGraph g = build_decoding_graph(scratch, PriorKind::TrueModel);
            if (sub.eval.method() == DecodeMethod::Mwpm) prepare_matching(g);
            auto pred = decode(g, rec, sub.eval.method());
            LogicalStats st = logical_error_rate(pred, rec);
            if (st.errors < 25) {
                std::lock_guard<std::mutex> lk(failure_mu);
                failure = "logical error count " + std::to_string(st.errors) +
                          " too small to resolve; increase gradcheck shots";
            }
            evals[i] = {std::log(c_val), std::log(std::max(st.eps_l, 1e-300)), st.errors};
        }
    });
    if (!failure.empty()) throw std::runtime_error(failure);

    GradCheckResult res;
    res.expected_slope = (static_cast<double>(sub.d) + 1.0) / 2.0;
    for (uint32_t i = 0; i < gc.directions; i++) {
        double dc = evals[2 * i].log_c - evals[2 * i + 1].log_c;
        double de = evals[2 * i].log_eps - evals[2 * i + 1].log_eps;
        if (dc == 0 && de == 0) continue;  // null perturbation carries no signal
        res.dlog_c.push_back(dc);
        res.dlog_eps_l.push_back(de);
    }
    OriginFit of = fit_through_origin(res.dlog_c, res.dlog_eps_l);
    res.slope = of.slope;
    res.slope_stderr = of.slope_stderr;
    return res;
}

// ---- randomized recovery / fine-tuning ---------------------------------------

namespace {

RecoveryResult run_recovery_impl(const ExperimentConfig& cfg, bool spoil) {
    ExperimentConfig sub = cfg;
    sub.eval.enabled = true;
    sub.validate();
    RunContext ctx = make_context(sub);
    const uint32_t P = ctx.model.total_params();

    EvalPoint ref = evaluate_policy(ctx, ctx.fixed_policy, 0.0, 0,
                                    derive_seed(sub.seed, seed_tag::kEval, 900001));
    RecoveryResult res;
    res.reference_p_err = ref.p_err;
    res.reference_dr_median = ref.dr_q50;

    TrainState st = fresh_state(ctx);
    if (spoil) {
        PolicyVector dir(P);
        RngStream rng(derive_seed(sub.seed, seed_tag::kSpoil), 0);
        for (double& v : dir) v = rng.next_gaussian();

        auto p_at_scale = [&](double s, int probe) {
            PolicyVector p = ctx.fixed_policy;
            for (uint32_t k = 0; k < P; k++) p[k] += s * dir[k];
            return evaluate_policy(ctx, p, 0.0, 0, derive_seed(sub.seed, seed_tag::kSpoil, 1, probe)).p_err;
        };

        const double lo_target = sub.recovery.target_p_lo, hi_target = sub.recovery.target_p_hi;
        double s_lo = 0, s_hi = 0, scale = 0;
        bool found = false;
        int probe = 0;
        for (double s = 0.5; s <= 64.0; s *= 2) {
            double p = p_at_scale(s, probe++);
            if (p >= lo_target) {
                if (p <= hi_target) {
                    scale = s;
                    found = true;
                }
                s_hi = s;
                break;
            }
            s_lo = s;
        }
        if (s_hi == 0) throw std::runtime_error("spoiling search failed: cannot reach the target logical error probability");
        for (int it = 0; !found && it < 25; it++) {
            double s = 0.5 * (s_lo + s_hi);
            double p = p_at_scale(s, probe++);
            if (p < lo_target)
                s_lo = s;
            else if (p > hi_target)
                s_hi = s;
            else {
                scale = s;
                found = true;
            }
        }
        if (!found) throw std::runtime_error("spoiling search did not converge to the target window");
        res.spoil_scale = scale;
        for (uint32_t k = 0; k < P; k++) st.policy.mu[k] = ctx.fixed_policy[k] + scale * dir[k];
    }

    res.initial_p_err =
        evaluate_policy(ctx, st.policy.mu, 0.0, 0, derive_seed(sub.seed, seed_tag::kEval, 900002)).p_err;

    while (st.next_epoch < sub.epochs) train_epoch(ctx, st, /*scenarios=*/false);
    res.evals = st.trace.evals;

    res.dr_recovered = false;
    for (const EvalPoint& pt : res.evals) {
        if (pt.dr_q50 <= 1.1 * res.reference_dr_median) {
            res.epochs_to_dr_recovery = pt.epoch;
            res.dr_recovered = true;
            break;
        }
    }
    size_t tail = std::min<size_t>(5, res.evals.size());
    std::vector<double> last;
    for (size_t i = res.evals.size() - tail; i < res.evals.size(); i++) last.push_back(res.evals[i].p_err);
    res.final_p_err = last.empty() ? 0 : quantile_of(last, 0.5);
    res.final_p_ratio = res.reference_p_err > 0 ? res.final_p_err / res.reference_p_err
                                                : std::numeric_limits<double>::infinity();
    res.recovered = res.final_p_ratio <= sub.recovery.recover_tol;
    return res;
}

}  // namespace

RecoveryResult run_randomized_recovery(const ExperimentConfig& cfg) { return run_recovery_impl(cfg, true); }
RecoveryResult run_finetune(const ExperimentConfig& cfg) { return run_recovery_impl(cfg, false); }

// ---- emission -----------------------------------------------------------------

std::string trace_to_jsonl(const ScenarioTrace& t) {
    std::ostringstream out;
    size_t eval_at = 0;
    for (size_t e = 0; e < t.dr_stochastic.size(); e++) {
        json j;
        j["epoch"] = e;
        j["mean_dr"] = t.dr_stochastic[e];
        j["entropy"] = t.entropy[e];
        j["mu_norm"] = t.mu_norm[e];
        j["sigma_mean"] = t.sigma_mean[e];
        j["drift_t"] = t.drift_t[e];
        if (e < t.dr_fixed.size()) {
            j["dr_fixed"] = t.dr_fixed[e];
            j["dr_optimal"] = t.dr_optimal[e];
            j["dr_learned"] = t.dr_learned[e];
            j["n_fixed"] = t.n_fixed[e];
            j["n_optimal"] = t.n_optimal[e];
            j["n_stochastic"] = t.n_stochastic[e];
            j["n_learned"] = t.n_learned[e];
        }
        if (eval_at < t.evals.size() && t.evals[eval_at].epoch == e) {
            const EvalPoint& pt = t.evals[eval_at++];
            j["eval"] = {{"p_err", pt.p_err},   {"eps_l", pt.eps_l},   {"dr_q25", pt.dr_q25},
                         {"dr_q50", pt.dr_q50}, {"dr_q75", pt.dr_q75}, {"phys_err", pt.phys_err}};
        }
        out << j.dump() << "\n";
    }
    return out.str();
}

std::string phase_to_csv(const std::vector<PhasePoint>& points) {
    std::ostringstream out;
    out << "f,entropy,r_stochastic,r_learned\n";
    for (const PhasePoint& p : points) {
        out << fmt_g9(p.frequency) << ',' << fmt_g9(p.entropy_coeff) << ',';
        if (p.failed || !p.defined)
            out << "nan,nan";
        else
            out << fmt_g9(p.r_stochastic) << ',' << fmt_g9(p.r_learned);
        out << '\n';
    }
    return out.str();
}

std::string scaling_to_csv(const ScalingResult& result) {
    std::ostringstream out;
    out << "d,P,epoch,eps_l,lambda\n";
    for (const ScalingRun& run : result.runs)
        for (size_t i = 0; i < run.eps_l.size(); i++) {
            out << run.d << ',' << run.P << ',' << run.epochs[i] << ',' << fmt_g9(run.eps_l[i]) << ',';
            out << (i < run.lambda.size() && std::isfinite(run.lambda[i]) ? fmt_g9(run.lambda[i]) : "nan");
            out << '\n';
        }
    return out.str();
}

std::string psd_to_csv(const PsdResult& psd) {
    std::ostringstream out;
    out << "freq,psd_fixed,psd_steered,filter_db\n";
    for (size_t i = 0; i < psd.freq.size(); i++)
        out << fmt_g9(psd.freq[i]) << ',' << fmt_g9(psd.psd_fixed[i]) << ',' << fmt_g9(psd.psd_steered[i])
            << ',' << fmt_g9(psd.filter_db[i]) << '\n';
    return out.str();
}

}  // namespace qecsteer
