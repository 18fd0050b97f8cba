#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qecsteer/config.h"
#include "qecsteer/harness.h"
#include "qecsteer/rng.h"
#include "qecsteer/util.h"

using namespace qecsteer;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out;
    int64_t seed = -1;
    int threads = -1;
    std::string decoder;

    ExperimentConfig load() const {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = ExperimentConfig::load(config_path);
        if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
        if (threads >= 0) cfg.threads = threads;
        if (!out.empty()) cfg.out = out;
        if (!decoder.empty()) cfg.eval.decoder = decoder;
        cfg.validate();
        return cfg;
    }
};

void add_common(CLI::App* app, CommonArgs& args) {
    app->add_option("--config", args.config_path, "experiment config JSON (schema 1)");
    app->add_option("--seed", args.seed, "override the config seed");
    app->add_option("--out", args.out, "output directory");
    app->add_option("--threads", args.threads, "worker threads (0 = all cores)");
    app->add_option("--decoder", args.decoder, "mwpm | uf | exhaustive")
        ->check(CLI::IsMember({"mwpm", "uf", "exhaustive"}));
}

void ensure_out(const ExperimentConfig& cfg) { std::filesystem::create_directories(cfg.out); }

void write_out(const ExperimentConfig& cfg, const std::string& name, const std::string& content) {
    ensure_out(cfg);
    write_text_file(cfg.out + "/" + name, content);
    std::cout << "wrote " << cfg.out << "/" << name << "\n";
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

std::vector<uint32_t> parse_u32_list(const std::string& s) {
    std::vector<uint32_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(static_cast<uint32_t>(std::stoul(tok)));
    return out;
}

std::vector<double> read_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<double> v;
    double x;
    while (in >> x) v.push_back(x);
    return v;
}

json budget_json(const ScenarioTrace& tr) {
    return {{"training_cycles", tr.training_cycles}, {"evaluation_cycles", tr.evaluation_cycles}};
}

void maybe_dump_model_and_graph(const ExperimentConfig& cfg, bool dump_model, bool dump_graph) {
    if (!dump_model && !dump_graph) return;
    Circuit c = cfg.build_circuit();
    ErrorModel model = sample_error_model(derive_seed(cfg.seed, seed_tag::kModel, 0), c,
                                          cfg.model.params_per_site, {cfg.model.omega_lo, cfg.model.omega_hi},
                                          {cfg.model.eps_tilde_lo, cfg.model.eps_tilde_hi}, cfg.drift_spec());
    if (dump_model) write_out(cfg, "model.json", dump_model_json(model));
    if (dump_graph) {
        DetectingRegionMap regions = compute_detecting_regions(c);
        FactorGraph g = build_factor_graph(c, regions, model.params);
        write_out(cfg, "graph.json", dump_graph_json(g));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qec-steer: detection-event-driven policy-gradient steering of stabilizer memories"};
    app.require_subcommand(1);

    CommonArgs args;

    auto* cmd_circuit = app.add_subcommand("circuit", "build a memory circuit and dump it");
    std::string dump_path = "-";
    double bind_p = -1;
    uint64_t rec_shots = 0;
    std::string rec_path;
    add_common(cmd_circuit, args);
    cmd_circuit->add_option("--dump", dump_path, "circuit dump destination ('-' = stdout)");
    cmd_circuit->add_option("--bind-p", bind_p, "bind a uniform probability to every noise slot");
    cmd_circuit->add_option("--shots", rec_shots, "sample this many shots of the bound circuit");
    cmd_circuit->add_option("--dump-records", rec_path, "write the sampled record (QSDR1 + .b8)");

    auto* cmd_calibrate = app.add_subcommand("calibrate", "fit per-type detector sensitivities");
    bool cal_dump_model = false, cal_dump_graph = false;
    add_common(cmd_calibrate, args);
    cmd_calibrate->add_flag("--dump-model", cal_dump_model, "write model.json");
    cmd_calibrate->add_flag("--dump-graph", cal_dump_graph, "write graph.json");

    auto* cmd_steer = app.add_subcommand("steer", "drift-steering run with the four scenarios");
    bool steer_dump_model = false, steer_dump_graph = false;
    std::string resume_path;
    add_common(cmd_steer, args);
    cmd_steer->add_flag("--dump-model", steer_dump_model, "write model.json");
    cmd_steer->add_flag("--dump-graph", steer_dump_graph, "write graph.json");
    cmd_steer->add_option("--resume", resume_path, "resume from a checkpoint file");

    auto* cmd_phase = app.add_subcommand("phase", "steerability phase diagram over (f, entropy)");
    std::string freqs_arg = "0.001,0.003333333,0.033333333", lambdas_arg = "0.1,0.01,0.001";
    add_common(cmd_phase, args);
    cmd_phase->add_option("--freqs", freqs_arg, "comma-separated drift frequencies (1/epochs)");
    cmd_phase->add_option("--lambdas", lambdas_arg, "comma-separated entropy coefficients");

    auto* cmd_scale = app.add_subcommand("scale", "convergence scaling over code distances");
    std::string d_arg = "3,5,7", p_arg = "1,10";
    add_common(cmd_scale, args);
    cmd_scale->add_option("--d-list", d_arg, "comma-separated odd distances");
    cmd_scale->add_option("--p-list", p_arg, "comma-separated parameters per gate");

    auto* cmd_finetune = app.add_subcommand("finetune", "train from the calibrated policy");
    add_common(cmd_finetune, args);

    auto* cmd_recover = app.add_subcommand("recover", "train from a spoiled (50% logical error) policy");
    add_common(cmd_recover, args);

    auto* cmd_gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient relation check");
    add_common(cmd_gradcheck, args);

    auto* cmd_psd = app.add_subcommand("psd", "PSD and filter function of LER traces");
    std::string fixed_arg, steered_arg;
    double smooth_sigma = 0;
    add_common(cmd_psd, args);
    cmd_psd->add_option("--fixed", fixed_arg, "comma-separated fixed-policy trace files (one value per line)")
        ->required();
    cmd_psd->add_option("--steered", steered_arg, "comma-separated steered trace files")->required();
    cmd_psd->add_option("--smooth", smooth_sigma, "Gaussian smoothing width in grid points");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_circuit->parsed()) {
            ExperimentConfig cfg = args.load();
            Circuit c = cfg.build_circuit();
            if (bind_p >= 0) c = bind_uniform(c, bind_p, bind_p, bind_p);
            std::string text = dump_circuit(c);
            if (dump_path == "-")
                std::cout << text;
            else
                write_text_file(dump_path, text);
            if (rec_shots > 0) {
                if (!c.all_noise_bound()) throw std::runtime_error("--shots requires --bind-p");
                DetectionRecord rec = sample(c, rec_shots, cfg.seed, cfg.effective_threads());
                std::cout << "mean detection rate C = " << fmt_g9(mean_detection_rate(rec)) << "\n";
                if (!rec_path.empty()) {
                    write_record_files(rec, rec_path);
                    std::cout << "wrote " << rec_path << " and " << rec_path << ".b8\n";
                }
            }
            return 0;
        }

        if (cmd_calibrate->parsed()) {
            ExperimentConfig cfg = args.load();
            Circuit c = cfg.build_circuit();
            ErrorModel model =
                sample_error_model(derive_seed(cfg.seed, seed_tag::kModel, 0), c, cfg.model.params_per_site,
                                   {cfg.model.omega_lo, cfg.model.omega_hi},
                                   {cfg.model.eps_tilde_lo, cfg.model.eps_tilde_hi}, cfg.drift_spec());
            CalibrationOptions opt;
            opt.threads = cfg.effective_threads();
            PolicyVector base(model.total_params(), 0.0);
            auto scales = calibrate_sensitivities(c, model, base, default_type_groups(c, model), opt,
                                                  derive_seed(cfg.seed, seed_tag::kCalib));
            json j = json::array();
            for (const auto& sc : scales) {
                std::cout << sc.group << ": sigma0 = " << (sc.flagged ? "inf (flagged)" : fmt_g9(sc.sigma0))
                          << "  DR0 = " << fmt_g9(sc.dr0) << "\n";
                j.push_back({{"group", sc.group},
                             {"sigma0", sc.flagged ? -1.0 : sc.sigma0},
                             {"dr0", sc.dr0},
                             {"flagged", sc.flagged},
                             {"params", sc.params.size()}});
            }
            write_out(cfg, "calibration.json", j.dump(2));
            maybe_dump_model_and_graph(cfg, cal_dump_model, cal_dump_graph);
            return 0;
        }

        if (cmd_steer->parsed()) {
            ExperimentConfig cfg = args.load();
            maybe_dump_model_and_graph(cfg, steer_dump_model, steer_dump_graph);
            TrainState state;
            if (!resume_path.empty()) state = TrainState::from_json_text(read_text_file(resume_path));
            ScenarioTrace trace;
            if (cfg.checkpoint_every > 0) {
                ensure_out(cfg);
                while (state.next_epoch < cfg.epochs) {
                    ExperimentConfig chunk = cfg;
                    chunk.epochs = static_cast<uint32_t>(
                        std::min<uint64_t>(cfg.epochs, state.next_epoch + cfg.checkpoint_every));
                    trace = run_steering_resumable(chunk, state);
                    write_text_file(cfg.out + "/checkpoint.json", state.to_json_text());
                }
            } else {
                trace = run_steering_resumable(cfg, state);
            }
            write_out(cfg, "trace.jsonl", trace_to_jsonl(trace));
            SteeringAdvantage adv = steering_advantage(trace);
            json j;
            j["r_stochastic"] = adv.r_stochastic;
            j["r_learned"] = adv.r_learned;
            j["r_defined"] = adv.defined;
            j["budget"] = budget_json(trace);
            write_out(cfg, "summary.json", j.dump(2));
            std::cout << "r_stochastic = " << fmt_g9(adv.r_stochastic)
                      << "  r_learned = " << fmt_g9(adv.r_learned) << "\n";
            return 0;
        }

        if (cmd_phase->parsed()) {
            ExperimentConfig cfg = args.load();
            auto points = run_phase_diagram(cfg, parse_double_list(freqs_arg), parse_double_list(lambdas_arg));
            write_out(cfg, "phase.csv", phase_to_csv(points));
            json j = json::array();
            for (const auto& p : points)
                j.push_back({{"f", p.frequency},
                             {"entropy", p.entropy_coeff},
                             {"r_stochastic", p.r_stochastic},
                             {"r_learned", p.r_learned},
                             {"failed", p.failed},
                             {"error", p.error}});
            write_out(cfg, "summary.json", json{{"points", j}}.dump(2));
            return 0;
        }

        if (cmd_scale->parsed()) {
            ExperimentConfig cfg = args.load();
            ScalingResult res = run_scaling(cfg, parse_u32_list(d_arg), parse_u32_list(p_arg));
            write_out(cfg, "scaling.csv", scaling_to_csv(res));
            json jr = json::array();
            for (const ScalingRun& run : res.runs)
                jr.push_back({{"d", run.d},
                              {"P", run.P},
                              {"p_tot", run.p_tot},
                              {"floor_eps_l", run.floor_eps_l},
                              {"gamma_exp", run.gamma.gamma_exp},
                              {"gamma_fd", run.gamma.gamma_fd},
                              {"gamma_ci", {run.gamma.ci_lo, run.gamma.ci_hi}},
                              {"r_squared", run.gamma.r_squared},
                              {"flagged", run.gamma.flagged}});
            write_out(cfg, "summary.json",
                      json{{"lambda_star", res.lambda_star}, {"runs", jr}}.dump(2));
            std::cout << "lambda_star = " << fmt_g9(res.lambda_star) << "\n";
            return 0;
        }

        if (cmd_finetune->parsed() || cmd_recover->parsed()) {
            ExperimentConfig cfg = args.load();
            RecoveryResult res = cmd_recover->parsed() ? run_randomized_recovery(cfg) : run_finetune(cfg);
            json jevals = json::array();
            for (const EvalPoint& pt : res.evals)
                jevals.push_back({{"epoch", pt.epoch},
                                  {"p_err", pt.p_err},
                                  {"eps_l", pt.eps_l},
                                  {"dr_q25", pt.dr_q25},
                                  {"dr_q50", pt.dr_q50},
                                  {"dr_q75", pt.dr_q75}});
            json j;
            j["reference_p_err"] = res.reference_p_err;
            j["initial_p_err"] = res.initial_p_err;
            j["final_p_err"] = res.final_p_err;
            j["final_p_ratio"] = res.final_p_ratio;
            j["spoil_scale"] = res.spoil_scale;
            j["epochs_to_dr_recovery"] = res.epochs_to_dr_recovery;
            j["dr_recovered"] = res.dr_recovered;
            j["recovered"] = res.recovered;
            j["evals"] = jevals;
            write_out(cfg, cmd_recover->parsed() ? "recovery.json" : "finetune.json", j.dump(2));
            std::cout << "p_err " << fmt_g9(res.initial_p_err) << " -> " << fmt_g9(res.final_p_err)
                      << " (reference " << fmt_g9(res.reference_p_err) << ")\n";
            return 0;
        }

        if (cmd_gradcheck->parsed()) {
            ExperimentConfig cfg = args.load();
            if (args.decoder.empty()) cfg.eval.decoder = "mwpm";
            GradCheckResult res = run_gradient_relation_check(cfg);
            std::ostringstream csv;
            csv << "dlog_c,dlog_eps_l\n";
            for (size_t i = 0; i < res.dlog_c.size(); i++)
                csv << fmt_g9(res.dlog_c[i]) << ',' << fmt_g9(res.dlog_eps_l[i]) << '\n';
            write_out(cfg, "gradcheck.csv", csv.str());
            json j;
            j["slope"] = res.slope;
            j["slope_stderr"] = res.slope_stderr;
            j["expected_slope"] = res.expected_slope;
            write_out(cfg, "summary.json", j.dump(2));
            std::cout << "slope = " << fmt_g9(res.slope) << " (expected " << fmt_g9(res.expected_slope)
                      << ")\n";
            return 0;
        }

        if (cmd_psd->parsed()) {
            ExperimentConfig cfg = args.load();
            std::vector<std::vector<double>> fixed, steered;
            std::stringstream fs(fixed_arg), ss(steered_arg);
            std::string tok;
            while (std::getline(fs, tok, ',')) fixed.push_back(read_series(tok));
            while (std::getline(ss, tok, ',')) steered.push_back(read_series(tok));
            PsdResult res = analyze_psd(fixed, steered, 64, smooth_sigma);
            write_out(cfg, "psd.csv", psd_to_csv(res));
            return 0;
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
