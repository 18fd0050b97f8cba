#include "doctest.h"

#include <algorithm>
#include <bit>
#include <cmath>

#include "oracles.h"
#include "qecsteer/decoder.h"
#include "qecsteer/noise.h"
#include "qecsteer/rng.h"
#include "qecsteer/simulator.h"

using namespace qecsteer;

namespace {

uint64_t popcount_all(const std::vector<uint64_t>& words) {
    uint64_t n = 0;
    for (uint64_t w : words) n += std::popcount(w);
    return n;
}

}  // namespace

TEST_CASE("repetition-code mechanisms are natively matchable") {
    Circuit c = bind_uniform(build_repetition_code_memory(3, 2), 0.01, 0.01, 0.01);
    DecodingGraph g = build_decoding_graph(c);
    CHECK(g.num_detectors == 6);
    CHECK(!g.edges.empty());
    for (const DecodingEdge& e : g.edges) {
        CHECK(e.a >= 0);
        CHECK(e.q > 0);
        CHECK(e.q < 0.5);
        CHECK(e.weight > 0);
        CHECK(e.weight <= DecodingGraph::kMaxWeight);
    }
    CHECK(g.mean_error_rate == doctest::Approx(0.01));
}

TEST_CASE("parallel mechanisms merge by XOR composition") {
    // two X_FLIP(0.1) slots on the same qubit between the same measurements
    std::string text =
        "R 0 1\n"
        "X_FLIP(0.1) 0 # site 0 cycle 0\n"
        "X_FLIP(0.1) 0 # site 0 cycle 0\n"
        "M 0 1\n"
        "DETECTOR rec[-2] # q 0 t 0\n"
        "OBSERVABLE rec[-2]\n";
    Circuit c = parse_circuit(text);
    DecodingGraph g = build_decoding_graph(c);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].q == doctest::Approx(0.18).epsilon(1e-12));
    CHECK(g.edges[0].b == -1);  // boundary edge
    CHECK(g.edges[0].obs == 1);

    // vanishing probability saturates the weight cap
    std::string tiny =
        "R 0\n"
        "X_FLIP(1e-30) 0 # site 0 cycle 0\n"
        "M 0\n"
        "DETECTOR rec[-1] # q 0 t 0\n";
    DecodingGraph gt = build_decoding_graph(parse_circuit(tiny));
    REQUIRE(gt.edges.size() == 1);
    CHECK(gt.edges[0].weight == DecodingGraph::kMaxWeight);
}

TEST_CASE("noiseless records decode to zero logical errors") {
    Circuit plain = build_surface_code_memory(3, 3);
    Circuit c = bind_uniform(plain, 0, 0, 0);
    Circuit prior = bind_uniform(plain, 1e-3, 1e-3, 1e-3);
    DecodingGraph g = build_decoding_graph(prior);
    prepare_matching(g);
    DetectionRecord rec = sample(c, 5000, 1);
    for (DecodeMethod m : {DecodeMethod::Mwpm, DecodeMethod::UnionFind}) {
        auto pred = decode(g, rec, m, 2);
        LogicalStats st = logical_error_rate(pred, rec);
        CHECK(st.errors == 0);
        CHECK(st.p_err == 0.0);
        CHECK(st.eps_l == 0.0);
    }
}

TEST_CASE("a deterministically fired mechanism is recovered exactly") {
    Circuit plain = build_repetition_code_memory(3, 3);
    Circuit prior = bind_uniform(plain, 1e-3, 1e-3, 1e-3);
    DecodingGraph g = build_decoding_graph(prior);
    prepare_matching(g);

    Circuit quiet = bind_uniform(plain, 0, 0, 0);
    uint32_t pos = quiet.noise_slots[4];
    uint32_t q = quiet.instructions[pos].targets[0];
    const uint64_t shots = 128;
    std::vector<PauliInjection> inj;
    for (uint64_t s = 0; s < shots; s++) inj.push_back({pos, q, kPauliX, s});
    DetectionRecord rec = sample_with_injections(quiet, shots, 2, inj);
    auto pred = decode(g, rec, DecodeMethod::Mwpm);
    LogicalStats st = logical_error_rate(pred, rec);
    CHECK(st.errors == 0);
}

TEST_CASE("MWPM matches exhaustive maximum likelihood on a small instance") {
    Circuit c = bind_uniform(build_repetition_code_memory(3, 2), 0.02, 0.02, 0.02);
    DecodingGraph g = build_decoding_graph(c);
    REQUIRE(g.edges.size() <= 20);
    prepare_matching(g);
    DetectionRecord rec = sample(c, 10000, 17, 2);
    auto pred_mwpm = decode(g, rec, DecodeMethod::Mwpm, 2);
    auto pred_ml = decode(g, rec, DecodeMethod::Exhaustive, 2);
    uint64_t err_mwpm = logical_error_rate(pred_mwpm, rec).errors;
    uint64_t err_ml = logical_error_rate(pred_ml, rec).errors;
    REQUIRE(err_ml >= 100);  // enough statistics for a relative comparison
    double gap = std::abs(static_cast<double>(err_mwpm) - static_cast<double>(err_ml));
    CHECK(gap <= 0.10 * static_cast<double>(err_ml));
}

TEST_CASE("matching weight equals the brute-force minimum") {
    Circuit c = bind_uniform(build_surface_code_memory(3, 3), 1.5e-3, 3e-3, 1e-3);
    DecodingGraph g = build_decoding_graph(c);
    prepare_matching(g);
    RngStream rng(2027, 0);
    for (int trial = 0; trial < 100; trial++) {
        uint32_t k = 1 + static_cast<uint32_t>(rng.next_below(8));
        std::vector<uint32_t> fired;
        while (fired.size() < k) {
            uint32_t det = static_cast<uint32_t>(rng.next_below(g.num_detectors));
            if (std::find(fired.begin(), fired.end(), det) == fired.end()) fired.push_back(det);
        }
        MwpmSolution sol = mwpm_solve(g, fired);
        double brute = oracle::min_pairing_weight(g, fired);
        CHECK(sol.weight == doctest::Approx(brute).epsilon(1e-9));
    }
}

TEST_CASE("union-find stays within twice the MWPM logical error rate") {
    Circuit c = bind_uniform(build_surface_code_memory(3, 3), 4e-3, 8e-3, 4e-3);
    DecodingGraph g = build_decoding_graph(c);
    prepare_matching(g);
    DetectionRecord rec = sample(c, 30000, 3, 4);
    uint64_t err_mwpm = logical_error_rate(decode(g, rec, DecodeMethod::Mwpm, 4), rec).errors;
    uint64_t err_uf = logical_error_rate(decode(g, rec, DecodeMethod::UnionFind, 4), rec).errors;
    REQUIRE(err_mwpm >= 50);  // enough statistics for the ratio to mean something
    CHECK(static_cast<double>(err_uf) <= 2.0 * static_cast<double>(err_mwpm));
}

TEST_CASE("sub-threshold scaling orders the logical error rates") {
    auto eval = [&](uint32_t d) {
        Circuit plain = build_surface_code_memory(d, 5);
        ErrorModel m = sample_error_model(7, plain, 1, {0.01, 0.1}, {5e-4, 2e-3}, {});
        Circuit bound = instantiate_noisy_circuit(plain, m, PolicyVector(m.total_params(), 0.0), 0.0);
        DecodingGraph g = build_decoding_graph(bound);
        prepare_matching(g);
        DetectionRecord rec = sample(bound, 200000, 11, 8);
        return logical_error_rate(decode(g, rec, DecodeMethod::Mwpm, 8), rec);
    };
    LogicalStats s3 = eval(3), s5 = eval(5);
    double se = std::sqrt(static_cast<double>(s3.errors) + static_cast<double>(s5.errors));
    CHECK(static_cast<double>(s3.errors) - static_cast<double>(s5.errors) > 3.0 * se);
    CHECK(s5.eps_l < s3.eps_l);
}

TEST_CASE("per-cycle inversion and lambda point estimates") {
    CHECK(per_cycle_error(0.0, 10) == 0.0);
    CHECK(per_cycle_error(0.37, 1) == doctest::Approx(0.37));
    double p = accumulate_p_err(0.01, 25);
    CHECK(per_cycle_error(p, 25) == doctest::Approx(0.01).epsilon(1e-12));

    CHECK(lambda_point_estimate(2e-3, 5, 4.0, 2e-3) == doctest::Approx(4.0));
    CHECK(lambda_point_estimate(4 * 2e-3, 3, 4.0, 2e-3) == doctest::Approx(2.0));
    // inverse pair: eps_L = C Lambda^{-(d+1)/2}
    double lambda_star = 3.7, eps_star = 1.1e-3;
    uint32_t d = 5;
    double lam = 2.2;
    double eps = eps_star * std::pow(lambda_star / lam, (d + 1) / 2.0);
    CHECK(lambda_point_estimate(eps, d, lambda_star, eps_star) == doctest::Approx(lam).epsilon(1e-9));

    // anti-learning regime is reported, not hidden
    DetectionRecord rec;
    rec.num_detectors = 0;
    rec.shots = 64;
    rec.cycles_per_shot = 4;
    rec.words_per_row = 1;
    rec.logical = {~0ULL};
    std::vector<uint64_t> pred{0};
    LogicalStats st = logical_error_rate(pred, rec);
    CHECK(st.anti_learning);
    CHECK(st.eps_l == 0.5);
}

TEST_CASE("average prior rate tracks the bound site rates") {
    Circuit plain = build_repetition_code_memory(3, 3);
    ErrorModel m = sample_error_model(19, plain, 1, {0.01, 0.1}, {5e-4, 2e-3}, {});
    PolicyVector p(m.total_params(), 0.0);
    Circuit bound = instantiate_noisy_circuit(plain, m, p, 0.0);
    DecodingGraph g = build_decoding_graph(bound);
    double site_mean = 0;
    for (uint32_t s = 0; s < plain.sites.size(); s++) site_mean += epsilon_at(m, s, 0.0, p);
    site_mean /= static_cast<double>(plain.sites.size());
    CHECK(std::abs(g.mean_error_rate - site_mean) <= 0.10 * site_mean);
}
