#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "qecsteer/agent.h"
#include "qecsteer/noise.h"
#include "qecsteer/rng.h"
#include "qecsteer/simulator.h"
#include "qecsteer/util.h"

using namespace qecsteer;

namespace {

AgentHyperparams default_hp() {
    AgentHyperparams hp;
    hp.batch = 20;
    return hp;
}

// Quadratic toy objective with a single reward component per class count.
std::vector<double> toy_rewards(const PolicyVector& theta, const PolicyVector& target) {
    double s = 0;
    for (size_t k = 0; k < theta.size(); k++) s += (theta[k] - target[k]) * (theta[k] - target[k]);
    return {-std::min(1.0, s)};
}

FactorGraph full_graph(uint32_t num_params) {
    FactorGraph g;
    DetectorClass dc;
    dc.class_id = 0;
    dc.members = {0};
    dc.space_coord = 0;
    dc.phase = Phase::Bulk;
    g.classes = {dc};
    g.num_params = num_params;
    g.class_params.resize(1);
    g.param_classes.resize(num_params);
    for (uint32_t k = 0; k < num_params; k++) {
        g.class_params[0].push_back(k);
        g.param_classes[k] = {0};
    }
    return g;
}

CandidateBatch make_batch(const PolicyDistribution& policy, uint32_t B, uint64_t seed,
                          const PolicyVector& target) {
    CandidateBatch cb;
    cb.epoch = policy.epoch;
    cb.mu_s = policy.mu;
    cb.sigma_s.resize(policy.log_sigma.size());
    for (size_t k = 0; k < cb.sigma_s.size(); k++) cb.sigma_s[k] = std::exp(policy.log_sigma[k]);
    cb.thetas = sample_candidates(policy, B, seed);
    for (const auto& th : cb.thetas) cb.rewards.push_back(toy_rewards(th, target));
    return cb;
}

}  // namespace

TEST_CASE("mirrored sampling") {
    AgentHyperparams hp = default_hp();
    PolicyDistribution policy = make_policy(6, hp);
    for (size_t k = 0; k < 6; k++) policy.mu[k] = 0.3 * static_cast<double>(k);

    auto cands = sample_candidates(policy, 10, 42);
    REQUIRE(cands.size() == 10);
    for (size_t b = 0; b < 10; b += 2)
        for (size_t k = 0; k < 6; k++)
            CHECK(0.5 * (cands[b][k] + cands[b + 1][k]) == doctest::Approx(policy.mu[k]).epsilon(1e-12));

    CHECK_THROWS(sample_candidates(policy, 3, 1));  // odd batch
    CHECK_THROWS(sample_candidates(policy, 0, 1));

    // shrunken exploration collapses candidates onto the mean
    for (double& ls : policy.log_sigma) ls = std::log(1e-9);
    auto tight = sample_candidates(policy, 4, 7);
    for (const auto& th : tight)
        for (size_t k = 0; k < 6; k++) CHECK(std::abs(th[k] - policy.mu[k]) < 1e-7);

    // CLT bound on the sample mean of many candidates
    PolicyDistribution wide = make_policy(4, hp);
    const uint32_t n = 10000;
    auto many = sample_candidates(wide, n, 3);
    for (size_t k = 0; k < 4; k++) {
        double m = 0;
        for (const auto& th : many) m += th[k];
        m /= n;
        CHECK(std::abs(m - wide.mu[k]) <= 3.0 * hp.sigma_init / 100.0);
    }
}

TEST_CASE("rewards from records") {
    Circuit c = bind_uniform(build_repetition_code_memory(3, 4), 0, 0, 0);
    auto classes = fold_detectors(c);
    DetectionRecord rec = sample(c, 500, 1);  // noiseless -> all zero
    auto r = reward_from_record(rec, classes);
    for (double v : r) CHECK(v == 0.0);

    // force every event bit on
    for (uint64_t& w : rec.events) w = ~0ULL;
    size_t tail_bits = rec.shots % 64;
    for (uint32_t d = 0; d < rec.num_detectors; d++)
        if (tail_bits)
            rec.events[d * rec.words_per_row + rec.words_per_row - 1] = (1ULL << tail_bits) - 1;
    auto worst = reward_from_record(rec, classes);
    for (double v : worst) CHECK(v == doctest::Approx(-1.0));

    // identity with detection fractions averaged over class members
    Circuit noisy = bind_uniform(build_repetition_code_memory(3, 4), 0.01, 0.01, 0.01);
    DetectionRecord nr = sample(noisy, 20000, 9);
    auto fr = detection_fractions(nr);
    auto rw = reward_from_record(nr, classes);
    for (const auto& dc : classes) {
        double mean = 0;
        for (uint32_t det : dc.members) mean += fr[det];
        mean /= static_cast<double>(dc.members.size());
        CHECK(rw[dc.class_id] == doctest::Approx(-mean).epsilon(1e-12));
    }
}

TEST_CASE("update moves the mean toward a quadratic optimum") {
    AgentHyperparams hp = default_hp();
    const uint32_t P = 8;
    PolicyVector target(P, 0.5);
    FactorGraph g = full_graph(P);

    int improved = 0;
    for (uint64_t trial = 0; trial < 100; trial++) {
        PolicyDistribution policy = make_policy(P, hp);
        policy.epoch = trial;  // decorrelates the sampling stream per trial
        ReplayBuffer buf;
        buf.capacity = hp.buffer;
        buf.push(make_batch(policy, hp.batch, derive_seed(5, trial), target));
        PolicyVector before = policy.mu;
        update(policy, buf, g, hp);
        double dot = 0;
        for (uint32_t k = 0; k < P; k++) dot += (policy.mu[k] - before[k]) * (target[k] - before[k]);
        if (dot > 0) improved++;
    }
    CHECK(improved >= 95);
}

TEST_CASE("disconnected parameters receive only the entropy force") {
    AgentHyperparams hp = default_hp();
    hp.entropy_coeff = 0.05;
    const uint32_t P = 4;
    FactorGraph g = full_graph(P);
    g.param_classes[2].clear();  // detach parameter 2
    g.class_params[0].erase(std::find(g.class_params[0].begin(), g.class_params[0].end(), 2u));

    PolicyDistribution policy = make_policy(P, hp);
    ReplayBuffer buf;
    buf.capacity = hp.buffer;
    buf.push(make_batch(policy, hp.batch, 3, PolicyVector(P, 0.4)));
    double mu_before = policy.mu[2], ls_before = policy.log_sigma[2];
    update(policy, buf, g, hp);
    CHECK(policy.mu[2] == mu_before);
    CHECK(policy.log_sigma[2] == doctest::Approx(ls_before + hp.lr * hp.entropy_coeff).epsilon(1e-12));
}

TEST_CASE("entropy-only dynamics saturate sigma at its upper bound") {
    AgentHyperparams hp = default_hp();
    hp.entropy_coeff = 0.1;
    const uint32_t P = 3;
    FactorGraph g = full_graph(P);
    PolicyDistribution policy = make_policy(P, hp);
    for (uint64_t e = 0; e < 800; e++) {
        CandidateBatch cb;
        cb.epoch = e;
        cb.mu_s = policy.mu;
        cb.sigma_s.assign(P, std::exp(policy.log_sigma[0]));
        cb.thetas = sample_candidates(policy, hp.batch, e);
        cb.rewards.assign(hp.batch, std::vector<double>{0.0});  // degenerate class
        ReplayBuffer buf;
        buf.capacity = 1;
        buf.push(std::move(cb));
        update(policy, buf, g, hp);
        for (double ls : policy.log_sigma) {
            CHECK(ls <= std::log(hp.sigma_max) + 1e-12);
            CHECK(ls >= std::log(hp.sigma_min) - 1e-12);
        }
    }
    for (double ls : policy.log_sigma) CHECK(ls == doctest::Approx(std::log(hp.sigma_max)));
}

TEST_CASE("importance ratios stay inside the clip interval") {
    AgentHyperparams hp = default_hp();
    const uint32_t P = 5;
    FactorGraph g = full_graph(P);
    PolicyDistribution policy = make_policy(P, hp);
    ReplayBuffer buf;
    buf.capacity = 4;
    PolicyVector target(P, 0.2);
    for (uint64_t e = 0; e < 4; e++) {
        buf.push(make_batch(policy, hp.batch, e, target));
        // aggressive drift of the distribution makes the raw ratios extreme
        for (double& m : policy.mu) m += 0.3;
        for (double& ls : policy.log_sigma) ls = std::clamp(ls - 0.4, std::log(hp.sigma_min), 0.0);
        policy.epoch++;
    }
    UpdateStats st = update(policy, buf, g, hp);
    CHECK(st.max_ratio_used <= 1.0 + hp.clip + 1e-12);
    CHECK(st.min_ratio_used >= 1.0 - hp.clip - 1e-12);
}

TEST_CASE("no systematic step at the optimum of a symmetric model") {
    // Simulated rewards at mu = p_opt: Monte Carlo noise breaks the exact
    // antithetic cancellation, but the mean step must remain zero.
    Circuit plain = build_repetition_code_memory(3, 2);
    ErrorModel model = sample_error_model(8, plain, 1, {0.05, 0.05}, {1e-3, 1e-3}, {});
    DetectingRegionMap regions = compute_detecting_regions(plain);
    FactorGraph g = build_factor_graph(plain, regions, model.params);

    AgentHyperparams hp = default_hp();
    const uint32_t P = g.num_params;
    PolicyVector opt = optimal_policy(model, 0.0);

    std::vector<std::vector<double>> steps(P);
    const int epochs = 500;
    Circuit scratch = plain;
    for (int e = 0; e < epochs; e++) {
        PolicyDistribution policy = make_policy(P, hp);
        policy.mu = opt;
        policy.epoch = static_cast<uint64_t>(e);
        CandidateBatch cb;
        cb.epoch = policy.epoch;
        cb.mu_s = policy.mu;
        cb.sigma_s.assign(P, hp.sigma_init);
        cb.thetas = sample_candidates(policy, hp.batch, 55);
        for (size_t b = 0; b < cb.thetas.size(); b++) {
            rebind_noise(scratch, model, cb.thetas[b], 0.0);
            DetectionRecord rec = sample(scratch, 400, derive_seed(3, e, b));
            cb.rewards.push_back(reward_from_record(rec, g.classes));
        }
        ReplayBuffer buf;
        buf.capacity = 1;
        buf.push(std::move(cb));
        update(policy, buf, g, hp);
        for (uint32_t k = 0; k < P; k++) steps[k].push_back(policy.mu[k] - opt[k]);
    }
    double norm2 = 0, bound2 = 0;
    for (uint32_t k = 0; k < P; k++) {
        double m = mean_of(steps[k]);
        double sd = stddev_of(steps[k]);
        norm2 += m * m;
        bound2 += sd * sd / epochs;
    }
    CHECK(std::sqrt(norm2) < 3.0 * std::sqrt(bound2));
}

TEST_CASE("masking reduces per-parameter gradient variance") {
    Circuit plain = build_surface_code_memory(3, 3);
    ErrorModel model = sample_error_model(31, plain, 1, {0.01, 0.1}, {5e-4, 2e-3}, {});
    DetectingRegionMap regions = compute_detecting_regions(plain);
    FactorGraph masked = build_factor_graph(plain, regions, model.params);

    FactorGraph unmasked = masked;
    for (uint32_t k = 0; k < unmasked.num_params; k++) {
        unmasked.param_classes[k].clear();
        for (const auto& dc : unmasked.classes) unmasked.param_classes[k].push_back(dc.class_id);
    }

    AgentHyperparams hp = default_hp();
    hp.batch = 20;
    const uint32_t P = masked.num_params;
    PolicyVector opt = optimal_policy(model, 0.0);

    const int batches = 200;
    std::vector<std::vector<double>> g_masked(P), g_unmasked(P);
    Circuit scratch = plain;
    for (int t = 0; t < batches; t++) {
        PolicyDistribution policy = make_policy(P, hp);
        policy.mu = opt;
        policy.epoch = static_cast<uint64_t>(t);
        CandidateBatch cb;
        cb.epoch = policy.epoch;
        cb.mu_s = policy.mu;
        cb.sigma_s.assign(P, hp.sigma_init);
        cb.thetas = sample_candidates(policy, hp.batch, 91);
        for (const auto& th : cb.thetas) {
            rebind_noise(scratch, model, th, 0.0);
            DetectionRecord rec = sample(scratch, 512, derive_seed(7, t, &th - cb.thetas.data()));
            cb.rewards.push_back(reward_from_record(rec, masked.classes));
        }
        for (const FactorGraph* g : {&masked, &unmasked}) {
            PolicyDistribution p2 = policy;
            ReplayBuffer buf;
            buf.capacity = 1;
            buf.push(cb);
            update(p2, buf, *g, hp);
            for (uint32_t k = 0; k < P; k++) {
                double step = (p2.mu[k] - policy.mu[k]) / hp.lr;
                (g == &masked ? g_masked : g_unmasked)[k].push_back(step);
            }
        }
    }
    int better = 0;
    for (uint32_t k = 0; k < P; k++) {
        double vm = stddev_of(g_masked[k]);
        double vu = stddev_of(g_unmasked[k]);
        if (vm < vu) better++;
    }
    CHECK(better >= static_cast<int>(0.9 * P));
}

TEST_CASE("training updates are reproducible") {
    AgentHyperparams hp = default_hp();
    const uint32_t P = 4;
    FactorGraph g = full_graph(P);
    PolicyVector target(P, 0.3);
    auto run = [&]() {
        PolicyDistribution policy = make_policy(P, hp);
        ReplayBuffer buf;
        buf.capacity = hp.buffer;
        for (uint64_t e = 0; e < 5; e++) {
            buf.push(make_batch(policy, hp.batch, 33, target));
            update(policy, buf, g, hp);
        }
        return policy;
    };
    PolicyDistribution a = run(), b = run();
    CHECK(a.mu == b.mu);
    CHECK(a.log_sigma == b.log_sigma);
}

TEST_CASE("learned policy accessor returns the mean unchanged") {
    AgentHyperparams hp = default_hp();
    PolicyDistribution policy = make_policy(3, hp);
    policy.mu = {0.1, -0.2, 0.3};
    CHECK(learned_policy(policy) == policy.mu);
    sample_candidates(policy, 4, 1);
    CHECK(learned_policy(policy) == PolicyVector{0.1, -0.2, 0.3});
}
