#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "oracles.h"
#include "qecsteer/circuit.h"
#include "qecsteer/noise.h"
#include "qecsteer/simulator.h"

using namespace qecsteer;

TEST_CASE("zero noise gives an all-zero record") {
    Circuit c = bind_uniform(build_repetition_code_memory(3, 2), 0, 0, 0);
    DetectionRecord rec = sample(c, 1000, 1);
    CHECK(count_events(rec) == 0);
    auto rates = detection_fractions(rec);
    for (double r : rates) CHECK(r == 0.0);
    CHECK(mean_detection_rate(rec) == 0.0);
}

TEST_CASE("a deterministic injected X fires exactly the predicted detectors") {
    Circuit c = bind_uniform(build_repetition_code_memory(3, 2), 0, 0, 0);
    // first data-qubit depolarization slot of cycle 1
    uint32_t pos = 0;
    for (uint32_t idx : c.noise_slots) {
        const Instruction& ins = c.instructions[idx];
        if (ins.op == Op::Depolarize1 && ins.cycle == 1 && ins.targets[0] == 1) pos = idx;
    }
    REQUIRE(pos != 0);
    auto expect = oracle::propagate(c, pos, 1, 1);

    const uint64_t shots = 192;
    std::vector<PauliInjection> inj;
    for (uint64_t s = 0; s < shots; s++) inj.push_back({pos, 1, 1, s});
    DetectionRecord rec = sample_with_injections(c, shots, 3, inj);
    auto counts = per_detector_counts(rec);
    for (size_t d = 0; d < counts.size(); d++)
        CHECK(counts[d] == (expect.det[d] ? shots : 0));
    uint64_t flips = 0;
    for (uint64_t w : rec.logical) flips += std::popcount(w);
    CHECK(flips == (expect.obs ? shots : 0));
}

TEST_CASE("per-detector rates match the exact enumeration oracle") {
    for (uint32_t T : {1u, 2u}) {
        Circuit c = bind_uniform(build_repetition_code_memory(3, T), 0.01, 0.01, 0.01);
        auto exact = oracle::exact_detector_probabilities(c);
        const uint64_t shots = 1000000;
        DetectionRecord rec = sample(c, shots, 123, 4);
        auto rates = detection_fractions(rec);
        for (size_t d = 0; d < rates.size(); d++) {
            double se = std::sqrt(exact[d] * (1 - exact[d]) / static_cast<double>(shots));
            CHECK(std::abs(rates[d] - exact[d]) <= 3.5 * se);
        }
    }
}

TEST_CASE("fully depolarizing noise drives bulk detectors to one half") {
    Circuit c = bind_uniform(build_repetition_code_memory(3, 4), 0.75, 0.9375, 0.5);
    DetectionRecord rec = sample(c, 100000, 5, 2);
    auto rates = detection_fractions(rec);
    for (const Detector& det : c.detectors) {
        if (det.time_coord == 0 || det.time_coord == static_cast<int>(c.num_cycles)) continue;
        CHECK(rates[det.det_id] > 0.4);
        CHECK(rates[det.det_id] < 0.6);
    }
}

TEST_CASE("event counting identities") {
    Circuit c = bind_uniform(build_repetition_code_memory(3, 2), 5e-3, 5e-3, 5e-3);
    DetectionRecord rec = sample(c, 77777, 9);
    auto counts = per_detector_counts(rec);
    uint64_t total = 0;
    for (uint64_t n : counts) total += n;
    CHECK(count_events(rec) == total);
    double mean_dr = mean_detection_rate(rec);
    CHECK(static_cast<double>(total) ==
          doctest::Approx(mean_dr * static_cast<double>(rec.shots) * rec.num_detectors).epsilon(1e-9));
}

TEST_CASE("seed determinism and thread invariance") {
    Circuit c = bind_uniform(build_surface_code_memory(3, 3), 2e-3, 4e-3, 1e-3);
    DetectionRecord a = sample(c, 20000, 42, 1);
    DetectionRecord b = sample(c, 20000, 42, 7);
    CHECK(a.events == b.events);
    CHECK(a.logical == b.logical);
    DetectionRecord other = sample(c, 20000, 43, 1);
    CHECK(a.events != other.events);
}

TEST_CASE("block-aligned runs concatenate") {
    Circuit c = bind_uniform(build_repetition_code_memory(3, 2), 3e-3, 3e-3, 3e-3);
    const uint64_t half = kShotBlock;
    DetectionRecord whole = sample(c, 2 * half, 11);
    DetectionRecord lo = sample(c, half, 11, 1, 0);
    DetectionRecord hi = sample(c, half, 11, 1, half);
    const size_t wh = half / 64;
    for (uint32_t d = 0; d < whole.num_detectors; d++)
        for (size_t w = 0; w < wh; w++) {
            CHECK(whole.events[d * whole.words_per_row + w] == lo.events[d * lo.words_per_row + w]);
            CHECK(whole.events[d * whole.words_per_row + wh + w] == hi.events[d * hi.words_per_row + w]);
        }
}

TEST_CASE("small-p rates are first-order linear in the slot probabilities") {
    Circuit plain = build_surface_code_memory(3, 2);
    const double p = 5e-4;
    Circuit c = bind_uniform(plain, p, p, p);

    // linear prediction: sum over slot outcomes of p_outcome * [flips det]
    std::vector<double> lin(c.detectors.size(), 0.0);
    for (uint32_t pos : c.noise_slots) {
        const Instruction& ins = c.instructions[pos];
        std::vector<std::vector<uint8_t>> parts;
        for (uint32_t q : ins.targets)
            for (uint8_t pl : {kPauliX, kPauliZ}) parts.push_back(oracle::propagate(c, pos, q, pl).det);
        auto add_outcome = [&](std::vector<int> ids, double pr) {
            for (size_t d = 0; d < lin.size(); d++) {
                uint8_t f = 0;
                for (int i : ids) f ^= parts[i][d];
                if (f) lin[d] += pr;
            }
        };
        if (ins.op == Op::XFlip) add_outcome({0}, p);
        if (ins.op == Op::Depolarize1) {
            add_outcome({0}, p / 3);
            add_outcome({1}, p / 3);
            add_outcome({0, 1}, p / 3);
        }
        if (ins.op == Op::Depolarize2)
            for (int v = 1; v < 16; v++) {
                std::vector<int> ids;
                for (int bit = 0; bit < 4; bit++)
                    if (v >> bit & 1) ids.push_back(bit);
                add_outcome(ids, p / 15);
            }
    }

    const uint64_t shots = 10000000;
    DetectionRecord rec = sample(c, shots, 2024, 8);
    auto rates = detection_fractions(rec);
    for (size_t d = 0; d < rates.size(); d++) {
        double se = std::sqrt(lin[d] / static_cast<double>(shots));
        CHECK(std::abs(rates[d] - lin[d]) <= lin[d] * 0.05 + 3 * se);
    }
}

TEST_CASE("record files round-trip") {
    Circuit c = bind_uniform(build_repetition_code_memory(3, 2), 0.02, 0.02, 0.02);
    DetectionRecord rec = sample(c, 1000, 3);
    std::string base = "/tmp/qecsteer_test_record";
    write_record_files(rec, base);
    DetectionRecord back = read_record_files(base);
    CHECK(back.num_detectors == rec.num_detectors);
    CHECK(back.shots == rec.shots);
    CHECK(back.events == rec.events);
    uint64_t mask = (rec.shots % 64) ? ((1ULL << (rec.shots % 64)) - 1) : ~0ULL;
    CHECK((back.logical.back() & mask) == (rec.logical.back() & mask));
    std::remove(base.c_str());
    std::remove((base + ".b8").c_str());
}
