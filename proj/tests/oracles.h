#pragma once

// Test-only reference implementations, kept independent of the library's
// propagation and matching code paths.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qecsteer/circuit.h"
#include "qecsteer/decoder.h"

namespace oracle {

using qecsteer::Circuit;
using qecsteer::Instruction;
using qecsteer::Op;

// Plain per-qubit frame walk with one Pauli inserted after instruction
// `pos`; returns the detector flip pattern and the observable flip.
struct Flip {
    std::vector<uint8_t> det;  // one entry per detector
    uint8_t obs = 0;
};

inline Flip propagate(const Circuit& c, uint32_t pos, uint32_t target, uint8_t pauli) {
    std::vector<uint8_t> fx(c.num_qubits(), 0), fz(c.num_qubits(), 0);
    std::vector<uint8_t> rec(c.num_measurements, 0);
    uint32_t m = 0;
    for (uint32_t i = 0; i < c.instructions.size(); i++) {
        const Instruction& ins = c.instructions[i];
        if (ins.op == Op::H) {
            for (uint32_t q : ins.targets) {
                uint8_t t = fx[q];
                fx[q] = fz[q];
                fz[q] = t;
            }
        } else if (ins.op == Op::Cz) {
            for (size_t k = 0; k + 1 < ins.targets.size(); k += 2) {
                fz[ins.targets[k]] ^= fx[ins.targets[k + 1]];
                fz[ins.targets[k + 1]] ^= fx[ins.targets[k]];
            }
        } else if (ins.op == Op::ResetZ) {
            for (uint32_t q : ins.targets) fx[q] = fz[q] = 0;
        } else if (ins.op == Op::MeasureZ) {
            for (uint32_t q : ins.targets) rec[m++] = fx[q];
        }
        if (i == pos) {
            if (pauli & 1) fx[target] ^= 1;
            if (pauli & 2) fz[target] ^= 1;
        }
    }
    Flip f;
    f.det.resize(c.detectors.size(), 0);
    for (const auto& det : c.detectors) {
        uint8_t par = 0;
        for (uint32_t mm : det.measurements) par ^= rec[mm];
        f.det[det.det_id] = par;
    }
    for (uint32_t mm : c.observable) f.obs ^= rec[mm];
    return f;
}

// Exact firing probability of every detector for a bound circuit, from the
// independence of noise slots: P(det) = (1 - prod_slots (1 - 2 q_slot)) / 2
// where q_slot is the probability that the slot's sampled outcome flips the
// detector.
inline std::vector<double> exact_detector_probabilities(const Circuit& c) {
    std::vector<double> factor(c.detectors.size(), 1.0);
    for (uint32_t pos : c.noise_slots) {
        const Instruction& ins = c.instructions[pos];
        double p = ins.prob;
        if (p < 0) throw std::invalid_argument("unbound slot");
        if (p == 0) continue;

        // flip pattern of every non-identity outcome
        std::vector<std::vector<uint8_t>> outcome_flips;
        std::vector<double> outcome_probs;
        if (ins.op == Op::XFlip) {
            outcome_flips.push_back(propagate(c, pos, ins.targets[0], 1).det);
            outcome_probs.push_back(p);
        } else if (ins.op == Op::Depolarize1) {
            for (uint8_t pl : {1, 2, 3}) {
                outcome_flips.push_back(propagate(c, pos, ins.targets[0], pl).det);
                outcome_probs.push_back(p / 3);
            }
        } else if (ins.op == Op::Depolarize2) {
            // frame linearity: a two-qubit Pauli flips the XOR of its parts
            std::vector<std::vector<uint8_t>> part(4);
            part[0] = propagate(c, pos, ins.targets[0], 1).det;  // Xa
            part[1] = propagate(c, pos, ins.targets[0], 2).det;  // Za
            part[2] = propagate(c, pos, ins.targets[1], 1).det;  // Xb
            part[3] = propagate(c, pos, ins.targets[1], 2).det;  // Zb
            for (int v = 1; v < 16; v++) {
                std::vector<uint8_t> acc(c.detectors.size(), 0);
                for (int bit = 0; bit < 4; bit++)
                    if (v >> bit & 1)
                        for (size_t d = 0; d < acc.size(); d++) acc[d] ^= part[bit][d];
                outcome_flips.push_back(std::move(acc));
                outcome_probs.push_back(p / 15);
            }
        }

        for (size_t d = 0; d < c.detectors.size(); d++) {
            double q = 0;
            for (size_t o = 0; o < outcome_flips.size(); o++)
                if (outcome_flips[o][d]) q += outcome_probs[o];
            factor[d] *= 1.0 - 2.0 * q;
        }
    }
    std::vector<double> prob(c.detectors.size());
    for (size_t d = 0; d < prob.size(); d++) prob[d] = 0.5 * (1.0 - factor[d]);
    return prob;
}

// Minimum pairing weight over fired detectors with per-node boundary
// routes; exhaustive, no pruning.
inline double min_pairing_weight(const qecsteer::DecodingGraph& g, std::vector<uint32_t> fired) {
    if (fired.empty()) return 0;
    uint32_t first = fired.front();
    fired.erase(fired.begin());
    // boundary route for `first`
    double best;
    {
        auto rest = fired;
        best = g.node_dist(first, g.boundary()) + min_pairing_weight(g, rest);
    }
    for (size_t j = 0; j < fired.size(); j++) {
        auto rest = fired;
        rest.erase(rest.begin() + static_cast<int64_t>(j));
        double w = g.node_dist(first, fired[j]) + min_pairing_weight(g, rest);
        if (w < best) best = w;
    }
    return best;
}

}  // namespace oracle
