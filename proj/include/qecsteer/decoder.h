#pragma once

#include <cstdint>
#include <vector>

#include "qecsteer/circuit.h"
#include "qecsteer/simulator.h"

namespace qecsteer {

enum class DecodeMethod : uint8_t { Mwpm, UnionFind, Exhaustive };
enum class PriorKind : uint8_t { TrueModel, Uniform };

struct DecodingEdge {
    int32_t a, b;  // detector ids, -1 = boundary
    double q;
    double weight;  // log((1-q)/q), clamped to (0, 40]
    uint8_t obs;    // parity of the logical observable flipped by this mechanism
};

struct DecodingGraph {
    uint32_t num_detectors = 0;
    std::vector<DecodingEdge> edges;
    std::vector<std::vector<uint32_t>> incident;  // node -> edge ids; node D is the boundary
    // Mean bound probability over the circuit's noise slots; the scaling
    // harness reports it as the average physical error rate of a policy.
    double mean_error_rate = 0;

    // Matching tables (shortest-path distance and path observable parity
    // between all nodes including the boundary). Built by prepare_matching.
    bool tables_ready = false;
    std::vector<double> dist;
    std::vector<uint8_t> path_obs;

    uint32_t boundary() const { return num_detectors; }
    double node_dist(uint32_t a, uint32_t b) const { return dist[a * (num_detectors + 1ull) + b]; }
    uint8_t node_obs(uint32_t a, uint32_t b) const { return path_obs[a * (num_detectors + 1ull) + b]; }

    static constexpr double kMaxWeight = 40.0;
};

// Enumerates every (site, Pauli, cycle) mechanism by propagation and builds
// the matchable graph. Mechanisms with more than two symptoms decompose
// into their per-qubit X/Z components; parallel mechanisms merge by XOR
// probability composition. The circuit must have bound probabilities for
// the true-model prior.
DecodingGraph build_decoding_graph(const Circuit& c, PriorKind prior = PriorKind::TrueModel,
                                   double q0 = 1e-3);

void prepare_matching(DecodingGraph& g);

// Per-shot predicted logical flips, bit-packed like DetectionRecord rows.
std::vector<uint64_t> decode(const DecodingGraph& g, const DetectionRecord& rec, DecodeMethod method,
                             int threads = 1);

// Exact MWPM on one syndrome; exposed for weight-level verification.
struct MwpmSolution {
    double weight = 0;
    uint8_t obs = 0;
};
MwpmSolution mwpm_solve(const DecodingGraph& g, const std::vector<uint32_t>& fired);

struct LogicalStats {
    uint64_t shots = 0;
    uint64_t errors = 0;
    uint32_t cycles = 0;
    double p_err = 0;
    double eps_l = 0;          // per-cycle rate from the decay inversion
    bool anti_learning = false;  // p_err > 1/2
};

LogicalStats logical_error_rate(const std::vector<uint64_t>& predictions, const DetectionRecord& rec);

// eps_L = (1 - (1 - 2 p_err)^(1/T)) / 2
double per_cycle_error(double p_err, uint32_t T);
double accumulate_p_err(double eps_l, uint32_t T);  // inverse of the above

// Lambda = Lambda* (eps_L* / eps_L)^(2/(d+1))
double lambda_point_estimate(double eps_l, uint32_t d, double lambda_star, double eps_l_star);

}  // namespace qecsteer
