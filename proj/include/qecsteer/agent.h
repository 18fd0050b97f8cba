#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "qecsteer/detgraph.h"
#include "qecsteer/noise.h"
#include "qecsteer/simulator.h"

namespace qecsteer {

struct AgentHyperparams {
    uint32_t batch = 50;          // must be even (mirrored sampling)
    double lr = 0.05;
    double clip = 0.2;            // importance-ratio clip kappa
    double entropy_coeff = 0.01;  // lambda_H
    uint32_t buffer = 4;          // replay depth in epochs
    double sigma_init = 0.15;
    double sigma_min = 1e-3;
    double sigma_max = 1.0;

    void validate() const;
};

// Factorized Gaussian over all control parameters (rescaled units).
struct PolicyDistribution {
    std::vector<double> mu;
    std::vector<double> log_sigma;
    uint64_t epoch = 0;

    double entropy() const;  // sum_k (log sigma_k + 0.5 log(2 pi e))
};

PolicyDistribution make_policy(uint32_t num_params, const AgentHyperparams& hp);

// One epoch's sampled candidates with rewards and the sampling-time
// distribution snapshot used for importance ratios.
struct CandidateBatch {
    uint64_t epoch = 0;
    std::vector<double> mu_s, sigma_s;
    std::vector<PolicyVector> thetas;
    std::vector<std::vector<double>> rewards;  // batch x classes, entries in [-1, 0]
};

struct ReplayBuffer {
    uint32_t capacity = 4;
    std::deque<CandidateBatch> batches;

    void push(CandidateBatch b) {
        batches.push_back(std::move(b));
        while (batches.size() > capacity) batches.pop_front();
    }
};

// Mirrored (antithetic) Gaussian sampling: theta = mu +/- sigma * z in
// consecutive pairs. Deterministic per seed.
std::vector<PolicyVector> sample_candidates(const PolicyDistribution& policy, uint32_t batch,
                                            uint64_t seed);

// r_c = -(events in class c) / (shots * |class c|)
std::vector<double> reward_from_record(const DetectionRecord& rec,
                                       const std::vector<DetectorClass>& classes);

struct UpdateStats {
    double grad_mu_norm = 0;
    double grad_logsigma_norm = 0;
    double max_ratio_used = 1;  // after clipping; stays within [1-k, 1+k]
    double min_ratio_used = 1;
};

// Masked PEPG update: per-class standardized advantages (within each
// sampling batch), per-parameter advantages averaged over factor-graph
// neighbors, per-coordinate clipped Gaussian importance ratios, entropy
// bonus on log sigma.
UpdateStats update(PolicyDistribution& policy, const ReplayBuffer& buffer, const FactorGraph& graph,
                   const AgentHyperparams& hp);

inline const std::vector<double>& learned_policy(const PolicyDistribution& p) { return p.mu; }

}  // namespace qecsteer
