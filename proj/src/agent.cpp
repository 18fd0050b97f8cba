#include "qecsteer/agent.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qecsteer/rng.h"

namespace qecsteer {

namespace {
constexpr double kHalfLog2PiE = 1.4189385332046727417803297364056;  // 0.5*log(2*pi*e)
}

void AgentHyperparams::validate() const {
    if (batch < 2 || batch % 2 != 0) throw std::invalid_argument("batch must be even and >= 2");
    if (lr <= 0 || sigma_init <= 0 || buffer < 1) throw std::invalid_argument("agent hyperparams must be positive");
    if (clip <= 0 || clip > 1) throw std::invalid_argument("clip ratio must be in (0, 1]");
    if (entropy_coeff < 0) throw std::invalid_argument("entropy coefficient must be >= 0");
    if (sigma_min <= 0 || sigma_max < sigma_min) throw std::invalid_argument("bad sigma bounds");
    if (sigma_init < sigma_min || sigma_init > sigma_max) throw std::invalid_argument("sigma_init outside bounds");
}

double PolicyDistribution::entropy() const {
    double h = 0;
    for (double ls : log_sigma) h += ls + kHalfLog2PiE;
    return h;
}

PolicyDistribution make_policy(uint32_t num_params, const AgentHyperparams& hp) {
    hp.validate();
    PolicyDistribution p;
    p.mu.assign(num_params, 0.0);
    p.log_sigma.assign(num_params, std::log(hp.sigma_init));
    return p;
}

std::vector<PolicyVector> sample_candidates(const PolicyDistribution& policy, uint32_t batch,
                                            uint64_t seed) {
    if (batch < 2 || batch % 2 != 0) throw std::invalid_argument("batch must be even and >= 2");
    const size_t n = policy.mu.size();
    std::vector<PolicyVector> out(batch, PolicyVector(n));
    RngStream rng(derive_seed(seed, seed_tag::kAgent, policy.epoch), 0);
    for (uint32_t b = 0; b < batch; b += 2) {
        for (size_t k = 0; k < n; k++) {
            double step = std::exp(policy.log_sigma[k]) * rng.next_gaussian();
            out[b][k] = policy.mu[k] + step;
            out[b + 1][k] = policy.mu[k] - step;
        }
    }
    return out;
}

std::vector<double> reward_from_record(const DetectionRecord& rec,
                                       const std::vector<DetectorClass>& classes) {
    if (rec.shots < 1) throw std::invalid_argument("empty record");
    auto counts = per_detector_counts(rec);
    std::vector<double> r(classes.size());
    for (const DetectorClass& dc : classes) {
        uint64_t events = 0;
        for (uint32_t det : dc.members) events += counts[det];
        r[dc.class_id] =
            -static_cast<double>(events) / (static_cast<double>(rec.shots) * dc.members.size());
    }
    return r;
}

UpdateStats update(PolicyDistribution& policy, const ReplayBuffer& buffer, const FactorGraph& graph,
                   const AgentHyperparams& hp) {
    hp.validate();
    if (buffer.batches.empty()) throw std::invalid_argument("empty replay buffer");
    const size_t P = policy.mu.size();
    const size_t C = graph.classes.size();

    std::vector<double> sigma(P);
    for (size_t k = 0; k < P; k++) sigma[k] = std::exp(policy.log_sigma[k]);

    std::vector<double> g_mu(P, 0.0), g_ls(P, 0.0);
    UpdateStats stats;
    stats.max_ratio_used = 1.0 - hp.clip;
    stats.min_ratio_used = 1.0 + hp.clip;
    size_t total = 0;

    std::vector<double> adv;  // per (candidate-in-batch, class)
    for (const CandidateBatch& cb : buffer.batches) {
        const size_t B = cb.thetas.size();
        total += B;
        // Per-class standardized advantages within this sampling batch; a
        // degenerate class (zero spread) contributes nothing.
        adv.assign(B * C, 0.0);
        for (size_t c = 0; c < C; c++) {
            double mean = 0;
            for (size_t b = 0; b < B; b++) mean += cb.rewards[b][c];
            mean /= static_cast<double>(B);
            double var = 0;
            for (size_t b = 0; b < B; b++) {
                double d = cb.rewards[b][c] - mean;
                var += d * d;
            }
            double sd = std::sqrt(var / static_cast<double>(B));
            if (sd == 0) continue;
            for (size_t b = 0; b < B; b++) adv[b * C + c] = (cb.rewards[b][c] - mean) / (sd + 1e-8);
        }
        for (size_t b = 0; b < B; b++) {
            const PolicyVector& th = cb.thetas[b];
            for (size_t k = 0; k < P; k++) {
                const auto& neigh = graph.param_classes[k];
                if (neigh.empty()) continue;
                double a = 0;
                for (uint32_t c : neigh) a += adv[b * C + c];
                a /= static_cast<double>(neigh.size());
                if (a == 0) continue;

                // per-coordinate Gaussian importance ratio, current vs sampling time
                double zc = (th[k] - policy.mu[k]) / sigma[k];
                double zs = (th[k] - cb.mu_s[k]) / cb.sigma_s[k];
                double log_ratio = std::log(cb.sigma_s[k]) - policy.log_sigma[k] + 0.5 * (zs * zs - zc * zc);
                double ratio = std::clamp(std::exp(log_ratio), 1.0 - hp.clip, 1.0 + hp.clip);
                stats.max_ratio_used = std::max(stats.max_ratio_used, ratio);
                stats.min_ratio_used = std::min(stats.min_ratio_used, ratio);

                double w = ratio * a;
                g_mu[k] += w * zc / sigma[k];
                g_ls[k] += w * (zc * zc - 1.0);
            }
        }
    }

    const double inv_total = 1.0 / static_cast<double>(total);
    const double lo = std::log(hp.sigma_min), hi = std::log(hp.sigma_max);
    for (size_t k = 0; k < P; k++) {
        g_mu[k] *= inv_total;
        g_ls[k] = g_ls[k] * inv_total + hp.entropy_coeff;
        policy.mu[k] += hp.lr * g_mu[k];
        policy.log_sigma[k] = std::clamp(policy.log_sigma[k] + hp.lr * g_ls[k], lo, hi);
        stats.grad_mu_norm += g_mu[k] * g_mu[k];
        stats.grad_logsigma_norm += g_ls[k] * g_ls[k];
    }
    stats.grad_mu_norm = std::sqrt(stats.grad_mu_norm);
    stats.grad_logsigma_norm = std::sqrt(stats.grad_logsigma_norm);
    policy.epoch++;
    return stats;
}

}  // namespace qecsteer
