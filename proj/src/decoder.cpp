#include "qecsteer/decoder.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/maximum_weighted_matching.hpp>

#include "qecsteer/util.h"

namespace qecsteer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double edge_weight_from_prob(double q) {
    if (q <= 0) return DecodingGraph::kMaxWeight;
    if (q >= 0.5) return 1e-9;
    return std::min(DecodingGraph::kMaxWeight, std::log((1.0 - q) / q));
}

// symmetric difference of two sorted detector lists
std::vector<uint32_t> symdiff(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
    std::vector<uint32_t> out;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace

DecodingGraph build_decoding_graph(const Circuit& c, PriorKind prior, double q0) {
    DecodingGraph g;
    g.num_detectors = static_cast<uint32_t>(c.detectors.size());

    struct Key {
        int32_t a, b;
        uint8_t obs;
        bool operator<(const Key& o) const {
            return std::tie(a, b, obs) < std::tie(o.a, o.b, o.obs);
        }
    };
    std::map<Key, double> merged;  // XOR-composed probability per edge

    auto contribute = [&](const std::vector<uint32_t>& dets, uint8_t obs, double p) {
        if (p <= 0) return;
        if (dets.empty()) {
            if (obs) throw std::runtime_error("undetectable mechanism flips the observable");
            return;
        }
        if (dets.size() > 2) throw std::runtime_error("mechanism component with > 2 symptoms");
        Key key{static_cast<int32_t>(dets[0]), dets.size() == 2 ? static_cast<int32_t>(dets[1]) : -1, obs};
        double& q = merged[key];
        q = q * (1.0 - p) + p * (1.0 - q);
    };

    double prob_sum = 0;
    size_t slot_count = 0;
    for (uint32_t pos : c.noise_slots) {
        const Instruction& ins = c.instructions[pos];
        double p = prior == PriorKind::TrueModel ? ins.prob : q0;
        if (prior == PriorKind::TrueModel && p < 0) throw std::invalid_argument("unbound noise slot");
        prob_sum += p;
        slot_count++;
        if (p <= 0) continue;

        // Atom effects: one per (target, axis); Y and two-qubit outcomes
        // combine as symmetric differences of their atoms.
        struct Atom {
            std::vector<uint32_t> dets;
            uint8_t obs;
        };
        std::vector<Atom> atoms;  // 2 per target: X then Z
        for (uint32_t q : ins.targets)
            for (uint8_t axis : {kPauliX, kPauliZ}) {
                ErrorEffect eff = propagate_single_error(c, pos, q, axis);
                atoms.push_back({std::move(eff.flipped_detectors), static_cast<uint8_t>(eff.flips_observable)});
            }

        auto emit_outcome = [&](const std::vector<int>& atom_ids, double pr) {
            std::vector<uint32_t> dets;
            uint8_t obs = 0;
            for (int a : atom_ids) {
                dets = symdiff(dets, atoms[a].dets);
                obs ^= atoms[a].obs;
            }
            if (dets.size() <= 2) {
                contribute(dets, obs, pr);
            } else {
                // split into matchable per-qubit X/Z components
                for (int a : atom_ids) contribute(atoms[a].dets, atoms[a].obs, pr);
            }
        };

        switch (ins.op) {
            case Op::XFlip:
                emit_outcome({0}, p);
                break;
            case Op::Depolarize1:
                emit_outcome({0}, p / 3);      // X
                emit_outcome({1}, p / 3);      // Z
                emit_outcome({0, 1}, p / 3);   // Y
                break;
            case Op::Depolarize2:
                for (int v = 1; v < 16; v++) {
                    std::vector<int> ids;
                    if (v & 1) ids.push_back(0);  // Xa
                    if (v & 2) ids.push_back(1);  // Za
                    if (v & 4) ids.push_back(2);  // Xb
                    if (v & 8) ids.push_back(3);  // Zb
                    emit_outcome(ids, p / 15);
                }
                break;
            default:
                break;
        }
    }
    g.mean_error_rate = slot_count ? prob_sum / static_cast<double>(slot_count) : 0.0;

    g.incident.resize(g.num_detectors + 1);
    for (const auto& [key, q] : merged) {
        if (q <= 0) continue;
        DecodingEdge e{key.a, key.b, q, edge_weight_from_prob(q), key.obs};
        uint32_t idx = static_cast<uint32_t>(g.edges.size());
        g.edges.push_back(e);
        g.incident[e.a].push_back(idx);
        g.incident[e.b < 0 ? g.boundary() : static_cast<uint32_t>(e.b)].push_back(idx);
    }
    return g;
}

void prepare_matching(DecodingGraph& g) {
    if (g.tables_ready) return;
    const uint32_t N = g.num_detectors + 1;
    g.dist.assign(static_cast<size_t>(N) * N, kInf);
    g.path_obs.assign(static_cast<size_t>(N) * N, 0);
    // Dijkstra from every node; path_obs tracks label parity along the tree.
    for (uint32_t src = 0; src < N; src++) {
        double* drow = g.dist.data() + static_cast<size_t>(src) * N;
        uint8_t* orow = g.path_obs.data() + static_cast<size_t>(src) * N;
        std::priority_queue<std::pair<double, uint32_t>, std::vector<std::pair<double, uint32_t>>,
                            std::greater<>> pq;
        drow[src] = 0;
        pq.push({0.0, src});
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (d > drow[u]) continue;
            for (uint32_t ei : g.incident[u]) {
                const DecodingEdge& e = g.edges[ei];
                uint32_t au = static_cast<uint32_t>(e.a);
                uint32_t bu = e.b < 0 ? g.boundary() : static_cast<uint32_t>(e.b);
                uint32_t v = au == u ? bu : au;
                double nd = d + e.weight;
                if (nd < drow[v]) {
                    drow[v] = nd;
                    orow[v] = orow[u] ^ e.obs;
                    pq.push({nd, v});
                }
            }
        }
    }
    g.tables_ready = true;
}

namespace {

// Exact minimum-weight pairing over fired nodes plus one boundary copy per
// node. Recursion handles small syndromes; boost's blossom implementation
// (via the max-weight reduction) covers the rest.
struct PairingProblem {
    const DecodingGraph& g;
    const std::vector<uint32_t>& fired;

    double node_pair(uint32_t i, uint32_t j) const { return g.node_dist(fired[i], fired[j]); }
    double node_boundary(uint32_t i) const { return g.node_dist(fired[i], g.boundary()); }
    uint8_t obs_pair(uint32_t i, uint32_t j) const { return g.node_obs(fired[i], fired[j]); }
    uint8_t obs_boundary(uint32_t i) const { return g.node_obs(fired[i], g.boundary()); }
};

void enumerate_pairings(const PairingProblem& pp, std::vector<uint8_t>& used, uint32_t k, double acc,
                        uint8_t acc_obs, double& best, uint8_t& best_obs) {
    uint32_t i = 0;
    while (i < k && used[i]) i++;
    if (i == k) {
        if (acc < best) {
            best = acc;
            best_obs = acc_obs;
        }
        return;
    }
    if (acc >= best) return;
    used[i] = 1;
    // boundary route
    enumerate_pairings(pp, used, k, acc + pp.node_boundary(i), acc_obs ^ pp.obs_boundary(i), best, best_obs);
    for (uint32_t j = i + 1; j < k; j++) {
        if (used[j]) continue;
        used[j] = 1;
        enumerate_pairings(pp, used, k, acc + pp.node_pair(i, j), acc_obs ^ pp.obs_pair(i, j), best, best_obs);
        used[j] = 0;
    }
    used[i] = 0;
}

MwpmSolution mwpm_boost(const PairingProblem& pp, uint32_t k) {
    using BGraph = boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS, boost::no_property,
                                         boost::property<boost::edge_weight_t, long long>>;
    constexpr long long kBig = 1000000000000LL;   // forces perfect matchings
    constexpr double kScale = 1e6;                // weight quantization
    BGraph bg(2 * k);
    for (uint32_t i = 0; i < k; i++) {
        boost::add_edge(i, k + i, kBig - static_cast<long long>(std::llround(pp.node_boundary(i) * kScale)), bg);
        for (uint32_t j = i + 1; j < k; j++) {
            boost::add_edge(i, j, kBig - static_cast<long long>(std::llround(pp.node_pair(i, j) * kScale)), bg);
            boost::add_edge(k + i, k + j, kBig, bg);
        }
    }
    std::vector<boost::graph_traits<BGraph>::vertex_descriptor> mate(2 * k);
    boost::maximum_weighted_matching(bg, &mate[0]);
    MwpmSolution sol;
    for (uint32_t i = 0; i < k; i++) {
        auto m = mate[i];
        if (m == boost::graph_traits<BGraph>::null_vertex()) throw std::runtime_error("matching failed");
        if (m == k + i) {
            sol.weight += pp.node_boundary(i);
            sol.obs ^= pp.obs_boundary(i);
        } else if (m < k && m > i) {
            sol.weight += pp.node_pair(i, static_cast<uint32_t>(m));
            sol.obs ^= pp.obs_pair(i, static_cast<uint32_t>(m));
        }
    }
    return sol;
}

}  // namespace

MwpmSolution mwpm_solve(const DecodingGraph& g, const std::vector<uint32_t>& fired) {
    if (!g.tables_ready) throw std::logic_error("prepare_matching not called");
    if (fired.empty()) return {};
    PairingProblem pp{g, fired};
    const uint32_t k = static_cast<uint32_t>(fired.size());
    if (k <= 7) {
        std::vector<uint8_t> used(k, 0);
        double best = kInf;
        uint8_t best_obs = 0;
        enumerate_pairings(pp, used, k, 0.0, 0, best, best_obs);
        return {best, best_obs};
    }
    return mwpm_boost(pp, k);
}

namespace {

// Weighted-growth union-find cluster decoder with peeling.
struct UfScratch {
    std::vector<int32_t> parent;      // DSU over nodes, -1 untouched
    std::vector<uint8_t> parity;      // per root: fired-count parity
    std::vector<uint8_t> boundary;    // per root: cluster touches the boundary
    std::vector<std::vector<uint32_t>> nodes;  // per root: member nodes
    std::vector<double> grown;        // per edge
    std::vector<uint8_t> grown_full;
    std::vector<uint32_t> full_edges;

    explicit UfScratch(const DecodingGraph& g)
        : parent(g.num_detectors + 1, -1),
          parity(g.num_detectors + 1, 0),
          boundary(g.num_detectors + 1, 0),
          nodes(g.num_detectors + 1),
          grown(g.edges.size(), 0),
          grown_full(g.edges.size(), 0) {}

    void reset(const DecodingGraph& g) {
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(parity.begin(), parity.end(), 0);
        std::fill(boundary.begin(), boundary.end(), 0);
        for (auto& n : nodes) n.clear();
        std::fill(grown.begin(), grown.end(), 0.0);
        std::fill(grown_full.begin(), grown_full.end(), 0);
        full_edges.clear();
    }

    int32_t find(int32_t v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    }

    void touch(uint32_t v, bool fired, bool is_boundary) {
        if (parent[v] != -1) return;
        parent[v] = static_cast<int32_t>(v);
        parity[v] = fired ? 1 : 0;
        boundary[v] = is_boundary ? 1 : 0;
        nodes[v] = {v};
    }

    void unite(int32_t a, int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (nodes[a].size() < nodes[b].size()) std::swap(a, b);
        parent[b] = a;
        parity[a] ^= parity[b];
        boundary[a] |= boundary[b];
        nodes[a].insert(nodes[a].end(), nodes[b].begin(), nodes[b].end());
        nodes[b].clear();
    }
};

uint8_t decode_one_union_find(const DecodingGraph& g, const std::vector<uint32_t>& fired, UfScratch& sc) {
    if (fired.empty()) return 0;
    sc.reset(g);
    for (uint32_t f : fired) sc.touch(f, true, false);

    std::vector<uint8_t> fired_mask(g.num_detectors + 1, 0);
    for (uint32_t f : fired) fired_mask[f] = 1;

    for (;;) {
        // roots of odd clusters not yet attached to the boundary
        std::vector<int32_t> active;
        for (uint32_t v = 0; v <= g.num_detectors; v++) {
            if (sc.parent[v] == -1) continue;
            int32_t r = sc.find(static_cast<int32_t>(v));
            if (static_cast<uint32_t>(r) != v) continue;
            if (sc.parity[r] && !sc.boundary[r]) active.push_back(r);
        }
        if (active.empty()) break;

        // each active cluster pushes all of its frontier half-edges; find
        // the smallest growth increment that completes some edge
        double min_step = kInf;
        std::vector<std::pair<uint32_t, double>> frontier;  // edge, sides
        std::vector<uint8_t> edge_seen(g.edges.size(), 0);
        for (int32_t r : active) {
            for (uint32_t v : sc.nodes[r]) {
                for (uint32_t ei : g.incident[v]) {
                    if (sc.grown_full[ei]) continue;
                    const DecodingEdge& e = g.edges[ei];
                    uint32_t au = static_cast<uint32_t>(e.a);
                    uint32_t bu = e.b < 0 ? g.boundary() : static_cast<uint32_t>(e.b);
                    int32_t ra = sc.parent[au] == -1 ? -1 : sc.find(au);
                    int32_t rb = sc.parent[bu] == -1 ? -1 : sc.find(bu);
                    if (ra == rb && ra != -1) {
                        sc.grown_full[ei] = 1;  // internal edge, complete it
                        sc.full_edges.push_back(ei);
                        continue;
                    }
                    if (edge_seen[ei]) continue;
                    edge_seen[ei] = 1;
                    double sides = 0;
                    bool ra_active = ra != -1 && sc.parity[ra] && !sc.boundary[ra];
                    bool rb_active = rb != -1 && sc.parity[rb] && !sc.boundary[rb];
                    if (ra_active) sides += 1;
                    if (rb_active) sides += 1;
                    if (sides == 0) continue;
                    frontier.push_back({ei, sides});
                    min_step = std::min(min_step, (e.weight - sc.grown[ei]) / sides);
                }
            }
        }
        if (frontier.empty()) throw std::runtime_error("union-find: odd cluster with no frontier");

        for (auto [ei, sides] : frontier) {
            sc.grown[ei] += sides * min_step;
            if (sc.grown[ei] + 1e-12 >= g.edges[ei].weight) {
                sc.grown_full[ei] = 1;
                sc.full_edges.push_back(ei);
                const DecodingEdge& e = g.edges[ei];
                uint32_t au = static_cast<uint32_t>(e.a);
                uint32_t bu = e.b < 0 ? g.boundary() : static_cast<uint32_t>(e.b);
                sc.touch(au, false, false);
                sc.touch(bu, false, bu == g.boundary());
                sc.unite(static_cast<int32_t>(au), static_cast<int32_t>(bu));
            }
        }
    }

    // peel a spanning forest of the fully grown support
    std::vector<std::vector<std::pair<uint32_t, uint32_t>>> adj(g.num_detectors + 1);  // (nbr, edge)
    for (uint32_t ei : sc.full_edges) {
        const DecodingEdge& e = g.edges[ei];
        uint32_t au = static_cast<uint32_t>(e.a);
        uint32_t bu = e.b < 0 ? g.boundary() : static_cast<uint32_t>(e.b);
        adj[au].push_back({bu, ei});
        adj[bu].push_back({au, ei});
    }
    uint8_t obs = 0;
    std::vector<uint8_t> visited(g.num_detectors + 1, 0);
    std::vector<uint8_t> synd = fired_mask;
    std::vector<uint32_t> order;
    std::vector<std::pair<uint32_t, uint32_t>> parent_edge(g.num_detectors + 1, {UINT32_MAX, UINT32_MAX});
    for (uint32_t f : fired) {
        uint32_t root = sc.find(static_cast<int32_t>(f));
        // prefer rooting trees at the boundary so leftover parity drains there
        uint32_t start = sc.boundary[root] ? g.boundary() : f;
        if (visited[start]) continue;
        order.clear();
        std::vector<uint32_t> stack{start};
        visited[start] = 1;
        while (!stack.empty()) {
            uint32_t u = stack.back();
            stack.pop_back();
            order.push_back(u);
            for (auto [v, ei] : adj[u]) {
                if (visited[v]) continue;
                visited[v] = 1;
                parent_edge[v] = {u, ei};
                stack.push_back(v);
            }
        }
        for (size_t i = order.size(); i-- > 1;) {
            uint32_t v = order[i];
            if (!synd[v]) continue;
            auto [u, ei] = parent_edge[v];
            synd[v] = 0;
            synd[u] ^= 1;
            obs ^= g.edges[ei].obs;
        }
        synd[start] = 0;  // absorbed by the root (boundary or even remainder)
    }
    return obs;
}

// Exhaustive maximum-likelihood table over mechanism subsets; oracle-grade,
// limited to tiny instances.
struct ExhaustiveTable {
    std::vector<std::array<double, 2>> prob;  // syndrome mask -> prob per obs
    std::vector<uint8_t> best;
};

ExhaustiveTable build_exhaustive_table(const DecodingGraph& g) {
    if (g.num_detectors > 24) throw std::invalid_argument("exhaustive decoder: too many detectors");
    if (g.edges.size() > 20) throw std::invalid_argument("exhaustive decoder: more than 20 mechanisms");
    ExhaustiveTable t;
    t.prob.assign(1ull << g.num_detectors, {0.0, 0.0});
    const size_t n = g.edges.size();
    for (uint64_t subset = 0; subset < (1ull << n); subset++) {
        double p = 1.0;
        uint32_t synd = 0;
        uint8_t obs = 0;
        for (size_t e = 0; e < n; e++) {
            const DecodingEdge& de = g.edges[e];
            if (subset >> e & 1) {
                p *= de.q;
                synd ^= 1u << de.a;
                if (de.b >= 0) synd ^= 1u << de.b;
                obs ^= de.obs;
            } else {
                p *= 1.0 - de.q;
            }
        }
        t.prob[synd][obs] += p;
    }
    t.best.resize(t.prob.size());
    for (size_t s = 0; s < t.prob.size(); s++) t.best[s] = t.prob[s][1] > t.prob[s][0] ? 1 : 0;
    return t;
}

}  // namespace

std::vector<uint64_t> decode(const DecodingGraph& g, const DetectionRecord& rec, DecodeMethod method,
                             int threads) {
    if (rec.num_detectors != g.num_detectors) throw std::invalid_argument("record/graph mismatch");
    std::vector<uint64_t> pred(rec.words_per_row, 0);

    if (method == DecodeMethod::Mwpm && !g.tables_ready)
        throw std::logic_error("prepare_matching must run before MWPM decoding");

    ExhaustiveTable table;
    if (method == DecodeMethod::Exhaustive) table = build_exhaustive_table(g);

    parallel_for(rec.words_per_row, threads, [&](uint64_t w0, uint64_t w1) {
        std::vector<uint32_t> fired;
        UfScratch scratch(g);
        for (uint64_t w = w0; w < w1; w++) {
            uint64_t out = 0;
            uint64_t base = w * 64;
            uint64_t n = std::min<uint64_t>(64, rec.shots - base);
            for (uint64_t s = 0; s < n; s++) {
                fired.clear();
                for (uint32_t d = 0; d < rec.num_detectors; d++)
                    if (rec.events[d * rec.words_per_row + w] >> s & 1) fired.push_back(d);
                uint8_t bit = 0;
                switch (method) {
                    case DecodeMethod::Mwpm:
                        bit = mwpm_solve(g, fired).obs;
                        break;
                    case DecodeMethod::UnionFind:
                        bit = decode_one_union_find(g, fired, scratch);
                        break;
                    case DecodeMethod::Exhaustive: {
                        uint32_t synd = 0;
                        for (uint32_t d : fired) synd |= 1u << d;
                        bit = table.best[synd];
                        break;
                    }
                }
                out |= static_cast<uint64_t>(bit) << s;
            }
            pred[w] = out;
        }
    });
    return pred;
}

LogicalStats logical_error_rate(const std::vector<uint64_t>& predictions, const DetectionRecord& rec) {
    if (rec.shots < 1) throw std::invalid_argument("empty record");
    if (predictions.size() != rec.words_per_row) throw std::invalid_argument("prediction length mismatch");
    LogicalStats st;
    st.shots = rec.shots;
    st.cycles = rec.cycles_per_shot;
    uint64_t errors = 0;
    for (size_t w = 0; w < rec.words_per_row; w++) {
        uint64_t diff = predictions[w] ^ rec.logical[w];
        if (w + 1 == rec.words_per_row && rec.shots % 64) diff &= (1ULL << (rec.shots % 64)) - 1;
        errors += std::popcount(diff);
    }
    st.errors = errors;
    st.p_err = static_cast<double>(errors) / static_cast<double>(rec.shots);
    st.anti_learning = st.p_err > 0.5;
    st.eps_l = per_cycle_error(st.p_err, st.cycles);
    return st;
}

double per_cycle_error(double p_err, uint32_t T) {
    if (T == 0) throw std::invalid_argument("T must be >= 1");
    double arg = 1.0 - 2.0 * p_err;
    if (arg <= 0) return 0.5;
    return 0.5 * (1.0 - std::pow(arg, 1.0 / static_cast<double>(T)));
}

double accumulate_p_err(double eps_l, uint32_t T) {
    return 0.5 * (1.0 - std::pow(1.0 - 2.0 * eps_l, static_cast<double>(T)));
}

double lambda_point_estimate(double eps_l, uint32_t d, double lambda_star, double eps_l_star) {
    if (eps_l <= 0 || lambda_star <= 0 || eps_l_star <= 0) throw std::invalid_argument("inputs must be positive");
    return lambda_star * std::pow(eps_l_star / eps_l, 2.0 / (static_cast<double>(d) + 1.0));
}

}  // namespace qecsteer
