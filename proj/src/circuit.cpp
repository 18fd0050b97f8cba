#include "qecsteer/circuit.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace qecsteer {

uint32_t Circuit::num_sq_sites() const {
    uint32_t n = 0;
    for (const auto& s : sites)
        if (s.kind == SiteKind::Sq) n++;
    return n;
}

uint32_t Circuit::num_cz_sites() const {
    uint32_t n = 0;
    for (const auto& s : sites)
        if (s.kind == SiteKind::Cz) n++;
    return n;
}

bool Circuit::all_noise_bound() const {
    for (uint32_t idx : noise_slots)
        if (instructions[idx].prob < 0) return false;
    return true;
}

namespace {

struct Builder {
    Circuit c;

    void add(Op op, std::vector<uint32_t> targets, double prob = 0.0, int32_t site = -1, int32_t cycle = -1) {
        if (targets.empty()) return;
        Instruction ins{op, std::move(targets), prob, site, cycle};
        bool is_noise = op == Op::Depolarize1 || op == Op::Depolarize2 || op == Op::XFlip;
        if (op == Op::MeasureZ) c.num_measurements += static_cast<uint32_t>(ins.targets.size());
        c.instructions.push_back(std::move(ins));
        if (is_noise) c.noise_slots.push_back(static_cast<uint32_t>(c.instructions.size() - 1));
    }

    void noise1(Op op, uint32_t q, uint32_t site, int cycle) { add(op, {q}, kUnboundProb, site, cycle); }
    void noise2(uint32_t a, uint32_t b, uint32_t site, int cycle) {
        add(Op::Depolarize2, {a, b}, kUnboundProb, site, cycle);
    }
};

void check_code_params(uint32_t d, uint32_t T) {
    if (d < 3 || d % 2 == 0) throw std::invalid_argument("code distance must be odd and >= 3");
    if (T < 1) throw std::invalid_argument("cycle count must be >= 1");
}

}  // namespace

Circuit build_repetition_code_memory(uint32_t d, uint32_t T) {
    check_code_params(d, T);
    Builder b;
    b.c.code = CodeKind::Repetition;
    b.c.basis = Basis::Z;
    b.c.distance = d;
    b.c.num_cycles = T;

    const uint32_t n_data = d, n_meas = d - 1;
    for (uint32_t i = 0; i < n_data; i++) b.c.qubits.push_back({i, 0, static_cast<int>(2 * i), false});
    for (uint32_t m = 0; m < n_meas; m++)
        b.c.qubits.push_back({n_data + m, 0, static_cast<int>(2 * m + 1), true});

    // One Sq site per qubit, two Cz sites per measure qubit.
    for (uint32_t q = 0; q < n_data + n_meas; q++) b.c.sites.push_back({q, SiteKind::Sq, {q, 0}, 0});
    for (uint32_t m = 0; m < n_meas; m++) {
        uint32_t mq = n_data + m;
        b.c.sites.push_back({n_data + n_meas + 2 * m, SiteKind::Cz, {mq, m}, 0});
        b.c.sites.push_back({n_data + n_meas + 2 * m + 1, SiteKind::Cz, {mq, m + 1}, 1});
    }

    std::vector<uint32_t> data_list(n_data), meas_list(n_meas);
    for (uint32_t i = 0; i < n_data; i++) data_list[i] = i;
    for (uint32_t m = 0; m < n_meas; m++) meas_list[m] = n_data + m;

    b.add(Op::ResetZ, data_list);
    for (uint32_t q : data_list) b.noise1(Op::XFlip, q, q, 0);

    for (uint32_t t = 0; t < T; t++) {
        b.add(Op::ResetZ, meas_list);
        for (uint32_t q : meas_list) b.noise1(Op::XFlip, q, q, t);
        for (uint32_t q : data_list) b.noise1(Op::Depolarize1, q, q, t);
        b.add(Op::H, meas_list);
        for (uint32_t q : meas_list) b.noise1(Op::Depolarize1, q, q, t);
        for (uint32_t layer = 0; layer < 2; layer++) {
            for (uint32_t m = 0; m < n_meas; m++) {
                uint32_t mq = n_data + m, dq = m + layer;
                b.add(Op::Cz, {mq, dq});
                b.noise2(mq, dq, n_data + n_meas + 2 * m + layer, t);
            }
        }
        b.add(Op::H, meas_list);
        for (uint32_t q : meas_list) b.noise1(Op::XFlip, q, q, t);
        b.add(Op::MeasureZ, meas_list);
    }

    for (uint32_t q : data_list) b.noise1(Op::XFlip, q, q, T - 1);
    b.add(Op::MeasureZ, data_list);

    // Syndrome of measure qubit m at cycle t is record t*n_meas + m; data
    // readout i is record T*n_meas + i.
    auto syn = [&](uint32_t t, uint32_t m) { return t * n_meas + m; };
    const uint32_t final_base = T * n_meas;
    uint32_t det_id = 0;
    for (uint32_t m = 0; m < n_meas; m++)
        b.c.detectors.push_back({det_id++, {syn(0, m)}, n_data + m, 0});
    for (uint32_t t = 1; t < T; t++)
        for (uint32_t m = 0; m < n_meas; m++)
            b.c.detectors.push_back({det_id++, {syn(t - 1, m), syn(t, m)}, n_data + m, static_cast<int>(t)});
    for (uint32_t m = 0; m < n_meas; m++)
        b.c.detectors.push_back(
            {det_id++, {syn(T - 1, m), final_base + m, final_base + m + 1}, n_data + m, static_cast<int>(T)});

    b.c.observable = {final_base};
    return b.c;
}

namespace {

// Rotated-lattice bookkeeping. Data qubit (a, b) sits at grid (2a+1, 2b+1)
// and has index a*d + b. Ancilla candidates sit at (2i, 2j).
struct SurfaceLayout {
    uint32_t d;
    struct Anc {
        uint32_t qubit;
        uint32_t i, j;
        bool is_x;
        std::array<int32_t, 4> nbr;  // data index per direction NE,NW,SE,SW; -1 missing
    };
    std::vector<Anc> ancillas;

    explicit SurfaceLayout(uint32_t d_) : d(d_) {
        auto data_at = [&](int a, int b) -> int32_t {
            if (a < 0 || b < 0 || a >= static_cast<int>(d) || b >= static_cast<int>(d)) return -1;
            return a * static_cast<int>(d) + b;
        };
        uint32_t next = d * d;
        for (uint32_t i = 0; i <= d; i++) {
            for (uint32_t j = 0; j <= d; j++) {
                bool is_x = (i + j) % 2 == 0;
                bool interior = i >= 1 && i + 1 <= d && j >= 1 && j + 1 <= d;
                bool top_bot = (i == 0 || i == d) && j >= 1 && j + 1 <= d && is_x;
                bool left_right = (j == 0 || j == d) && i >= 1 && i + 1 <= d && !is_x;
                if (!(interior || top_bot || left_right)) continue;
                Anc a;
                a.qubit = next++;
                a.i = i;
                a.j = j;
                a.is_x = is_x;
                int ii = static_cast<int>(i), jj = static_cast<int>(j);
                a.nbr = {data_at(ii - 1, jj), data_at(ii - 1, jj - 1), data_at(ii, jj), data_at(ii, jj - 1)};
                ancillas.push_back(a);
            }
        }
    }

    // Direction handled by a given CZ layer; the two types interleave so
    // that every layer pairs each data qubit with at most one ancilla.
    int direction_for_layer(bool is_x, int layer) const {
        static constexpr int x_order[4] = {0, 1, 2, 3};  // NE, NW, SE, SW
        static constexpr int z_order[4] = {0, 2, 1, 3};  // NE, SE, NW, SW
        return is_x ? x_order[layer] : z_order[layer];
    }
};

}  // namespace

Circuit build_surface_code_memory(uint32_t d, uint32_t T, Basis basis) {
    check_code_params(d, T);
    Builder b;
    b.c.code = CodeKind::Surface;
    b.c.basis = basis;
    b.c.distance = d;
    b.c.num_cycles = T;

    SurfaceLayout lay(d);
    const uint32_t n_data = d * d, n_anc = static_cast<uint32_t>(lay.ancillas.size());
    if (n_anc != d * d - 1) throw std::logic_error("surface layout ancilla count mismatch");

    for (uint32_t q = 0; q < n_data; q++)
        b.c.qubits.push_back(
            {q, static_cast<int>(2 * (q / d) + 1), static_cast<int>(2 * (q % d) + 1), false});
    for (const auto& a : lay.ancillas)
        b.c.qubits.push_back({a.qubit, static_cast<int>(2 * a.i), static_cast<int>(2 * a.j), true});

    // Sq site ids coincide with qubit indices; Cz site ids follow.
    const uint32_t n_qubits = n_data + n_anc;
    for (uint32_t q = 0; q < n_qubits; q++) b.c.sites.push_back({q, SiteKind::Sq, {q, 0}, 0});
    // cz_site[anc][layer] = site id or -1
    std::vector<std::array<int32_t, 4>> cz_site(n_anc, {-1, -1, -1, -1});
    {
        uint32_t next = n_qubits;
        for (uint32_t k = 0; k < n_anc; k++) {
            const auto& a = lay.ancillas[k];
            for (int layer = 0; layer < 4; layer++) {
                int32_t dq = a.nbr[lay.direction_for_layer(a.is_x, layer)];
                if (dq < 0) continue;
                cz_site[k][layer] = static_cast<int32_t>(next);
                b.c.sites.push_back({next, SiteKind::Cz, {a.qubit, static_cast<uint32_t>(dq)}, layer});
                next++;
            }
        }
    }

    std::vector<uint32_t> data_list(n_data), meas_list(n_anc);
    for (uint32_t q = 0; q < n_data; q++) data_list[q] = q;
    for (uint32_t k = 0; k < n_anc; k++) meas_list[k] = lay.ancillas[k].qubit;

    b.add(Op::ResetZ, data_list);
    for (uint32_t q : data_list) b.noise1(Op::XFlip, q, q, 0);
    if (basis == Basis::X) b.add(Op::H, data_list);

    for (uint32_t t = 0; t < T; t++) {
        b.add(Op::ResetZ, meas_list);
        for (uint32_t q : meas_list) b.noise1(Op::XFlip, q, q, t);
        for (uint32_t q : data_list) b.noise1(Op::Depolarize1, q, q, t);
        b.add(Op::H, meas_list);
        for (uint32_t q : meas_list) b.noise1(Op::Depolarize1, q, q, t);
        for (int layer = 0; layer < 4; layer++) {
            // Data next to an X-type ancilla is probed in the X basis, so
            // its CZ is conjugated by H on the data side.
            std::vector<uint32_t> h_data;
            for (uint32_t k = 0; k < n_anc; k++) {
                const auto& a = lay.ancillas[k];
                int32_t dq = a.nbr[lay.direction_for_layer(a.is_x, layer)];
                if (dq >= 0 && a.is_x) h_data.push_back(static_cast<uint32_t>(dq));
            }
            b.add(Op::H, h_data);
            for (uint32_t k = 0; k < n_anc; k++) {
                const auto& a = lay.ancillas[k];
                int32_t dq = a.nbr[lay.direction_for_layer(a.is_x, layer)];
                if (dq < 0) continue;
                b.add(Op::Cz, {a.qubit, static_cast<uint32_t>(dq)});
                b.noise2(a.qubit, static_cast<uint32_t>(dq), static_cast<uint32_t>(cz_site[k][layer]), t);
            }
            b.add(Op::H, h_data);
        }
        b.add(Op::H, meas_list);
        for (uint32_t q : meas_list) b.noise1(Op::XFlip, q, q, t);
        b.add(Op::MeasureZ, meas_list);
    }

    if (basis == Basis::X) b.add(Op::H, data_list);
    for (uint32_t q : data_list) b.noise1(Op::XFlip, q, q, T - 1);
    b.add(Op::MeasureZ, data_list);

    auto syn = [&](uint32_t t, uint32_t k) { return t * n_anc + k; };
    const uint32_t final_base = T * n_anc;
    const bool memory_x = basis == Basis::X;
    uint32_t det_id = 0;
    for (uint32_t k = 0; k < n_anc; k++) {
        if (lay.ancillas[k].is_x != memory_x) continue;
        b.c.detectors.push_back({det_id++, {syn(0, k)}, lay.ancillas[k].qubit, 0});
    }
    for (uint32_t t = 1; t < T; t++)
        for (uint32_t k = 0; k < n_anc; k++)
            b.c.detectors.push_back(
                {det_id++, {syn(t - 1, k), syn(t, k)}, lay.ancillas[k].qubit, static_cast<int>(t)});
    for (uint32_t k = 0; k < n_anc; k++) {
        const auto& a = lay.ancillas[k];
        if (a.is_x != memory_x) continue;
        std::vector<uint32_t> meas{syn(T - 1, k)};
        for (int32_t dq : a.nbr)
            if (dq >= 0) meas.push_back(final_base + static_cast<uint32_t>(dq));
        b.c.detectors.push_back({det_id++, std::move(meas), a.qubit, static_cast<int>(T)});
    }

    // Logical operator: a row of data for the Z memory, a column for X.
    for (uint32_t k = 0; k < d; k++)
        b.c.observable.push_back(final_base + (memory_x ? k * d : k));
    return b.c;
}

// ---- propagation ---------------------------------------------------------

ErrorEffect propagate_single_error(const Circuit& c, uint32_t instr_pos, uint32_t target, uint8_t pauli) {
    if (instr_pos >= c.instructions.size()) throw std::invalid_argument("instr_pos out of range");
    const uint32_t Q = c.num_qubits();
    std::vector<uint8_t> x(Q, 0), z(Q, 0);
    std::vector<uint8_t> rec(c.num_measurements, 0);
    uint32_t meas = 0;
    bool injected_done = false;
    for (uint32_t pos = 0; pos < c.instructions.size(); pos++) {
        const Instruction& ins = c.instructions[pos];
        if (injected_done || pos > instr_pos) {
            switch (ins.op) {
                case Op::H:
                    for (uint32_t q : ins.targets) std::swap(x[q], z[q]);
                    break;
                case Op::Cz:
                    for (size_t k = 0; k + 1 < ins.targets.size(); k += 2) {
                        uint32_t a = ins.targets[k], bq = ins.targets[k + 1];
                        z[a] ^= x[bq];
                        z[bq] ^= x[a];
                    }
                    break;
                case Op::ResetZ:
                    for (uint32_t q : ins.targets) x[q] = z[q] = 0;
                    break;
                case Op::MeasureZ:
                    for (uint32_t q : ins.targets) rec[meas++] = x[q];
                    break;
                default:
                    break;  // noise slots are silent here
            }
        } else if (ins.op == Op::MeasureZ) {
            meas += static_cast<uint32_t>(ins.targets.size());
        }
        if (pos == instr_pos) {
            if (pauli & kPauliX) x[target] ^= 1;
            if (pauli & kPauliZ) z[target] ^= 1;
            injected_done = true;
        }
    }
    ErrorEffect eff;
    for (const Detector& det : c.detectors) {
        uint8_t par = 0;
        for (uint32_t m : det.measurements) par ^= rec[m];
        if (par) eff.flipped_detectors.push_back(det.det_id);
    }
    uint8_t par = 0;
    for (uint32_t m : c.observable) par ^= rec[m];
    eff.flips_observable = par != 0;
    return eff;
}

DetectingRegionMap compute_detecting_regions(const Circuit& c) {
    DetectingRegionMap map;
    map.regions.resize(c.detectors.size());
    for (uint32_t pos_idx : c.noise_slots) {
        const Instruction& ins = c.instructions[pos_idx];
        for (uint32_t q : ins.targets) {
            // Y = X.Z flips exactly the symmetric difference, so X and Z
            // propagation already cover the union of all three.
            for (uint8_t pauli : {kPauliX, kPauliZ}) {
                ErrorEffect eff = propagate_single_error(c, pos_idx, q, pauli);
                for (uint32_t det : eff.flipped_detectors)
                    map.regions[det].push_back({static_cast<uint32_t>(ins.site), ins.cycle});
            }
        }
    }
    map.site_regions.resize(c.detectors.size());
    for (size_t d = 0; d < map.regions.size(); d++) {
        auto& r = map.regions[d];
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
        auto& sr = map.site_regions[d];
        for (const auto& e : r) sr.push_back(e.site_id);
        std::sort(sr.begin(), sr.end());
        sr.erase(std::unique(sr.begin(), sr.end()), sr.end());
    }
    return map;
}

// ---- text format ----------------------------------------------------------

namespace {

const char* op_name(Op op) {
    switch (op) {
        case Op::ResetZ: return "R";
        case Op::H: return "H";
        case Op::Cz: return "CZ";
        case Op::MeasureZ: return "M";
        case Op::Depolarize1: return "DEPOLARIZE1";
        case Op::Depolarize2: return "DEPOLARIZE2";
        case Op::XFlip: return "X_FLIP";
    }
    return "?";
}

}  // namespace

std::string dump_circuit(const Circuit& c) {
    std::ostringstream out;
    out << "# code=" << (c.code == CodeKind::Surface ? "surface" : "repetition") << " d=" << c.distance
        << " T=" << c.num_cycles << " basis=" << (c.basis == Basis::X ? "X" : "Z") << "\n";
    if (c.code == CodeKind::Surface)
        out << "# cz schedule: X-type NE,NW,SE,SW; Z-type NE,SE,NW,SW (row grows south)\n";
    for (const Qubit& q : c.qubits)
        out << "# qubit " << q.index << " row " << q.row << " col " << q.col << " "
            << (q.is_measure ? "measure" : "data") << "\n";
    for (const Instruction& ins : c.instructions) {
        bool is_noise = ins.op == Op::Depolarize1 || ins.op == Op::Depolarize2 || ins.op == Op::XFlip;
        out << op_name(ins.op);
        if (is_noise) {
            if (ins.prob < 0)
                out << "(?)";
            else {
                char buf[40];
                std::snprintf(buf, sizeof buf, "(%.12g)", ins.prob);
                out << buf;
            }
        }
        for (uint32_t t : ins.targets) out << ' ' << t;
        if (is_noise) out << " # site " << ins.site << " cycle " << ins.cycle;
        out << "\n";
    }
    const int64_t n_meas = c.num_measurements;
    for (const Detector& det : c.detectors) {
        out << "DETECTOR";
        for (uint32_t m : det.measurements) out << " rec[" << (static_cast<int64_t>(m) - n_meas) << "]";
        out << " # q " << det.space_coord << " t " << det.time_coord << "\n";
    }
    if (!c.observable.empty()) {
        out << "OBSERVABLE";
        for (uint32_t m : c.observable) out << " rec[" << (static_cast<int64_t>(m) - n_meas) << "]";
        out << "\n";
    }
    return out.str();
}

Circuit parse_circuit(const std::string& text) {
    Circuit c;
    struct PendingRec {
        std::vector<int64_t> offsets;  // negative, relative to final measurement count
        uint32_t space = 0;
        int time = 0;
        bool is_observable = false;
    };
    std::vector<PendingRec> pending;
    std::map<uint32_t, Qubit> qubits;
    uint32_t max_target = 0;
    std::map<int32_t, SiteKind> site_kinds;

    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        std::string comment;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            comment = line.substr(hash + 1);
            line = line.substr(0, hash);
        }
        std::istringstream cs(comment);
        {
            std::string w;
            cs >> w;
            if (w == "qubit") {
                Qubit q{};
                std::string rw, cw, kind;
                cs >> q.index >> rw >> q.row >> cw >> q.col >> kind;
                q.is_measure = kind == "measure";
                qubits[q.index] = q;
            }
        }
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;

        auto parse_targets = [&](Instruction& ins) {
            uint32_t t;
            while (ls >> t) {
                ins.targets.push_back(t);
                max_target = std::max(max_target, t);
            }
        };
        auto parse_noise_meta = [&](Instruction& ins) {
            std::istringstream ms(comment);
            std::string w;
            while (ms >> w) {
                if (w == "site") ms >> ins.site;
                if (w == "cycle") ms >> ins.cycle;
            }
        };

        if (word == "DETECTOR" || word == "OBSERVABLE") {
            PendingRec pr;
            pr.is_observable = word == "OBSERVABLE";
            std::string tok;
            while (ls >> tok) {
                if (tok.rfind("rec[", 0) != 0) throw std::invalid_argument("bad rec token at line " + std::to_string(line_no));
                pr.offsets.push_back(std::stoll(tok.substr(4)));
            }
            std::istringstream ms(comment);
            std::string w;
            while (ms >> w) {
                if (w == "q") ms >> pr.space;
                if (w == "t") ms >> pr.time;
            }
            pending.push_back(std::move(pr));
            continue;
        }

        Op op;
        double prob = 0.0;
        std::string name = word;
        if (auto paren = word.find('('); paren != std::string::npos) {
            name = word.substr(0, paren);
            auto close = word.find(')', paren);
            std::string arg = word.substr(paren + 1, close - paren - 1);
            prob = arg == "?" ? kUnboundProb : std::stod(arg);
        }
        if (name == "R") op = Op::ResetZ;
        else if (name == "H") op = Op::H;
        else if (name == "CZ") op = Op::Cz;
        else if (name == "M") op = Op::MeasureZ;
        else if (name == "DEPOLARIZE1") op = Op::Depolarize1;
        else if (name == "DEPOLARIZE2") op = Op::Depolarize2;
        else if (name == "X_FLIP") op = Op::XFlip;
        else throw std::invalid_argument("unknown op '" + name + "' at line " + std::to_string(line_no));

        Instruction ins{op, {}, prob, -1, -1};
        parse_targets(ins);
        bool is_noise = op == Op::Depolarize1 || op == Op::Depolarize2 || op == Op::XFlip;
        if (is_noise) {
            parse_noise_meta(ins);
            if (ins.site >= 0)
                site_kinds[ins.site] = op == Op::Depolarize2 ? SiteKind::Cz : SiteKind::Sq;
        }
        if (op == Op::MeasureZ) c.num_measurements += static_cast<uint32_t>(ins.targets.size());
        c.instructions.push_back(std::move(ins));
        if (is_noise) c.noise_slots.push_back(static_cast<uint32_t>(c.instructions.size() - 1));
    }

    for (const auto& pr : pending) {
        std::vector<uint32_t> meas;
        for (int64_t off : pr.offsets) {
            int64_t idx = static_cast<int64_t>(c.num_measurements) + off;
            if (idx < 0 || idx >= static_cast<int64_t>(c.num_measurements))
                throw std::invalid_argument("rec offset out of range");
            meas.push_back(static_cast<uint32_t>(idx));
        }
        if (pr.is_observable)
            c.observable = std::move(meas);
        else
            c.detectors.push_back(
                {static_cast<uint32_t>(c.detectors.size()), std::move(meas), pr.space, pr.time});
    }

    if (qubits.empty()) {
        for (uint32_t q = 0; q <= max_target; q++) c.qubits.push_back({q, 0, static_cast<int>(q), false});
    } else {
        for (auto& [idx, q] : qubits) c.qubits.push_back(q);
    }
    for (auto& [id, kind] : site_kinds) {
        GateSite s{static_cast<uint32_t>(id), kind, {0, 0}, 0};
        c.sites.push_back(s);
    }
    int max_cycle = 0;
    for (uint32_t idx : c.noise_slots) max_cycle = std::max(max_cycle, c.instructions[idx].cycle);
    c.num_cycles = static_cast<uint32_t>(max_cycle) + 1;
    for (const Detector& det : c.detectors) {
        if (det.time_coord > static_cast<int>(c.num_cycles)) c.num_cycles = det.time_coord;
    }
    return c;
}

}  // namespace qecsteer
