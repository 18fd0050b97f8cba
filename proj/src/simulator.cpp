#include "qecsteer/simulator.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "qecsteer/rng.h"
#include "qecsteer/util.h"

namespace qecsteer {

namespace {

struct FrameBatch {
    uint32_t num_qubits;
    size_t words;
    std::vector<uint64_t> x, z;

    FrameBatch(uint32_t q, size_t w) : num_qubits(q), words(w), x(q * w, 0), z(q * w, 0) {}
    uint64_t* xr(uint32_t q) { return x.data() + q * words; }
    uint64_t* zr(uint32_t q) { return z.data() + q * words; }
};

// Geometric-skip Bernoulli sampling: visits only the shots where the event
// fires, exact per shot. apply(shot, rng) handles the hit.
template <typename Fn>
void for_each_bernoulli_hit(RngStream& rng, double p, uint64_t n, Fn&& apply) {
    if (p <= 0 || n == 0) return;
    double l1mp = std::log1p(-std::min(p, 1.0));  // -inf at p = 1 makes every shot hit
    double pos = std::floor(std::log(rng.next_double_open()) / l1mp);
    while (pos < static_cast<double>(n)) {
        apply(static_cast<uint64_t>(pos));
        pos += 1.0 + std::floor(std::log(rng.next_double_open()) / l1mp);
    }
}

inline void flip_bit(uint64_t* row, uint64_t shot) { row[shot >> 6] ^= 1ULL << (shot & 63); }

// `injections` carry block-relative shot indices here; `block_start` is the
// absolute shot offset and serves only as the RNG stream id.
void run_block(const Circuit& c, FrameBatch& f, std::vector<uint64_t>& rec, uint64_t seed,
               uint64_t block_start, uint64_t shots_in_block, std::vector<PauliInjection> block_inj) {
    const size_t W = f.words;
    std::fill(f.x.begin(), f.x.end(), 0);
    std::fill(f.z.begin(), f.z.end(), 0);

    std::sort(block_inj.begin(), block_inj.end(),
              [](const PauliInjection& a, const PauliInjection& b) { return a.instr_pos < b.instr_pos; });
    size_t inj_at = 0;

    uint32_t meas = 0;
    for (uint32_t pos = 0; pos < c.instructions.size(); pos++) {
        const Instruction& ins = c.instructions[pos];
        switch (ins.op) {
            case Op::ResetZ:
                for (uint32_t q : ins.targets) {
                    std::memset(f.xr(q), 0, W * 8);
                    std::memset(f.zr(q), 0, W * 8);
                }
                break;
            case Op::H:
                for (uint32_t q : ins.targets) {
                    uint64_t *xr = f.xr(q), *zr = f.zr(q);
                    for (size_t w = 0; w < W; w++) std::swap(xr[w], zr[w]);
                }
                break;
            case Op::Cz:
                for (size_t k = 0; k + 1 < ins.targets.size(); k += 2) {
                    uint64_t *xa = f.xr(ins.targets[k]), *za = f.zr(ins.targets[k]);
                    uint64_t *xb = f.xr(ins.targets[k + 1]), *zb = f.zr(ins.targets[k + 1]);
                    for (size_t w = 0; w < W; w++) {
                        za[w] ^= xb[w];
                        zb[w] ^= xa[w];
                    }
                }
                break;
            case Op::MeasureZ: {
                RngStream rng(derive_seed(seed, seed_tag::kNoise, pos), block_start);
                for (uint32_t q : ins.targets) {
                    std::memcpy(rec.data() + static_cast<size_t>(meas) * W, f.xr(q), W * 8);
                    meas++;
                    // collapse scrambles the frame's phase bit per shot
                    uint64_t* zr = f.zr(q);
                    for (size_t w = 0; w < W; w++) zr[w] = rng.next_u64();
                }
                break;
            }
            case Op::XFlip: {
                if (ins.prob < 0) throw std::invalid_argument("unbound noise slot");
                RngStream rng(derive_seed(seed, seed_tag::kNoise, pos), block_start);
                uint64_t* xr = f.xr(ins.targets[0]);
                for_each_bernoulli_hit(rng, ins.prob, shots_in_block,
                                       [&](uint64_t s) { flip_bit(xr, s); });
                break;
            }
            case Op::Depolarize1: {
                if (ins.prob < 0) throw std::invalid_argument("unbound noise slot");
                RngStream rng(derive_seed(seed, seed_tag::kNoise, pos), block_start);
                uint64_t *xr = f.xr(ins.targets[0]), *zr = f.zr(ins.targets[0]);
                for_each_bernoulli_hit(rng, ins.prob, shots_in_block, [&](uint64_t s) {
                    uint64_t choice = rng.next_below(3) + 1;  // 1=X 2=Z 3=Y
                    if (choice & 1) flip_bit(xr, s);
                    if (choice & 2) flip_bit(zr, s);
                });
                break;
            }
            case Op::Depolarize2: {
                if (ins.prob < 0) throw std::invalid_argument("unbound noise slot");
                RngStream rng(derive_seed(seed, seed_tag::kNoise, pos), block_start);
                uint64_t *xa = f.xr(ins.targets[0]), *za = f.zr(ins.targets[0]);
                uint64_t *xb = f.xr(ins.targets[1]), *zb = f.zr(ins.targets[1]);
                for_each_bernoulli_hit(rng, ins.prob, shots_in_block, [&](uint64_t s) {
                    uint64_t v = rng.next_below(15) + 1;  // 4-bit non-identity Pauli pair
                    if (v & 1) flip_bit(xa, s);
                    if (v & 2) flip_bit(za, s);
                    if (v & 4) flip_bit(xb, s);
                    if (v & 8) flip_bit(zb, s);
                });
                break;
            }
        }
        while (inj_at < block_inj.size() && block_inj[inj_at].instr_pos == pos) {
            const PauliInjection& inj = block_inj[inj_at];
            if (inj.pauli & kPauliX) flip_bit(f.xr(inj.qubit), inj.shot);
            if (inj.pauli & kPauliZ) flip_bit(f.zr(inj.qubit), inj.shot);
            inj_at++;
        }
    }
}

}  // namespace

DetectionRecord sample_with_injections(const Circuit& c, uint64_t shots, uint64_t seed,
                                       const std::vector<PauliInjection>& injections, int threads,
                                       uint64_t shot_offset) {
    if (shots < 1) throw std::invalid_argument("shots must be >= 1");
    if (!c.all_noise_bound()) throw std::invalid_argument("circuit has unbound noise slots");

    DetectionRecord out;
    out.num_detectors = static_cast<uint32_t>(c.detectors.size());
    out.shots = shots;
    out.cycles_per_shot = c.num_cycles;
    out.words_per_row = (shots + 63) / 64;
    out.events.assign(static_cast<size_t>(out.num_detectors) * out.words_per_row, 0);
    out.logical.assign(out.words_per_row, 0);

    const uint64_t num_blocks = (shots + kShotBlock - 1) / kShotBlock;
    parallel_for(num_blocks, threads, [&](uint64_t b0, uint64_t b1) {
        FrameBatch frame(c.num_qubits(), kShotBlock / 64);
        std::vector<uint64_t> rec(static_cast<size_t>(c.num_measurements) * frame.words);
        std::vector<uint64_t> acc(frame.words);
        for (uint64_t blk = b0; blk < b1; blk++) {
            uint64_t lo = blk * kShotBlock;
            uint64_t n = std::min(kShotBlock, shots - lo);
            size_t wlo = lo / 64;                 // word offset in the output rows
            size_t wn = (n + 63) / 64;
            // local injections are expressed in block-relative shots
            std::vector<PauliInjection> local;
            for (const auto& inj : injections)
                if (inj.shot >= lo && inj.shot < lo + n) local.push_back(inj);
            for (auto& inj : local) inj.shot -= lo;
            run_block(c, frame, rec, seed, shot_offset + lo, n, std::move(local));
            for (const Detector& det : c.detectors) {
                std::fill(acc.begin(), acc.begin() + wn, 0);
                for (uint32_t m : det.measurements) {
                    const uint64_t* row = rec.data() + static_cast<size_t>(m) * frame.words;
                    for (size_t w = 0; w < wn; w++) acc[w] ^= row[w];
                }
                std::memcpy(out.events.data() + static_cast<size_t>(det.det_id) * out.words_per_row + wlo,
                            acc.data(), wn * 8);
            }
            std::fill(acc.begin(), acc.begin() + wn, 0);
            for (uint32_t m : c.observable) {
                const uint64_t* row = rec.data() + static_cast<size_t>(m) * frame.words;
                for (size_t w = 0; w < wn; w++) acc[w] ^= row[w];
            }
            std::memcpy(out.logical.data() + wlo, acc.data(), wn * 8);
        }
    });
    return out;
}

DetectionRecord sample(const Circuit& c, uint64_t shots, uint64_t seed, int threads, uint64_t shot_offset) {
    static const std::vector<PauliInjection> kNone;
    return sample_with_injections(c, shots, seed, kNone, threads, shot_offset);
}

std::vector<uint64_t> per_detector_counts(const DetectionRecord& rec) {
    std::vector<uint64_t> counts(rec.num_detectors, 0);
    for (uint32_t d = 0; d < rec.num_detectors; d++) {
        const uint64_t* row = rec.events.data() + static_cast<size_t>(d) * rec.words_per_row;
        uint64_t n = 0;
        for (size_t w = 0; w < rec.words_per_row; w++) n += std::popcount(row[w]);
        counts[d] = n;
    }
    return counts;
}

std::vector<double> detection_fractions(const DetectionRecord& rec) {
    if (rec.shots < 1) throw std::invalid_argument("empty record");
    auto counts = per_detector_counts(rec);
    std::vector<double> rates(rec.num_detectors);
    for (uint32_t d = 0; d < rec.num_detectors; d++)
        rates[d] = static_cast<double>(counts[d]) / static_cast<double>(rec.shots);
    return rates;
}

double mean_detection_rate(const DetectionRecord& rec) {
    if (rec.num_detectors == 0) return 0;
    auto rates = detection_fractions(rec);
    return mean_of(rates);
}

uint64_t count_events(const DetectionRecord& rec) {
    uint64_t n = 0;
    for (uint64_t w : rec.events) n += std::popcount(w);
    return n;
}

void write_record_files(const DetectionRecord& rec, const std::string& path_base) {
    std::ofstream out(path_base, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path_base);
    out.write("QSDR1", 5);
    uint32_t dets = rec.num_detectors, shots = static_cast<uint32_t>(rec.shots);
    out.write(reinterpret_cast<const char*>(&dets), 4);
    out.write(reinterpret_cast<const char*>(&shots), 4);
    out.write(reinterpret_cast<const char*>(rec.events.data()),
              static_cast<std::streamsize>(rec.events.size() * 8));
    std::ofstream flips(path_base + ".b8", std::ios::binary);
    size_t bytes = (rec.shots + 7) / 8;
    flips.write(reinterpret_cast<const char*>(rec.logical.data()), static_cast<std::streamsize>(bytes));
}

DetectionRecord read_record_files(const std::string& path_base) {
    std::ifstream in(path_base, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path_base);
    char magic[5];
    in.read(magic, 5);
    if (std::memcmp(magic, "QSDR1", 5) != 0) throw std::runtime_error("bad record header");
    DetectionRecord rec;
    uint32_t dets = 0, shots = 0;
    in.read(reinterpret_cast<char*>(&dets), 4);
    in.read(reinterpret_cast<char*>(&shots), 4);
    rec.num_detectors = dets;
    rec.shots = shots;
    rec.words_per_row = (shots + 63ULL) / 64;
    rec.events.resize(static_cast<size_t>(dets) * rec.words_per_row);
    in.read(reinterpret_cast<char*>(rec.events.data()), static_cast<std::streamsize>(rec.events.size() * 8));
    rec.logical.assign(rec.words_per_row, 0);
    std::ifstream flips(path_base + ".b8", std::ios::binary);
    flips.read(reinterpret_cast<char*>(rec.logical.data()), static_cast<std::streamsize>((shots + 7) / 8));
    return rec;
}

}  // namespace qecsteer
