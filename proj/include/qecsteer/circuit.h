#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace qecsteer {

enum class Op : uint8_t { ResetZ, H, Cz, MeasureZ, Depolarize1, Depolarize2, XFlip };
enum class SiteKind : uint8_t { Sq, Cz };
enum class Basis : uint8_t { X, Z };
enum class CodeKind : uint8_t { Repetition, Surface };

struct Qubit {
    uint32_t index;
    int row;
    int col;
    bool is_measure;
};

// A spatial gate location, reused every cycle. This is the unit that owns
// learnable control parameters and the noise channels bound to them.
struct GateSite {
    uint32_t site_id;
    SiteKind kind;
    std::array<uint32_t, 2> targets;  // targets[1] unused for Sq sites
    int layer_tag;                    // within-cycle slot (CZ layer index; 0 for Sq)
};

// Noise slots are created with prob = kUnboundProb and rebound per policy.
constexpr double kUnboundProb = -1.0;

struct Instruction {
    Op op;
    std::vector<uint32_t> targets;  // Cz / Depolarize2: consecutive pairs
    double prob = 0.0;
    int32_t site = -1;   // owning gate site, noise ops only
    int32_t cycle = -1;  // cycle tag (init layer -> 0, final readout -> T-1)
};

struct Detector {
    uint32_t det_id;
    std::vector<uint32_t> measurements;  // absolute measurement-record indices
    uint32_t space_coord;                // measure-qubit index
    int time_coord;                      // 0 = first round, 1..T-1 = bulk, T = final
};

struct Circuit {
    CodeKind code = CodeKind::Repetition;
    Basis basis = Basis::Z;
    uint32_t distance = 0;
    uint32_t num_cycles = 0;

    std::vector<Qubit> qubits;
    std::vector<GateSite> sites;
    std::vector<Instruction> instructions;
    std::vector<Detector> detectors;
    std::vector<uint32_t> observable;  // measurement-record indices
    uint32_t num_measurements = 0;
    std::vector<uint32_t> noise_slots;  // instruction indices, program order

    uint32_t num_qubits() const { return static_cast<uint32_t>(qubits.size()); }
    uint32_t num_sq_sites() const;
    uint32_t num_cz_sites() const;
    bool all_noise_bound() const;
};

// Bit-flip (Z-stabilizer) repetition-code memory with CZ+H syndrome
// extraction. d odd >= 3, T >= 1 cycles.
Circuit build_repetition_code_memory(uint32_t d, uint32_t T);

// Rotated surface-code memory of odd distance d, T cycles: reset, H on
// measure qubits, four CZ layers in the NE/NW/SE/SW (X type) and
// NE/SE/NW/SW (Z type) staircase schedule, H, measure. Detectors follow
// the memory basis in the first and final rounds, both types in bulk.
Circuit build_surface_code_memory(uint32_t d, uint32_t T, Basis basis = Basis::Z);

// ---- error propagation -------------------------------------------------

// 1 = X, 2 = Z, 3 = Y.
enum : uint8_t { kPauliX = 1, kPauliZ = 2, kPauliY = 3 };

struct ErrorEffect {
    std::vector<uint32_t> flipped_detectors;  // sorted
    bool flips_observable = false;
};

// Propagates a single Pauli error inserted immediately after the
// instruction at instr_pos through the noiseless remainder of the circuit.
ErrorEffect propagate_single_error(const Circuit& c, uint32_t instr_pos, uint32_t target, uint8_t pauli);

struct RegionEntry {
    uint32_t site_id;
    int cycle;
    bool operator==(const RegionEntry&) const = default;
    bool operator<(const RegionEntry& o) const {
        return site_id != o.site_id ? site_id < o.site_id : cycle < o.cycle;
    }
};

struct DetectingRegionMap {
    // regions[det_id]: sorted unique (site, cycle) pairs whose errors can
    // flip that detector; site_regions is the cycle-collapsed projection.
    std::vector<std::vector<RegionEntry>> regions;
    std::vector<std::vector<uint32_t>> site_regions;
};

DetectingRegionMap compute_detecting_regions(const Circuit& c);

// ---- text interchange format -------------------------------------------

// One instruction per line (`H 0 3`, `CZ 0 1`, `DEPOLARIZE1(0.001) 4`,
// `M 2`, `X_FLIP(0.001) 2`, `R 0 1`), then `DETECTOR rec[-k] ...` and
// `OBSERVABLE rec[-k] ...` with offsets counted back from the most recent
// measurement. `#` starts a comment.
std::string dump_circuit(const Circuit& c);
Circuit parse_circuit(const std::string& text);

}  // namespace qecsteer
