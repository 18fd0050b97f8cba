#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qecsteer/circuit.h"

namespace qecsteer {

struct DetectionRecord {
    uint32_t num_detectors = 0;
    uint64_t shots = 0;
    uint32_t cycles_per_shot = 0;
    size_t words_per_row = 0;
    std::vector<uint64_t> events;   // num_detectors rows of words_per_row
    std::vector<uint64_t> logical;  // words_per_row

    bool event_bit(uint32_t det, uint64_t shot) const {
        return (events[det * words_per_row + (shot >> 6)] >> (shot & 63)) & 1;
    }
    bool logical_bit(uint64_t shot) const { return (logical[shot >> 6] >> (shot & 63)) & 1; }
};

// Deterministic single-Pauli insertions, applied right after the given
// instruction to one shot. pauli: 1 = X, 2 = Z, 3 = Y.
struct PauliInjection {
    uint32_t instr_pos;
    uint32_t qubit;
    uint8_t pauli;
    uint64_t shot;
};

// Monte Carlo frame sampling of all detectors and the logical observable.
// Bit-identical for a given (circuit, shots, seed, shot_offset) regardless
// of thread count; runs covering adjacent shot ranges concatenate exactly
// when split at block boundaries (4096 shots).
DetectionRecord sample(const Circuit& c, uint64_t shots, uint64_t seed, int threads = 1,
                       uint64_t shot_offset = 0);
DetectionRecord sample_with_injections(const Circuit& c, uint64_t shots, uint64_t seed,
                                       const std::vector<PauliInjection>& injections, int threads = 1,
                                       uint64_t shot_offset = 0);

constexpr uint64_t kShotBlock = 4096;

std::vector<double> detection_fractions(const DetectionRecord& rec);
double mean_detection_rate(const DetectionRecord& rec);  // the surrogate objective C
std::vector<uint64_t> per_detector_counts(const DetectionRecord& rec);
uint64_t count_events(const DetectionRecord& rec);

// QSDR1 debug dump plus a bit-packed .b8 logical-flip vector.
void write_record_files(const DetectionRecord& rec, const std::string& path_base);
DetectionRecord read_record_files(const std::string& path_base);

}  // namespace qecsteer
