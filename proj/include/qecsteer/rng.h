#pragma once

#include <cstdint>

namespace qecsteer {

// splitmix64 finalizer, used for seed derivation.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent sub-seed from a master seed, a purpose tag and up
// to two stream indices. Used so every source of randomness in the project
// is a pure function of the experiment seed.
inline uint64_t derive_seed(uint64_t master, uint64_t tag, uint64_t a = 0, uint64_t b = 0) {
    return mix64(mix64(mix64(master ^ tag) + a) + b);
}

// Purpose tags for derive_seed.
namespace seed_tag {
constexpr uint64_t kNoise = 0x4e4f495345ULL;     // simulator noise instructions
constexpr uint64_t kModel = 0x4d4f44454cULL;     // error-model sampling
constexpr uint64_t kAgent = 0x4147454e54ULL;     // policy candidate sampling
constexpr uint64_t kCalib = 0x43414c4942ULL;     // sensitivity calibration draws
constexpr uint64_t kTrain = 0x545241494eULL;     // per-epoch candidate simulation
constexpr uint64_t kScen = 0x5343454e41ULL;      // scenario evaluation simulation
constexpr uint64_t kEval = 0x4556414c55ULL;      // decoded evaluation epochs
constexpr uint64_t kSpoil = 0x53504f494cULL;     // policy spoiling for recovery runs
constexpr uint64_t kDirs = 0x4449525343ULL;      // gradient-check directions
constexpr uint64_t kGrid = 0x4752494450ULL;      // phase-diagram grid points
constexpr uint64_t kInit = 0x494e495450ULL;      // randomized policy initialization
}  // namespace seed_tag

// Philox4x32-10 counter-based generator. A stream is identified by
// (key, stream); draws are indexed by an incrementing 64-bit counter, so
// any partition of work across threads reproduces the serial sequence.
class RngStream {
public:
    RngStream(uint64_t key, uint64_t stream)
        : key_{static_cast<uint32_t>(key), static_cast<uint32_t>(key >> 32)},
          stream_{static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)} {}

    uint64_t next_u64() {
        if (buf_pos_ >= 2) refill();
        return buf64_[buf_pos_++];
    }

    // Uniform in [0, 1), 53-bit mantissa.
    double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double next_double_open() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // Uniform integer in [0, n), n >= 1. Unbiased via rejection.
    uint64_t next_below(uint64_t n);

    // Standard normal via Box-Muller, one value cached.
    double next_gaussian();

private:
    void refill();
    uint32_t key_[2];
    uint32_t stream_[2];
    uint64_t counter_ = 0;
    uint64_t buf64_[2] = {0, 0};
    int buf_pos_ = 2;
    bool have_gauss_ = false;
    double gauss_cache_ = 0;
};

}  // namespace qecsteer
