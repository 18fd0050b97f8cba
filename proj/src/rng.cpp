#include "qecsteer/rng.h"

#include <cmath>

namespace qecsteer {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(uint32_t c[4], const uint32_t k[2]) {
    uint64_t p0 = static_cast<uint64_t>(kPhiloxM0) * c[0];
    uint64_t p1 = static_cast<uint64_t>(kPhiloxM1) * c[2];
    uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    uint32_t n0 = hi1 ^ c[1] ^ k[0];
    uint32_t n1 = lo1;
    uint32_t n2 = hi0 ^ c[3] ^ k[1];
    uint32_t n3 = lo0;
    c[0] = n0;
    c[1] = n1;
    c[2] = n2;
    c[3] = n3;
}

}  // namespace

void RngStream::refill() {
    uint32_t c[4] = {static_cast<uint32_t>(counter_), static_cast<uint32_t>(counter_ >> 32), stream_[0],
                     stream_[1]};
    uint32_t k[2] = {key_[0], key_[1]};
    for (int r = 0; r < 10; r++) {
        philox_round(c, k);
        k[0] += kPhiloxW0;
        k[1] += kPhiloxW1;
    }
    buf64_[0] = (static_cast<uint64_t>(c[1]) << 32) | c[0];
    buf64_[1] = (static_cast<uint64_t>(c[3]) << 32) | c[2];
    buf_pos_ = 0;
    counter_++;
}

uint64_t RngStream::next_below(uint64_t n) {
    // Rejection sampling on the top bits; bias-free for any n.
    if (n <= 1) return 0;
    uint64_t mask = ~0ULL >> __builtin_clzll(n - 1 | 1);
    for (;;) {
        uint64_t v = next_u64() & mask;
        if (v < n) return v;
    }
}

double RngStream::next_gaussian() {
    if (have_gauss_) {
        have_gauss_ = false;
        return gauss_cache_;
    }
    double u1 = next_double_open();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    gauss_cache_ = r * std::sin(a);
    have_gauss_ = true;
    return r * std::cos(a);
}

}  // namespace qecsteer
