#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A stream is identified by (seed, stream id); drawing the k-th block of a
// stream is a pure function of (seed, stream id, k). Monte Carlo replicates
// use their replicate index as the stream id, so results do not depend on
// which worker ran them.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace exch {

class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block counter, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeylA;
                key[1] += kWeylB;
            }
            counter = one_round(counter, key);
        }
        return counter;
    }

private:
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;
    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;

    static Block one_round(const Block& c, const Key& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Sequential view of one Philox stream keyed by (seed, stream id).
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_id_(stream_id) {}

    std::uint32_t next_u32() {
        if (used_ == 4) refill();
        return buffer_[used_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound), exactly unbiased (Lemire's method).
    std::uint64_t bounded(std::uint64_t bound) {
        if (bound <= 1) return 0;
        if (bound <= 0xFFFFFFFFull) {
            const auto b = static_cast<std::uint32_t>(bound);
            std::uint64_t m = static_cast<std::uint64_t>(next_u32()) * b;
            auto low = static_cast<std::uint32_t>(m);
            if (low < b) {
                const std::uint32_t threshold = static_cast<std::uint32_t>(-b) % b;
                while (low < threshold) {
                    m = static_cast<std::uint64_t>(next_u32()) * b;
                    low = static_cast<std::uint32_t>(m);
                }
            }
            return m >> 32;
        }
        // Wide bounds never occur in this library's use; plain rejection is fine.
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return r % bound;
    }

    /// Standard normal via Box-Muller; the second variate is discarded so that
    /// each call consumes a fixed number of raw draws.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    void refill() {
        const Philox4x32::Block counter{
            static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
            static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
        buffer_ = Philox4x32::generate(counter, key_);
        ++block_;
        used_ = 0;
    }

    Philox4x32::Key key_;
    std::uint64_t stream_id_;
    std::uint64_t block_ = 0;
    Philox4x32::Block buffer_{};
    int used_ = 4;
};

}  // namespace exch
