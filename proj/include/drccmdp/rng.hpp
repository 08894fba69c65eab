#pragma once

#include <cstdint>

#include "drccmdp/linalg.hpp"

namespace drccmdp {

/// Counter-based random stream: the value at position n depends only on
/// (seed, stream, n), so draws are reproducible bit-for-bit, independent of
/// call order across shards, and a stream can be split without coordination.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() { return at(counter_++); }
    /// Value at an absolute position without advancing the cursor.
    std::uint64_t at(std::uint64_t counter) const;

    /// Uniform draw in [0, 1) with 53 random bits.
    prec_t uniform01() { return (next_u64() >> 11) * 0x1.0p-53; }
    /// Standard normal via the inverse-CDF transform.
    prec_t normal();
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) { return next_u64() % bound; }

    CounterRng substream(std::uint64_t idx) const {
        return CounterRng(seed_, stream_ * 0x9e3779b97f4a7c15ULL + idx + 1);
    }

private:
    std::uint64_t seed_, stream_;
    std::uint64_t counter_ = 0;
};

}  // namespace drccmdp
