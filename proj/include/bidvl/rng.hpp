#pragma once

#include <cstdint>
#include <cstddef>

namespace bidvl {

// PCG32 (XSH-RR variant): 64-bit state, multiplier 6364136223846793005,
// odd per-stream increment derived from the stream id. Identical seed and
// stream give identical output on every platform. Gaussian draws use
// Box-Muller on pairs of uniforms, second value cached.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream_id = 0);

    static Rng split(std::uint64_t seed, std::uint64_t stream_id) { return Rng(seed, stream_id); }

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    double uniform();                       // [0,1), 53-bit mantissa
    double uniform(double lo, double hi);   // [lo,hi)
    double normal();                        // N(0,1)

    std::size_t below(std::size_t n);       // uniform in {0,...,n-1}, unbiased

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace bidvl
