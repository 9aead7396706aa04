// rng.hpp — seeded, streamed random numbers.
//
// Reproducibility contract: a (master_seed, stream_id) pair fully determines
// the draw sequence, and distinct stream ids give statistically independent
// streams. The engine is std::mt19937_64 (bit-exact across platforms); all
// variates are derived from raw 64-bit words by hand so no library
// distribution (whose algorithm is implementation-defined) enters the output.

#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace bpre {

struct RandomSource {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class RngStream {
public:
    explicit RngStream(RandomSource src)
        : eng_(splitmix64(splitmix64(src.master_seed) ^ splitmix64(~src.stream_id))) {}
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : RngStream(RandomSource{master_seed, stream_id}) {}

    std::uint64_t raw() { return eng_(); }

    // uniform on [0,1) with 53 random bits
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // inverse-CDF draw from a cumulative row (cdf.back() ~ 1 up to rounding)
    int sample_cdf(std::span<const double> cdf) {
        const double u = uniform01();
        for (std::size_t j = 0; j + 1 < cdf.size(); ++j)
            if (u < cdf[j]) return static_cast<int>(j);
        return static_cast<int>(cdf.size()) - 1;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace bpre
