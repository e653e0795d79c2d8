#pragma once

#include <cmath>
#include <cstdint>

namespace graphbm {

// Counter-based per-stream generator (splitmix64 output function over an
// incrementing counter). A stream is fully determined by (seed, stream id),
// so Monte Carlo results depend only on the seed and the path index, never
// on scheduling.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
    {
        key_ = mix(seed + 0x9E3779B97F4A7C15ull) ^ mix(stream + 0xD1B54A32D192ED03ull);
        counter_ = 0;
    }

    std::uint64_t next_u64()
    {
        counter_ += 0x9E3779B97F4A7C15ull;
        return mix(key_ + counter_);
    }

    // Uniform on (0,1), never returns an endpoint.
    double uniform()
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal()
    {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 6.283185307179586476925286766559 * uniform();
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    bool coin() { return (next_u64() >> 63) != 0; }

private:
    static std::uint64_t mix(std::uint64_t z)
    {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace graphbm
