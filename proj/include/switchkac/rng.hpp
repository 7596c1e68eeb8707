#pragma once

#include <cmath>
#include <cstdint>

namespace switchkac {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

// One independent random stream per (seed, stream_id, path_index), derived by
// hashing the triple into xoshiro256++ state. Streams never share state, so
// ensembles can be generated in any order or on any number of workers and
// still reproduce bit-identically.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t path_index) {
        std::uint64_t h = seed;
        detail::splitmix64(h);
        h ^= stream_id * 0xd1342543de82ef95ULL;
        detail::splitmix64(h);
        h ^= path_index * 0xaf251af3b0f025b5ULL;
        for (auto& word : state_) word = detail::splitmix64(h);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal, Marsaglia polar method with one cached deviate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double exponential(double rate) { return -std::log(1.0 - uniform()) / rate; }

    // Exact in law for any finite mean: product method, with the mean split
    // into chunks small enough that the uniform product cannot underflow.
    std::uint64_t poisson(double mean) {
        std::uint64_t total = 0;
        while (mean > 50.0) {
            total += poisson_small(50.0);
            mean -= 50.0;
        }
        return total + poisson_small(mean);
    }

private:
    std::uint64_t poisson_small(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = uniform();
        while (prod > limit) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace switchkac
