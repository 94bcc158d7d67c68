#pragma once

// Reproducible random streams. Every consumer (synthetic data, bootstrap
// resampling, allocation permutations) draws from xoshiro256** whose state is
// expanded from a 64-bit seed with splitmix64, so any implementation of those
// two published algorithms reproduces the same sequences bit for bit.

#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace gravflow::rng {

inline constexpr const char* kGeneratorName = "xoshiro256**/splitmix64";
inline constexpr const char* kShuffleName = "fisher-yates(descending)/lemire-bounded";

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Independent stream seed for (base, index): one splitmix64 step from a state
// that mixes both values.
inline constexpr std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t s = base ^ (index * 0xD1B54A32D192ED03ULL);
    splitmix64(s);
    return splitmix64(s);
}

class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit constexpr Xoshiro256(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) from the top 53 bits.
    constexpr double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound) by Lemire's multiply-and-reject method.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) return 0;
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4]{};
};

// In-place Fisher-Yates: for i from n-1 down to 1, swap v[i] with v[below(i+1)].
template <class T>
void shuffle(std::span<T> v, Xoshiro256& g) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = g.below(i);
        using std::swap;
        swap(v[i - 1], v[j]);
    }
}

}  // namespace gravflow::rng
