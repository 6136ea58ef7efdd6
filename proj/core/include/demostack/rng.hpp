#pragma once

#include <cmath>
#include <cstdint>

namespace demostack {

/// Counter-based generator: output depends only on (key, counter), so streams
/// are reproducible across platforms and safe to split by counter range.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
        : key_(key), counter_(counter) {}

    /// Mixes two seeds into a single stream key.
    static std::uint64_t derive_key(std::uint64_t a, std::uint64_t b) {
        return mix(mix(a + 0x9e3779b97f4a7c15ULL) ^ mix(b + 0x517cc1b727220a95ULL));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = key_ + counter_ * 0x9e3779b97f4a7c15ULL;
        ++counter_;
        return mix(z);
    }

    /// Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(next_double() * static_cast<double>(n)) % n;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t counter_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace demostack
