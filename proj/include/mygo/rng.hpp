#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace mygo {

/// Counter-based generator: output i is a SplitMix64 finalizer applied to
/// key + i * golden. The full state is (key, counter), so snapshots are tiny
/// and every stochastic op in a run is reproducible from the seed alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : key_(seed) {}

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    /// Derive an independent stream (used for per-epoch shuffles).
    Rng split() { return Rng(next_u64()); }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

    /// 16-byte little-endian blob: key then counter.
    std::array<std::uint8_t, 16> state() const;
    static Rng from_state(std::span<const std::uint8_t> blob);

    bool operator==(const Rng&) const = default;

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace mygo
