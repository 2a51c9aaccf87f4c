#include "mygo/rng.hpp"

#include "mygo/errors.hpp"

namespace mygo {

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t bound) {
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
}

std::array<std::uint8_t, 16> Rng::state() const {
    std::array<std::uint8_t, 16> out{};
    for (int i = 0; i < 8; ++i) {
        out[i] = static_cast<std::uint8_t>(key_ >> (8 * i));
        out[8 + i] = static_cast<std::uint8_t>(counter_ >> (8 * i));
    }
    return out;
}

Rng Rng::from_state(std::span<const std::uint8_t> blob) {
    if (blob.size() != 16) throw DataError("rng state blob must be 16 bytes");
    Rng rng;
    rng.key_ = 0;
    rng.counter_ = 0;
    for (int i = 0; i < 8; ++i) {
        rng.key_ |= static_cast<std::uint64_t>(blob[i]) << (8 * i);
        rng.counter_ |= static_cast<std::uint64_t>(blob[8 + i]) << (8 * i);
    }
    return rng;
}

}  // namespace mygo
