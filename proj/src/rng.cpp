#include "fedvln/rng.hpp"

#include "fedvln/errors.hpp"

namespace fedvln {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return mix64(seed + kGolden * (salt + 1));
}

std::uint64_t SeededRng::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double SeededRng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededRng::next_below(std::uint64_t n) {
    if (n == 0) throw ValidationError("next_below: bound must be positive");
    const std::uint64_t threshold = (0ULL - n) % n; // 2^64 mod n
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

} // namespace fedvln
