#pragma once

#include <cstdint>
#include <vector>

namespace fedvln {

// splitmix64 finalizer; the mixing core of the generator below.
std::uint64_t mix64(std::uint64_t z);

// Stable child-seed derivation: mix64(seed + GOLDEN * (salt + 1)).
// Used to fan a run seed out into per-phase, per-round, and per-client
// streams without any ordering coupling between consumers.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

// Deterministic counter-based generator (splitmix64). Chosen over
// std::mt19937_64 + std::uniform_* because the full draw sequence must be
// bit-identical across platforms and standard library versions.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53 random bits.
    double next_double();

    // Uniform in [0, n), modulo-bias free via threshold rejection. n must be > 0.
    std::uint64_t next_below(std::uint64_t n);

    // In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

} // namespace fedvln
