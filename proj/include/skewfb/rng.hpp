#pragma once

#include <cstdint>
#include <random>

namespace skewfb {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive decorrelated substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of substream `stream` under `master`. Path i of an ensemble always
/// uses substream i, so results do not depend on evaluation order.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return mix64(mix64(master) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(substream_seed(master, stream)),
                      static_cast<std::uint32_t>(substream_seed(master, stream) >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(master)};
    return Rng(seq);
}

}  // namespace skewfb
