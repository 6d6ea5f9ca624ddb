#ifndef BRIDGEGP_RNG_HPP
#define BRIDGEGP_RNG_HPP

#include <cstdint>
#include <random>

namespace bridgegp {

using Rng = std::mt19937_64;

/// splitmix64 mix; used to derive independent stream seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for sub-stream `stream` (chain index, replicate index, ...) of `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return mix_seed(master ^ mix_seed(stream + 1));
}

} // namespace bridgegp

#endif
