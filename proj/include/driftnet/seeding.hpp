#pragma once

#include <cstdint>
#include <initializer_list>

namespace driftnet {

/// Stream roles mixed into derived seeds so that training data, test data,
/// network initialisation and mini-batch shuffling never share a stream.
enum class StreamRole : std::uint64_t {
    train_path = 1,
    test_path = 2,
    network_init = 3,
    shuffle = 4,
};

/// SplitMix64 finaliser.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a child seed from a master seed and an ordered list of
/// coordinates: h0 = splitmix64(master), h_{k+1} = splitmix64(h_k ^ splitmix64(part_k)).
/// Adding coordinates to a grid never changes the seeds of existing cells.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

/// Seed for one Monte Carlo replicate of one (skip, T) grid cell.
/// T enters through its bit pattern scaled to microseconds.
std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t skip, double horizon, std::uint64_t replicate,
                             StreamRole role) noexcept;

} // namespace driftnet
