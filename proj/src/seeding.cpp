#include "driftnet/seeding.hpp"

#include <cmath>

namespace driftnet {

std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t skip, double horizon, std::uint64_t replicate,
                             StreamRole role) noexcept {
    const auto horizon_us = static_cast<std::uint64_t>(std::llround(horizon * 1e6));
    return derive_seed(master, {skip, horizon_us, replicate, static_cast<std::uint64_t>(role)});
}

} // namespace driftnet
