#pragma once

#include <cstdint>

namespace blindsim {

// All simulation time is integer nanoseconds. The engine validates that every
// configured duration is a multiple of the scenario tick.
using Nanoseconds = std::int64_t;

constexpr Nanoseconds kMicrosecond = 1000;
constexpr Nanoseconds kMillisecond = 1000 * kMicrosecond;
constexpr Nanoseconds kSecond = 1000 * kMillisecond;

constexpr bool is_tick_aligned(Nanoseconds d, Nanoseconds tick_ns)
{
    return tick_ns > 0 && d % tick_ns == 0;
}

} // namespace blindsim
