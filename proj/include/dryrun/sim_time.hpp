#pragma once

#include <chrono>
#include <cstdint>

namespace dryrun {

/// Virtual time of the simulated cloud/client system.
using SimTime = std::chrono::nanoseconds;

/// Device work is measured in ticks; one tick is one microsecond of SimTime.
using Ticks = uint64_t;

constexpr SimTime ticks_to_time(Ticks t) { return std::chrono::microseconds(static_cast<int64_t>(t)); }

constexpr double to_seconds(SimTime t) { return std::chrono::duration<double>(t).count(); }

constexpr uint32_t kPageSize = 4096;

}  // namespace dryrun
