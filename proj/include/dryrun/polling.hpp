#pragma once

// Polling loops executed on the device in one exchange.
//
// Iteration semantics (shared by the device-side executor, local execution
// in the runtime, and the test oracles): read the register, count the read,
// test the predicate; on success stop, otherwise back off and try again
// until `max_iters` reads have been made. A timeout is reported as
// iterations = max_iters with the predicate false.

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "dryrun/device.hpp"
#include "dryrun/workload.hpp"

namespace dryrun {

struct OffloadRequest {
    PollLoopSpec loop;
    /// Concrete snapshot of every variable the loop references.
    std::map<std::string, uint64_t> captured;
};

struct OffloadResult {
    uint64_t iterations = 0;
    uint64_t final_value = 0;
    bool timed_out = false;
    std::map<std::string, uint64_t> updated_vars;

    bool operator==(const OffloadResult&) const = default;
};

/// Concrete evaluation of a workload expression; unknown variables read as 0.
uint64_t eval_concrete(const Expr& e, const std::map<std::string, uint64_t>& vars);

using ReadObserver = std::function<void(Ticks tick, uint64_t value)>;

/// Runs the loop on the device. Throws NotSimpleLoop for loops that cannot be
/// offloaded. `on_read` sees each read with the device tick it started at.
OffloadResult execute_poll(Device& dev, const OffloadRequest& req, const ReadObserver& on_read = {});

/// Builds the request: captures the loop's referenced variables.
OffloadRequest make_offload_request(const PollLoopSpec& loop, const std::map<std::string, uint64_t>& vars);

}  // namespace dryrun
