#pragma once

// Synthetic driver programs stamped out of a library of recurring segments:
// init probe, power transitions, cache flushes, job setup, interrupt
// acknowledge, a lock-protected read-modify-write, and configuration bursts
// that pad the trace to an exact dynamic access count.
//
// The counts are exact under default device tick costs: a transition poll
// reads three times (the power FSM settles 5 ticks after the write, each
// probe costs 1 tick plus 2 ticks of backoff), a check poll reads once.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dryrun/workload.hpp"

namespace dryrun {

struct WorkloadProfile {
    std::string name = "custom";
    uint64_t seed = 1;
    uint32_t n_jobs = 0;
    /// Total dynamic register accesses of one naive run; 0 keeps the segment minimum.
    uint64_t accesses = 0;
    uint32_t n_polls = 0;
    uint32_t meta_pages = 8;
    uint32_t pages_per_job = 32;
    /// Share of padding reads that hit the nondet register.
    double nondet_fraction = 0.0;
    /// Polls that keep an iteration counter and so cannot be offloaded.
    uint32_t complex_polls = 0;
    Hints hints = Hints::Exec;
};

std::optional<WorkloadProfile> bundled_profile(std::string_view name);
std::vector<std::string> bundled_profile_names();

/// The register map every generated program embeds (same as data/mali-like.map).
std::string_view builtin_device_map();

std::string synthesize_workload_text(const WorkloadProfile& profile);
Program synthesize_workload(const WorkloadProfile& profile);

}  // namespace dryrun
