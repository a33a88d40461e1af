#pragma once

// The driver side: interprets a workload's threads and routes every register
// access, poll, and job through the selected protocol configuration.
//
//   naive  every access is one synchronous exchange; full memory images move
//          at each job boundary
//   m      as naive, but only synced pages travel, as range-coded deltas
//   md     m plus deferral: accesses inside hot scopes are queued and
//          committed in batches; simple polls run on the device
//   mds    md plus speculation: commits whose outcome the history predicts
//          are sent without waiting for the response
//
// Time: SimTime is the driver's clock. It moves when the driver blocks on a
// response and by explicit delays. A round trip is one blocking wait.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dryrun/deferral.hpp"
#include "dryrun/device.hpp"
#include "dryrun/memsync.hpp"
#include "dryrun/recording.hpp"
#include "dryrun/speculation.hpp"
#include "dryrun/transport.hpp"
#include "dryrun/workload.hpp"

namespace dryrun {

enum class Mode : uint8_t { Naive, M, MD, MDS };
std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

enum class Schedule : uint8_t { RoundRobin, Random };

struct RunOptions {
    Mode mode = Mode::MD;
    NetworkConfig net;
    DeviceConfig device;
    SpeculationPolicy spec;
    /// Shared across runs when set; otherwise the run starts from an empty history.
    CommitHistory* history = nullptr;
    /// Flip bit 0 of the first predicted value of this commit id (or of a
    /// predicted poll outcome).
    std::optional<uint64_t> inject_at;
    Schedule schedule = Schedule::RoundRobin;
    uint64_t schedule_seed = 0;
    /// Input page content; defaults to the workload's `input` directives.
    const PageSet* inputs = nullptr;
    size_t queue_cap = 4096;
    uint32_t max_expr_depth = 64;
    uint64_t max_steps = 100'000'000;
};

struct RunMetrics {
    uint64_t round_trips = 0;
    uint64_t commits = 0;
    uint64_t speculated_commits = 0;
    uint64_t mispredictions = 0;
    uint64_t recoveries = 0;
    uint64_t stalls = 0;
    SimTime sim_time{0};
    uint64_t bytes_to_device = 0;
    uint64_t bytes_from_device = 0;
    uint64_t messages_to_device = 0;
    /// Register accesses carried inside commits (offloaded poll reads included).
    uint64_t deferred_accesses = 0;
    /// Register accesses the device applied (from the recording).
    uint64_t register_accesses = 0;
    uint64_t sync_accesses = 0;
    uint64_t polls = 0;
    uint64_t polls_offloaded = 0;
    uint64_t polls_predicted = 0;
    uint64_t local_poll_iterations = 0;
    uint64_t jobs = 0;
    uint64_t memory_bytes_to_device = 0;
    uint64_t memory_bytes_from_device = 0;
    uint64_t externs = 0;
    uint64_t safety_violations = 0;
    /// 1 when the fault-injection hook altered a prediction.
    uint64_t injections = 0;
    uint64_t replayed_entries = 0;
    /// Messages sent while the driver was fast-forwarding from the log.
    uint64_t replay_messages = 0;
    std::array<uint64_t, kCategoryCount> commits_by_category{};
    std::array<uint64_t, kReasonCount> commits_by_reason{};

    [[nodiscard]] double avg_batch_size() const {
        return commits ? static_cast<double>(deferred_accesses) / static_cast<double>(commits) : 0.0;
    }
};

struct ExternOutput {
    uint32_t thread = 0;
    uint64_t value = 0;
    bool operator==(const ExternOutput&) const = default;
};

struct RunReport {
    RunMetrics metrics;
    std::vector<std::map<std::string, uint64_t>> vars;
    std::map<std::string, uint64_t> shared;
    std::vector<ExternOutput> externs;
    std::vector<Mispredict> mispredicts;
    Recording recording;
    Digest device_state{};
    /// Pages the device's jobs wrote, with their final content.
    PageSet outputs;
};

RunReport run(const Program& program, const RunOptions& options);

}  // namespace dryrun
