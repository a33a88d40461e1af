#pragma once

// Mock memory-mapped GPU.
//
// The device is a pure function of the access sequence it receives: its clock
// counts device-busy ticks (register accesses, poll backoff, job execution,
// idle time the driver explicitly waits for), never network time. That keeps
// register semantics identical however the accesses were batched in transit.

#include <cstdint>
#include <map>
#include <optional>
#include <set>

#include "dryrun/crypto.hpp"
#include "dryrun/device_map.hpp"
#include "dryrun/job_descriptor.hpp"
#include "dryrun/memory.hpp"
#include "dryrun/sim_time.hpp"

namespace dryrun {

enum class JobFsm : uint8_t { Idle = 0, Running = 1, Done = 2 };
enum class AccessOp : uint8_t { Read = 0, Write = 1 };

struct RegisterAccess {
    AccessOp op = AccessOp::Read;
    uint32_t addr = 0;
    /// Write value; empty means an unresolved symbol reached the device.
    std::optional<uint64_t> value;

    static RegisterAccess read(uint32_t addr) { return {AccessOp::Read, addr, std::nullopt}; }
    static RegisterAccess write(uint32_t addr, uint64_t v) { return {AccessOp::Write, addr, v}; }
};

struct TickCosts {
    Ticks access = 1;
    Ticks job = 1000;
    Ticks power_transition = 5;

    bool operator==(const TickCosts&) const = default;
};

struct DeviceConfig {
    uint64_t seed = 1;
    TickCosts ticks;

    bool operator==(const DeviceConfig&) const = default;
};

/// xorshift64* seeded through one splitmix64 step (zero state replaced by the
/// golden-ratio constant). Drives every nondet register read.
class NondetStream {
public:
    explicit NondetStream(uint64_t seed = 1);
    uint64_t next();
    [[nodiscard]] uint64_t state() const { return state_; }
    bool operator==(const NondetStream&) const = default;

private:
    uint64_t state_;
};

struct JobResult {
    uint64_t job_id = 0;
    bool fault = false;
    std::vector<PageIndex> outputs;
};

class Device {
public:
    explicit Device(DeviceMap map, DeviceConfig config = {});

    /// Back to power-on state: registers at init, memory empty, clock zero.
    void reset();

    /// Applies one access in arrival order. Returns the read value for reads.
    std::optional<uint64_t> apply_access(const RegisterAccess& acc);
    uint64_t read(uint32_t addr) { return *apply_access(RegisterAccess::read(addr)); }
    void write(uint32_t addr, uint64_t v) { apply_access(RegisterAccess::write(addr, v)); }

    /// Executes the running job against device memory. Called automatically
    /// when the clock passes the completion deadline.
    JobResult run_job();

    [[nodiscard]] Ticks now() const { return clock_; }
    /// Lets `dt` ticks pass, firing the job-completion event if it falls due.
    void advance(Ticks dt);
    /// Replay support: moves the clock forward to `t` (never backwards).
    void advance_to(Ticks t);
    /// Advances to the completion deadline of the running job, if any.
    void finish_job();
    [[nodiscard]] std::optional<Ticks> job_due() const;

    [[nodiscard]] MemoryImage& memory() { return mem_; }
    [[nodiscard]] const MemoryImage& memory() const { return mem_; }
    void map_pages(const std::map<PageIndex, PagePerm>& entries);
    void unmap_all();
    [[nodiscard]] bool mapped(PageIndex p) const;
    [[nodiscard]] bool any_mapped() const;
    [[nodiscard]] const std::map<PageIndex, PagePerm>& pagetable() const { return pagetable_; }

    [[nodiscard]] bool irq_pending() const { return irq_pending_; }
    [[nodiscard]] JobFsm job_fsm() const { return fsm_; }
    [[nodiscard]] const std::set<PageIndex>& written_outputs() const { return written_outputs_; }
    [[nodiscard]] uint64_t jobs_completed() const { return jobs_completed_; }

    [[nodiscard]] const DeviceMap& map() const { return map_; }
    [[nodiscard]] const DeviceConfig& config() const { return config_; }
    /// Current register value without read side effects.
    [[nodiscard]] uint64_t peek(uint32_t addr) const;

    [[nodiscard]] Digest state_hash() const;
    bool same_state(const Device& o) const { return state_hash() == o.state_hash(); }

private:
    struct RegState {
        uint64_t value = 0;
        bool pending = false;
        uint64_t target = 0;
        Ticks ready_at = 0;
    };

    void settle();
    void settle_power(RegState& r) const;
    void check_mapped(PageIndex p) const;

    DeviceMap map_;
    DeviceConfig config_;
    std::map<uint32_t, RegState> regs_;
    std::optional<uint32_t> job_start_, irq_status_, irq_clear_;

    JobFsm fsm_ = JobFsm::Idle;
    bool irq_pending_ = false;
    Ticks due_ = 0;
    PageIndex job_desc_ = 0;
    Ticks clock_ = 0;
    NondetStream nondet_;
    uint64_t jobs_completed_ = 0;

    MemoryImage mem_;
    std::map<PageIndex, PagePerm> pagetable_;
    std::set<PageIndex> written_outputs_;
};

}  // namespace dryrun
