#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dryrun/crypto.hpp"

namespace dryrun {

/// Read/write semantics of a register.
///   constant     plain storage; reads have no side effect
///   counter      read returns the value, then increments it
///   clear-on-read read returns the value, then zeroes it
///   job-status   read-only mirror of the job state machine (0 idle, 1 running, 2 done)
///   power-fsm    a write requests a state; reads report the old state until the
///                transition completes `power_transition` ticks later
///   nondet       every read draws a fresh value from the device's seeded generator
enum class RegKind : uint8_t { Constant, Counter, ClearOnRead, JobStatus, PowerFsm, Nondet };

std::string_view to_string(RegKind kind);
std::optional<RegKind> parse_reg_kind(std::string_view s);

/// Reads of these kinds leave device state untouched, so re-executing them is harmless.
constexpr bool is_idempotent_read(RegKind kind) {
    return kind == RegKind::Constant || kind == RegKind::JobStatus || kind == RegKind::PowerFsm;
}

struct RegisterSpec {
    uint32_t addr = 0;
    std::string name;
    RegKind kind = RegKind::Constant;
    uint64_t init = 0;

    [[nodiscard]] bool nondet_seed_dependent() const { return kind == RegKind::Nondet; }
    bool operator==(const RegisterSpec&) const = default;
};

/// Registers with fixed roles in the job protocol.
namespace regs {
inline constexpr std::string_view kJobStart = "JOB_START";
inline constexpr std::string_view kJobIrqStatus = "JOB_IRQ_STATUS";
inline constexpr std::string_view kJobIrqClear = "JOB_IRQ_CLEAR";
}  // namespace regs

class DeviceMap {
public:
    DeviceMap() = default;

    /// Parses `REG <hex-addr> <name> <kind> <hex-init>` lines; `#` starts a comment.
    static DeviceMap parse(std::string_view text);
    static DeviceMap load(const std::string& path);

    /// Parses one `REG ...` line (already stripped of comments); used by the workload parser too.
    void add_line(std::string_view line, int line_no);
    void add(RegisterSpec spec);

    [[nodiscard]] const RegisterSpec* find(uint32_t addr) const;
    [[nodiscard]] const RegisterSpec* find(std::string_view name) const;
    [[nodiscard]] const RegisterSpec& at(uint32_t addr) const;
    [[nodiscard]] const std::vector<RegisterSpec>& registers() const { return regs_; }
    [[nodiscard]] bool empty() const { return regs_.empty(); }
    [[nodiscard]] bool has_nondet() const;

    /// Canonical text form (sorted by address); `parse(to_text())` reproduces the map.
    [[nodiscard]] std::string to_text() const;
    [[nodiscard]] Digest hash() const { return sha256(to_text()); }

    bool operator==(const DeviceMap& o) const { return regs_ == o.regs_; }

private:
    std::vector<RegisterSpec> regs_;
    std::unordered_map<uint32_t, size_t> by_addr_;
    std::unordered_map<std::string, size_t> by_name_;
};

}  // namespace dryrun
