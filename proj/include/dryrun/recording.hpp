#pragma once

// Interaction recordings: what the device saw during a dryrun, in the order it
// saw it, and the device-side replay that re-drives a fresh device from it.
//
// File layout (little-endian):
//   "CODYREC1"
//   u32 header length, header
//   u32 entry count, per entry: u16 kind, u64 seq, u32 length, fields
//   u32 blob length, blob (memory-sync payloads referenced by entries)
//   32-byte HMAC-SHA256 over everything before it
//
// Header: u32 version, device-map hash, workload hash, mode, network
// config, device config, the device map text, the program's page list and
// its input pages.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dryrun/device.hpp"
#include "dryrun/memsync.hpp"
#include "dryrun/transport.hpp"

namespace dryrun {

enum class EntryKind : uint16_t { RegRead = 1, RegWrite = 2, MemPush = 3, MemPull = 4, Irq = 5, JobBoundary = 6 };
std::string_view to_string(EntryKind k);

struct LogEntry {
    EntryKind kind = EntryKind::RegRead;
    uint64_t seq = 0;
    uint32_t thread = 0;
    /// Device clock when the event was applied.
    Ticks tick = 0;
    /// RegRead / RegWrite: register; Irq: unused.
    uint32_t addr = 0;
    /// RegRead / RegWrite: value; Irq: interrupt status; JobBoundary: job id.
    uint64_t value = 0;
    /// MemPush: pagetable entries added for the job.
    std::map<PageIndex, PagePerm> pagetable;
    /// MemPush / MemPull: what actually changed in device memory.
    MemoryDelta delta;

    bool operator==(const LogEntry& o) const;
};

/// Equality ignoring seq/thread/tick: what the device was asked to do.
bool same_event(const LogEntry& a, const LogEntry& b);

struct RecordingHeader {
    uint32_t version = 1;
    Digest device_map_hash{};
    Digest workload_hash{};
    std::string mode;
    NetworkConfig net;
    DeviceConfig device;
    std::string device_map_text;
    std::vector<PageIndex> pages;
    std::vector<PageIndex> inputs;

    bool operator==(const RecordingHeader&) const = default;
};

struct Recording {
    RecordingHeader header;
    std::vector<LogEntry> entries;
    Digest digest{};

    /// Serialized form, digest included.
    [[nodiscard]] Bytes encode() const;
    /// DigestMismatch when the trailing digest does not verify; CorruptStream on malformed bytes.
    static Recording decode(ByteSpan data);
    void save(const std::string& path) const;
    static Recording load(const std::string& path);
};

/// Keyed digest placeholder for the cloud's signature.
inline constexpr std::string_view kSigningKey = "dryrun-cloud-signing-key";

/// Append-only event log kept next to the device.
class Recorder {
public:
    explicit Recorder(RecordingHeader header = {}) : header_(std::move(header)) {}

    /// Returns the index of the appended entry.
    uint64_t append(LogEntry e);
    void truncate(uint64_t size);
    [[nodiscard]] const std::vector<LogEntry>& entries() const { return entries_; }
    [[nodiscard]] uint64_t size() const { return entries_.size(); }
    [[nodiscard]] bool finalized() const { return finalized_; }
    RecordingHeader& header() { return header_; }

    /// Freezes the log; later appends raise RecordAfterFinalize.
    Recording finalize();

private:
    RecordingHeader header_;
    std::vector<LogEntry> entries_;
    uint64_t next_seq_ = 1;
    bool finalized_ = false;
};

struct ReplayReport {
    /// Output pages the replayed jobs wrote.
    PageSet outputs;
    std::optional<uint64_t> divergence;
    std::string divergence_detail;
    uint64_t entries_replayed = 0;
    uint64_t jobs = 0;
    uint64_t network_messages = 0;
    Digest state_hash{};
};

/// Drives a device from a log. Register writes are re-issued, reads are
/// compared against the recorded value (nondet registers exempt), memory
/// pushes are applied except for pages in `fresh_inputs` or pages the device
/// itself produced, and pull records are checked against the device.
class ReplayEngine {
public:
    ReplayEngine(Device& dev, std::set<PageIndex> fresh_inputs) : dev_(dev), fresh_(std::move(fresh_inputs)) {}

    /// Applies entries [from, to). Stops at the first divergence and returns its index.
    std::optional<uint64_t> run(const std::vector<LogEntry>& entries, uint64_t from, uint64_t to);
    [[nodiscard]] const std::string& detail() const { return detail_; }
    [[nodiscard]] uint64_t jobs() const { return jobs_; }

private:
    bool apply(const LogEntry& e);

    Device& dev_;
    std::set<PageIndex> fresh_;
    std::string detail_;
    uint64_t jobs_ = 0;
};

/// Device-side replay with no driver. Checks the digest and the device map.
/// `inputs` supplies the content of input pages (missing pages read as zero).
ReplayReport replay(const Recording& rec, Device& dev, const PageSet& inputs);

/// Largest index <= upto that is not inside a job (between a MemPush and
/// its MemPull): such prefixes are rounded down to the job's boundary entry.
uint64_t snap_to_job_boundary(const std::vector<LogEntry>& entries, uint64_t upto);

/// Resets `dev`, loads `image`, and replays entries [0, upto') where upto' is
/// the snapped index, which is returned. Divergence on mismatch.
uint64_t replay_prefix(const std::vector<LogEntry>& entries, uint64_t upto, Device& dev, const MemoryImage& image);

/// Image a replay starts from: the listed pages, inputs taken from `inputs`.
MemoryImage replay_image(const RecordingHeader& h, const PageSet& inputs);

}  // namespace dryrun
