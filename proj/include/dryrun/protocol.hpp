#pragma once

// Payload layouts of the messages exchanged between the two shims.
// Every request carries the issuing thread and the device ticks of driver
// idle time (explicit delays, poll backoff) accumulated since the previous
// request; the device lets that time pass before handling the request.

#include <cstdint>
#include <map>
#include <vector>

#include "dryrun/deferral.hpp"
#include "dryrun/memory.hpp"
#include "dryrun/polling.hpp"

namespace dryrun::wire {

struct RequestHeader {
    uint32_t thread = 0;
    Ticks advance = 0;
};

struct SyncAccess {
    RequestHeader hdr;
    AccessOp op = AccessOp::Read;
    uint32_t addr = 0;
    uint64_t value = 0;
};

struct CommitRequest {
    RequestHeader hdr;
    uint64_t commit_id = 0;
    std::vector<QueuedAccess> entries;
};

struct LoopOffload {
    RequestHeader hdr;
    OffloadRequest request;
};

struct LoopResult {
    OffloadResult result;
    uint64_t first_log_index = 0;
};

struct MemPush {
    RequestHeader hdr;
    uint64_t job_id = 0;
    std::map<PageIndex, PagePerm> pagetable;
    MemoryDelta delta;
};

struct IrqWait {
    RequestHeader hdr;
    /// Naive configuration: pull the whole image rather than the metastate delta.
    bool full_image = false;
};

struct IrqEvent {
    uint64_t irq_status = 0;
    MemoryDelta delta;
};

struct ReplayPrefix {
    uint64_t index = 0;
};

Bytes encode(const SyncAccess& m);
Bytes encode(const CommitRequest& m);
Bytes encode(const CommitResult& m);
Bytes encode(const LoopOffload& m);
Bytes encode(const LoopResult& m);
Bytes encode(const MemPush& m);
Bytes encode(const IrqWait& m);
Bytes encode(const IrqEvent& m);
Bytes encode(const ReplayPrefix& m);
Bytes encode_value(uint64_t v);

SyncAccess decode_sync_access(ByteSpan b);
CommitRequest decode_commit_request(ByteSpan b);
CommitResult decode_commit_result(ByteSpan b);
LoopOffload decode_loop_offload(ByteSpan b);
LoopResult decode_loop_result(ByteSpan b);
MemPush decode_mem_push(ByteSpan b);
IrqWait decode_irq_wait(ByteSpan b);
IrqEvent decode_irq_event(ByteSpan b);
ReplayPrefix decode_replay_prefix(ByteSpan b);
uint64_t decode_value(ByteSpan b);

void write_sym(ByteWriter& w, const SymExprPtr& e);
SymExprPtr read_sym(ByteReader& r);
void write_pagetable(ByteWriter& w, const std::map<PageIndex, PagePerm>& pt);
std::map<PageIndex, PagePerm> read_pagetable(ByteReader& r);

}  // namespace dryrun::wire
