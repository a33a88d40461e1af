#pragma once

// Device side of the channel: applies requests to the device in arrival
// order, records every event, and runs memory syncs and prefix replays.

#include <cstdint>
#include <set>

#include "dryrun/device.hpp"
#include "dryrun/memsync.hpp"
#include "dryrun/protocol.hpp"
#include "dryrun/recording.hpp"
#include "dryrun/transport.hpp"

namespace dryrun {

struct GpuShimStats {
    uint64_t commits = 0;
    uint64_t sync_accesses = 0;
    uint64_t offloads = 0;
    uint64_t pushes = 0;
    uint64_t pulls = 0;
    uint64_t replays = 0;
    uint64_t replayed_entries = 0;
};

class GpuShim final : public Endpoint {
public:
    /// `image` is the device's memory at power-on; `layout` says which pages sync.
    GpuShim(Device& dev, MemoryLayout layout, MemoryImage image, RecordingHeader header = {});

    Reply handle(MsgKind kind, ByteSpan payload) override;

    [[nodiscard]] Device& device() { return dev_; }
    [[nodiscard]] Recorder& recorder() { return rec_; }
    [[nodiscard]] const Recorder& recorder() const { return rec_; }
    [[nodiscard]] const GpuShimStats& stats() const { return stats_; }
    [[nodiscard]] const MemoryImage& initial_image() const { return image_; }
    /// Called for every value written to the device (safety monitor hook).
    void set_write_observer(std::function<void(uint32_t addr, uint64_t value)> f) { on_write_ = std::move(f); }

private:
    void begin(const wire::RequestHeader& h);
    uint64_t access(uint32_t thread, AccessOp op, uint32_t addr, uint64_t value);
    Bytes on_commit(ByteSpan p);
    Bytes on_sync_access(ByteSpan p);
    Bytes on_offload(ByteSpan p);
    Bytes on_push(ByteSpan p);
    Bytes on_irq_wait(ByteSpan p);
    Bytes on_replay(ByteSpan p);

    Device& dev_;
    MemoryLayout layout_;
    MemoryImage image_;
    Recorder rec_;
    /// Device memory of the mapped pages as of the last push.
    MemoryImage at_push_;
    std::set<PageIndex> push_pages_;
    GpuShimStats stats_;
    std::function<void(uint32_t, uint64_t)> on_write_;
};

}  // namespace dryrun
