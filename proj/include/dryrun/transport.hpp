#pragma once

// Simulated cloud <-> client channel under one virtual clock.
//
// Timing: a request departs at the driver's current time, waits for the
// uplink to be free, takes payload*8/bandwidth to serialize and rtt/2 to
// propagate. The device handles requests one at a time in arrival order; its
// busy time is the device ticks the request consumed. The response then
// crosses the downlink the same way. Both links are FIFO, so responses come
// back in request order.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "dryrun/bytes.hpp"
#include "dryrun/sim_time.hpp"

namespace dryrun {

struct NetworkConfig {
    std::string name = "cellular";
    SimTime rtt = std::chrono::milliseconds(50);
    double bandwidth_bps = 40e6;

    static NetworkConfig wifi();
    static NetworkConfig cellular();
    static NetworkConfig custom(double rtt_ms, double bw_mbps);
    /// `wifi` or `cellular`.
    static NetworkConfig preset(std::string_view name);
    void validate() const;
    [[nodiscard]] SimTime serialization(size_t bytes) const;

    bool operator==(const NetworkConfig&) const = default;
};

enum class MsgKind : uint16_t {
    CommitRequest = 1,
    CommitResponse = 2,
    SyncAccess = 3,
    SyncAccessResp = 4,
    LoopOffload = 5,
    LoopResult = 6,
    MemPush = 7,
    MemPull = 8,
    IrqEvent = 9,
    ReplayPrefix = 10,
    Ack = 11,
    IrqWait = 12,
};
std::string_view to_string(MsgKind k);
/// The one response kind each request kind is answered with.
MsgKind response_kind(MsgKind request);
bool is_request(MsgKind k);

struct Message {
    MsgKind kind = MsgKind::Ack;
    uint64_t seq = 0;
    Bytes payload;
};

/// Frame: magic `CDY1`, u32 length of (kind..payload), u16 kind, u64 seq,
/// payload, u32 CRC32 over (kind..payload); little-endian.
inline constexpr size_t kFrameOverhead = 4 + 4 + 2 + 8 + 4;
Bytes encode_frame(const Message& m);
/// Throws FrameCorrupt on bad magic, length, CRC, or unknown kind.
Message decode_frame(ByteSpan frame);

/// The device-side endpoint: consumes one decoded request, returns the
/// response payload and how many device ticks it kept the device busy.
class Endpoint {
public:
    virtual ~Endpoint() = default;
    struct Reply {
        Bytes payload;
        Ticks busy = 0;
    };
    virtual Reply handle(MsgKind kind, ByteSpan payload) = 0;
};

struct ChannelCounters {
    uint64_t bytes_to_device = 0;
    uint64_t bytes_from_device = 0;
    uint64_t frame_bytes_to_device = 0;
    uint64_t frame_bytes_from_device = 0;
    uint64_t messages_to_device = 0;
    uint64_t messages_from_device = 0;
    /// Times the driver had to block for a response.
    uint64_t blocking_waits = 0;
};

class Channel {
public:
    using Ticket = uint64_t;

    Channel(NetworkConfig net, Endpoint& device);

    /// Request departs now; the driver carries on.
    Ticket send_async(MsgKind kind, Bytes payload);
    /// Blocks (virtual time) until the response is in, then hands it over.
    /// AwaitBeforeSend for a ticket never issued or already awaited.
    Bytes await(Ticket t);
    /// send_async + await.
    Bytes send_request(MsgKind kind, Bytes payload) { return await(send_async(kind, std::move(payload))); }

    [[nodiscard]] SimTime arrival(Ticket t) const;
    [[nodiscard]] bool ready(Ticket t) const { return arrival(t) <= now_; }
    /// Advances driver time to `t`; counts one blocking wait if time moved.
    void block_until(SimTime t);
    /// Responses still in flight are dropped (used after rollback).
    void discard_pending();
    [[nodiscard]] size_t pending() const { return pending_.size(); }

    [[nodiscard]] SimTime now() const { return now_; }
    /// Local driver time passing (explicit delays).
    void advance(SimTime dt) { now_ += dt; }

    [[nodiscard]] const ChannelCounters& counters() const { return counters_; }
    [[nodiscard]] const NetworkConfig& config() const { return net_; }

    /// Sees every request kind as it crosses the wire (test oracle hook).
    void set_observer(std::function<void(MsgKind, size_t payload_bytes)> f) { observer_ = std::move(f); }

private:
    struct Pending {
        SimTime arrival;
        Message response;
    };

    NetworkConfig net_;
    Endpoint& device_;
    SimTime now_{0};
    SimTime uplink_free_{0};
    SimTime downlink_free_{0};
    SimTime device_free_{0};
    uint64_t seq_up_ = 0;
    uint64_t seq_down_ = 0;
    Ticket next_ticket_ = 1;
    std::map<Ticket, Pending> pending_;
    ChannelCounters counters_;
    std::function<void(MsgKind, size_t)> observer_;
};

}  // namespace dryrun
