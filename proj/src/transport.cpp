#include "dryrun/transport.hpp"

#include <algorithm>
#include <cmath>

#include "dryrun/crypto.hpp"

namespace dryrun {

NetworkConfig NetworkConfig::wifi() { return {"wifi", std::chrono::milliseconds(20), 80e6}; }
NetworkConfig NetworkConfig::cellular() { return {"cellular", std::chrono::milliseconds(50), 40e6}; }

NetworkConfig NetworkConfig::custom(double rtt_ms, double bw_mbps) {
    NetworkConfig n{"custom", SimTime(static_cast<int64_t>(std::llround(rtt_ms * 1e6))), bw_mbps * 1e6};
    n.validate();
    return n;
}

NetworkConfig NetworkConfig::preset(std::string_view name) {
    if (name == "wifi") return wifi();
    if (name == "cellular") return cellular();
    throw Error(ErrorCode::InvalidArgument, "unknown network preset `" + std::string(name) + "`");
}

void NetworkConfig::validate() const {
    if (rtt <= SimTime::zero()) throw Error(ErrorCode::InvalidArgument, "rtt must be positive");
    if (!(bandwidth_bps > 0)) throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
}

SimTime NetworkConfig::serialization(size_t bytes) const {
    return SimTime(static_cast<int64_t>(std::llround(static_cast<double>(bytes) * 8.0 / bandwidth_bps * 1e9)));
}

std::string_view to_string(MsgKind k) {
    switch (k) {
        case MsgKind::CommitRequest: return "CommitRequest";
        case MsgKind::CommitResponse: return "CommitResponse";
        case MsgKind::SyncAccess: return "SyncAccess";
        case MsgKind::SyncAccessResp: return "SyncAccessResp";
        case MsgKind::LoopOffload: return "LoopOffload";
        case MsgKind::LoopResult: return "LoopResult";
        case MsgKind::MemPush: return "MemPush";
        case MsgKind::MemPull: return "MemPull";
        case MsgKind::IrqEvent: return "IrqEvent";
        case MsgKind::ReplayPrefix: return "ReplayPrefix";
        case MsgKind::Ack: return "Ack";
        case MsgKind::IrqWait: return "IrqWait";
    }
    return "?";
}

MsgKind response_kind(MsgKind request) {
    switch (request) {
        case MsgKind::CommitRequest: return MsgKind::CommitResponse;
        case MsgKind::SyncAccess: return MsgKind::SyncAccessResp;
        case MsgKind::LoopOffload: return MsgKind::LoopResult;
        case MsgKind::MemPush: return MsgKind::Ack;
        case MsgKind::IrqWait: return MsgKind::IrqEvent;
        case MsgKind::ReplayPrefix: return MsgKind::Ack;
        default: throw Error(ErrorCode::ProtocolError, std::string(to_string(request)) + " is not a request");
    }
}

bool is_request(MsgKind k) {
    switch (k) {
        case MsgKind::CommitRequest:
        case MsgKind::SyncAccess:
        case MsgKind::LoopOffload:
        case MsgKind::MemPush:
        case MsgKind::IrqWait:
        case MsgKind::ReplayPrefix: return true;
        default: return false;
    }
}

namespace {
constexpr uint32_t kFrameMagic = 0x31594443;  // "CDY1"

bool known_kind(uint16_t k) { return k >= 1 && k <= 12; }
}  // namespace

Bytes encode_frame(const Message& m) {
    Bytes out;
    out.reserve(m.payload.size() + kFrameOverhead);
    ByteWriter w(out);
    w.u32(kFrameMagic);
    w.u32(static_cast<uint32_t>(2 + 8 + m.payload.size()));
    size_t body = out.size();
    w.u16(static_cast<uint16_t>(m.kind));
    w.u64(m.seq);
    w.raw(m.payload);
    w.u32(crc32(ByteSpan(out).subspan(body)));
    return out;
}

Message decode_frame(ByteSpan frame) {
    ByteReader r(frame, ErrorCode::FrameCorrupt);
    if (r.u32() != kFrameMagic) throw Error(ErrorCode::FrameCorrupt, "bad frame magic");
    uint32_t len = r.u32();
    if (len < 10 || len + 12 != frame.size()) throw Error(ErrorCode::FrameCorrupt, "frame length mismatch");
    ByteSpan body = frame.subspan(8, len);
    uint32_t crc = static_cast<uint32_t>(frame[8 + len]) | static_cast<uint32_t>(frame[9 + len]) << 8 |
                   static_cast<uint32_t>(frame[10 + len]) << 16 | static_cast<uint32_t>(frame[11 + len]) << 24;
    if (crc32(body) != crc) throw Error(ErrorCode::FrameCorrupt, "frame CRC mismatch");
    Message m;
    uint16_t kind = r.u16();
    if (!known_kind(kind)) throw Error(ErrorCode::FrameCorrupt, "unknown message kind " + std::to_string(kind));
    m.kind = static_cast<MsgKind>(kind);
    m.seq = r.u64();
    ByteSpan payload = r.raw(len - 10);
    m.payload.assign(payload.begin(), payload.end());
    return m;
}

Channel::Channel(NetworkConfig net, Endpoint& device) : net_(std::move(net)), device_(device) { net_.validate(); }

Channel::Ticket Channel::send_async(MsgKind kind, Bytes payload) {
    if (!is_request(kind)) throw Error(ErrorCode::ProtocolError, "cannot send a " + std::string(to_string(kind)));
    const SimTime half = net_.rtt / 2;
    size_t req_bytes = payload.size();

    Message req{kind, ++seq_up_, std::move(payload)};
    Bytes up = encode_frame(req);
    counters_.bytes_to_device += req_bytes;
    counters_.frame_bytes_to_device += up.size();
    ++counters_.messages_to_device;
    if (observer_) observer_(kind, req_bytes);

    SimTime tx = std::max(now_, uplink_free_);
    uplink_free_ = tx + net_.serialization(req_bytes);
    SimTime at_device = uplink_free_ + half;

    Message got = decode_frame(up);
    if (got.seq != req.seq) throw Error(ErrorCode::FrameCorrupt, "uplink sequence out of order");
    SimTime start = std::max(at_device, device_free_);
    Endpoint::Reply reply = device_.handle(got.kind, got.payload);
    device_free_ = start + ticks_to_time(reply.busy);

    size_t resp_bytes = reply.payload.size();
    Message resp{response_kind(kind), ++seq_down_, std::move(reply.payload)};
    Bytes down = encode_frame(resp);
    counters_.bytes_from_device += resp_bytes;
    counters_.frame_bytes_from_device += down.size();
    ++counters_.messages_from_device;

    SimTime rx = std::max(device_free_, downlink_free_);
    downlink_free_ = rx + net_.serialization(resp_bytes);
    SimTime back = downlink_free_ + half;

    Message decoded = decode_frame(down);
    if (decoded.seq != resp.seq || decoded.kind != resp.kind)
        throw Error(ErrorCode::FrameCorrupt, "downlink frame mismatch");
    Ticket t = next_ticket_++;
    pending_.emplace(t, Pending{back, std::move(decoded)});
    return t;
}

SimTime Channel::arrival(Ticket t) const {
    auto it = pending_.find(t);
    if (it == pending_.end()) throw Error(ErrorCode::AwaitBeforeSend, "ticket " + std::to_string(t) + " is not in flight");
    return it->second.arrival;
}

void Channel::block_until(SimTime t) {
    if (t > now_) {
        now_ = t;
        ++counters_.blocking_waits;
    }
}

Bytes Channel::await(Ticket t) {
    auto it = pending_.find(t);
    if (it == pending_.end())
        throw Error(ErrorCode::AwaitBeforeSend, "ticket " + std::to_string(t) + " was never sent or already awaited");
    block_until(it->second.arrival);
    Bytes out = std::move(it->second.response.payload);
    pending_.erase(it);
    return out;
}

void Channel::discard_pending() { pending_.clear(); }

}  // namespace dryrun
