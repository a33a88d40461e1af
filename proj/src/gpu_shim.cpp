#include "dryrun/gpu_shim.hpp"

#include <unordered_map>

namespace dryrun {

GpuShim::GpuShim(Device& dev, MemoryLayout layout, MemoryImage image, RecordingHeader header)
    : dev_(dev), layout_(std::move(layout)), image_(std::move(image)), rec_(std::move(header)) {
    dev_.reset();
    dev_.memory() = image_;
}

void GpuShim::begin(const wire::RequestHeader& h) { dev_.advance(h.advance); }

uint64_t GpuShim::access(uint32_t thread, AccessOp op, uint32_t addr, uint64_t value) {
    LogEntry e;
    e.kind = op == AccessOp::Read ? EntryKind::RegRead : EntryKind::RegWrite;
    e.thread = thread;
    e.tick = dev_.now();
    e.addr = addr;
    if (op == AccessOp::Read) {
        value = dev_.read(addr);
    } else {
        if (on_write_) on_write_(addr, value);
        dev_.write(addr, value);
    }
    e.value = value;
    rec_.append(std::move(e));
    return value;
}

Endpoint::Reply GpuShim::handle(MsgKind kind, ByteSpan payload) {
    Ticks start = dev_.now();
    Reply r;
    switch (kind) {
        case MsgKind::CommitRequest: r.payload = on_commit(payload); break;
        case MsgKind::SyncAccess: r.payload = on_sync_access(payload); break;
        case MsgKind::LoopOffload: r.payload = on_offload(payload); break;
        case MsgKind::MemPush: r.payload = on_push(payload); break;
        case MsgKind::IrqWait: r.payload = on_irq_wait(payload); break;
        case MsgKind::ReplayPrefix: r.payload = on_replay(payload); break;
        default: throw Error(ErrorCode::ProtocolError, "device cannot handle " + std::string(to_string(kind)));
    }
    r.busy = dev_.now() >= start ? dev_.now() - start : 0;
    return r;
}

Bytes GpuShim::on_sync_access(ByteSpan p) {
    auto m = wire::decode_sync_access(p);
    begin(m.hdr);
    ++stats_.sync_accesses;
    uint64_t v = access(m.hdr.thread, m.op, m.addr, m.value);
    return wire::encode_value(m.op == AccessOp::Read ? v : 0);
}

Bytes GpuShim::on_commit(ByteSpan p) {
    auto m = wire::decode_commit_request(p);
    begin(m.hdr);
    ++stats_.commits;
    CommitResult res;
    res.commit_id = m.commit_id;
    res.first_log_index = rec_.size();
    std::unordered_map<SymbolId, uint64_t> bound;
    for (const auto& e : m.entries) {
        if (e.op == AccessOp::Read) {
            uint64_t v = access(m.hdr.thread, AccessOp::Read, e.addr, 0);
            bound[e.sym] = v;
            res.reads.push_back(v);
            continue;
        }
        SymExprPtr resolved = SymExpr::substitute(e.value, [&](SymbolId s) -> std::optional<uint64_t> {
            auto it = bound.find(s);
            return it == bound.end() ? std::nullopt : std::optional<uint64_t>(it->second);
        });
        if (resolved->kind() != SymExpr::Kind::Literal)
            throw Error(ErrorCode::SymbolLeak, "write of unresolved " + resolved->to_string() + " reached the device");
        access(m.hdr.thread, AccessOp::Write, e.addr, resolved->literal_value());
    }
    return wire::encode(res);
}

Bytes GpuShim::on_offload(ByteSpan p) {
    auto m = wire::decode_loop_offload(p);
    begin(m.hdr);
    ++stats_.offloads;
    wire::LoopResult out;
    out.first_log_index = rec_.size();
    uint32_t thread = m.hdr.thread, reg = m.request.loop.reg;
    out.result = execute_poll(dev_, m.request, [&](Ticks tick, uint64_t v) {
        LogEntry e;
        e.kind = EntryKind::RegRead;
        e.thread = thread;
        e.tick = tick;
        e.addr = reg;
        e.value = v;
        rec_.append(std::move(e));
    });
    return wire::encode(out);
}

Bytes GpuShim::on_push(ByteSpan p) {
    auto m = wire::decode_mem_push(p);
    begin(m.hdr);
    ++stats_.pushes;
    if (dev_.any_mapped()) throw Error(ErrorCode::ProtocolError, "memory push while the device still owns shared pages");

    LogEntry boundary;
    boundary.kind = EntryKind::JobBoundary;
    boundary.thread = m.hdr.thread;
    boundary.tick = dev_.now();
    boundary.value = m.job_id;
    rec_.append(std::move(boundary));

    std::set<PageIndex> touched;
    for (const auto& r : m.delta.records) touched.insert(r.page);
    MemoryImage before = copy_pages(dev_.memory(), touched);
    apply_delta(dev_.memory(), m.delta);
    dev_.map_pages(m.pagetable);

    LogEntry e;
    e.kind = EntryKind::MemPush;
    e.thread = m.hdr.thread;
    e.tick = dev_.now();
    e.pagetable = m.pagetable;
    e.delta = diff_pages(before, dev_.memory(), touched, true);
    rec_.append(std::move(e));

    push_pages_.clear();
    for (const auto& [pg, perm] : m.pagetable) push_pages_.insert(pg);
    at_push_ = copy_pages(dev_.memory(), push_pages_);
    return {};
}

Bytes GpuShim::on_irq_wait(ByteSpan p) {
    auto m = wire::decode_irq_wait(p);
    begin(m.hdr);
    ++stats_.pulls;
    dev_.finish_job();
    if (!dev_.irq_pending()) throw Error(ErrorCode::ProtocolError, "interrupt wait with no completed job");

    wire::IrqEvent ev;
    if (const RegisterSpec* s = dev_.map().find(regs::kJobIrqStatus)) ev.irq_status = dev_.peek(s->addr);
    LogEntry irq;
    irq.kind = EntryKind::Irq;
    irq.thread = m.hdr.thread;
    irq.tick = dev_.now();
    irq.value = ev.irq_status;
    rec_.append(std::move(irq));

    if (m.full_image) {
        ev.delta = full_dump(dev_.memory(), [](PageIndex) { return true; });
    } else {
        std::set<PageIndex> synced;
        for (PageIndex pg : push_pages_)
            if (layout_.synced(pg)) synced.insert(pg);
        ev.delta = diff_pages(at_push_, dev_.memory(), synced, true);
    }

    LogEntry pull;
    pull.kind = EntryKind::MemPull;
    pull.thread = m.hdr.thread;
    pull.tick = dev_.now();
    pull.delta = diff_pages(at_push_, dev_.memory(), push_pages_, true);
    rec_.append(std::move(pull));

    dev_.unmap_all();
    push_pages_.clear();
    at_push_ = MemoryImage{};
    return wire::encode(ev);
}

Bytes GpuShim::on_replay(ByteSpan p) {
    auto m = wire::decode_replay_prefix(p);
    ++stats_.replays;
    std::vector<LogEntry> log = rec_.entries();
    uint64_t snapped = replay_prefix(log, m.index, dev_, image_);
    rec_.truncate(snapped);
    stats_.replayed_entries += snapped;
    push_pages_.clear();
    at_push_ = MemoryImage{};
    return wire::encode_value(snapped);
}

}  // namespace dryrun
