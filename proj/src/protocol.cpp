#include "dryrun/protocol.hpp"

namespace dryrun::wire {

namespace {

constexpr uint8_t kTagSymbol = 0, kTagLiteral = 1, kTagBinary = 2;
constexpr uint32_t kMaxExprDepth = 4096;

void write_header(ByteWriter& w, const RequestHeader& h) {
    w.u32(h.thread);
    w.u64(h.advance);
}

RequestHeader read_header(ByteReader& r) {
    RequestHeader h;
    h.thread = r.u32();
    h.advance = r.u64();
    return h;
}

BinOp read_op(ByteReader& r) {
    uint8_t op = r.u8();
    if (op > static_cast<uint8_t>(BinOp::Gt)) throw Error(ErrorCode::CorruptStream, "unknown operator");
    return static_cast<BinOp>(op);
}

SymExprPtr read_sym_depth(ByteReader& r, uint32_t depth) {
    if (depth > kMaxExprDepth) throw Error(ErrorCode::CorruptStream, "expression too deep");
    switch (r.u8()) {
        case kTagSymbol: return SymExpr::symbol(r.u64());
        case kTagLiteral: return SymExpr::literal(r.u64());
        case kTagBinary: {
            BinOp op = read_op(r);
            SymExprPtr l = read_sym_depth(r, depth + 1);
            SymExprPtr rr = read_sym_depth(r, depth + 1);
            return SymExpr::binary(op, l, rr);
        }
        default: throw Error(ErrorCode::CorruptStream, "unknown expression tag");
    }
}

void write_expr(ByteWriter& w, const ExprPtr& e) {
    switch (e->kind) {
        case Expr::Kind::Var:
            w.u8(0);
            w.str(e->var);
            break;
        case Expr::Kind::Literal:
            w.u8(1);
            w.u64(e->value);
            break;
        case Expr::Kind::Binary:
            w.u8(2);
            w.u8(static_cast<uint8_t>(e->op));
            write_expr(w, e->lhs);
            write_expr(w, e->rhs);
            break;
    }
}

ExprPtr read_expr(ByteReader& r, uint32_t depth = 0) {
    if (depth > kMaxExprDepth) throw Error(ErrorCode::CorruptStream, "expression too deep");
    switch (r.u8()) {
        case 0: return Expr::make_var(r.str());
        case 1: return Expr::make_literal(r.u64());
        case 2: {
            BinOp op = read_op(r);
            ExprPtr l = read_expr(r, depth + 1);
            ExprPtr rr = read_expr(r, depth + 1);
            return Expr::make_binary(op, l, rr);
        }
        default: throw Error(ErrorCode::CorruptStream, "unknown expression tag");
    }
}

void finish(const ByteReader& r) {
    if (!r.done()) throw Error(ErrorCode::CorruptStream, "trailing bytes in message");
}

void write_delta(ByteWriter& w, const MemoryDelta& d) { w.blob(d.encode()); }
MemoryDelta read_delta(ByteReader& r) {
    Bytes b = r.blob();
    return MemoryDelta::decode(b);
}

}  // namespace

void write_sym(ByteWriter& w, const SymExprPtr& e) {
    switch (e->kind()) {
        case SymExpr::Kind::Symbol:
            w.u8(kTagSymbol);
            w.u64(e->symbol_id());
            break;
        case SymExpr::Kind::Literal:
            w.u8(kTagLiteral);
            w.u64(e->literal_value());
            break;
        case SymExpr::Kind::Binary:
            w.u8(kTagBinary);
            w.u8(static_cast<uint8_t>(e->op()));
            write_sym(w, e->lhs());
            write_sym(w, e->rhs());
            break;
    }
}

SymExprPtr read_sym(ByteReader& r) { return read_sym_depth(r, 0); }

void write_pagetable(ByteWriter& w, const std::map<PageIndex, PagePerm>& pt) {
    w.u32(static_cast<uint32_t>(pt.size()));
    for (const auto& [p, perm] : pt) {
        w.u32(p);
        w.u8(static_cast<uint8_t>(perm.readable | perm.writable << 1 | perm.executable << 2 | perm.mapped_to_device << 3));
    }
}

std::map<PageIndex, PagePerm> read_pagetable(ByteReader& r) {
    std::map<PageIndex, PagePerm> pt;
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
        PageIndex p = r.u32();
        uint8_t f = r.u8();
        if (f > 0xF) throw Error(ErrorCode::CorruptStream, "bad page permission bits");
        pt[p] = PagePerm{(f & 1) != 0, (f & 2) != 0, (f & 4) != 0, (f & 8) != 0};
    }
    return pt;
}

Bytes encode(const SyncAccess& m) {
    ByteWriter w;
    write_header(w, m.hdr);
    w.u8(static_cast<uint8_t>(m.op));
    w.u32(m.addr);
    w.u64(m.value);
    return w.take();
}

SyncAccess decode_sync_access(ByteSpan b) {
    ByteReader r(b);
    SyncAccess m;
    m.hdr = read_header(r);
    uint8_t op = r.u8();
    if (op > 1) throw Error(ErrorCode::CorruptStream, "bad access op");
    m.op = static_cast<AccessOp>(op);
    m.addr = r.u32();
    m.value = r.u64();
    finish(r);
    return m;
}

Bytes encode(const CommitRequest& m) {
    ByteWriter w;
    write_header(w, m.hdr);
    w.u64(m.commit_id);
    w.u32(static_cast<uint32_t>(m.entries.size()));
    for (const auto& e : m.entries) {
        w.u8(static_cast<uint8_t>(e.op));
        w.u32(e.addr);
        if (e.op == AccessOp::Read) w.u64(e.sym);
        else write_sym(w, e.value);
    }
    return w.take();
}

CommitRequest decode_commit_request(ByteSpan b) {
    ByteReader r(b);
    CommitRequest m;
    m.hdr = read_header(r);
    m.commit_id = r.u64();
    uint32_t n = r.u32();
    m.entries.reserve(std::min<uint32_t>(n, 4096));
    for (uint32_t i = 0; i < n; ++i) {
        QueuedAccess e;
        uint8_t op = r.u8();
        if (op > 1) throw Error(ErrorCode::CorruptStream, "bad access op");
        e.op = static_cast<AccessOp>(op);
        e.addr = r.u32();
        if (e.op == AccessOp::Read) e.sym = r.u64();
        else e.value = read_sym(r);
        m.entries.push_back(std::move(e));
    }
    finish(r);
    return m;
}

Bytes encode(const CommitResult& m) {
    ByteWriter w;
    w.u64(m.commit_id);
    w.u32(static_cast<uint32_t>(m.reads.size()));
    for (uint64_t v : m.reads) w.u64(v);
    w.u64(m.first_log_index);
    return w.take();
}

CommitResult decode_commit_result(ByteSpan b) {
    ByteReader r(b);
    CommitResult m;
    m.commit_id = r.u64();
    uint32_t n = r.u32();
    if (n > r.remaining() / 8) throw Error(ErrorCode::CorruptStream, "bad read count");
    for (uint32_t i = 0; i < n; ++i) m.reads.push_back(r.u64());
    m.first_log_index = r.u64();
    finish(r);
    return m;
}

Bytes encode(const LoopOffload& m) {
    ByteWriter w;
    write_header(w, m.hdr);
    const PollLoopSpec& l = m.request.loop;
    w.u32(l.reg);
    w.u8(l.mask ? 1 : 0);
    w.u64(l.mask.value_or(0));
    w.u8(static_cast<uint8_t>(l.cmp));
    write_expr(w, l.rhs ? l.rhs : Expr::make_literal(0));
    w.u64(l.max_iters);
    w.u64(l.backoff);
    w.str(l.into);
    w.str(l.count_var);
    w.u8(l.simple ? 1 : 0);
    w.u32(static_cast<uint32_t>(m.request.captured.size()));
    for (const auto& [k, v] : m.request.captured) {
        w.str(k);
        w.u64(v);
    }
    return w.take();
}

LoopOffload decode_loop_offload(ByteSpan b) {
    ByteReader r(b);
    LoopOffload m;
    m.hdr = read_header(r);
    PollLoopSpec& l = m.request.loop;
    l.reg = r.u32();
    bool has_mask = r.u8() != 0;
    uint64_t mask = r.u64();
    if (has_mask) l.mask = mask;
    l.cmp = read_op(r);
    l.rhs = read_expr(r);
    l.max_iters = r.u64();
    l.backoff = r.u64();
    l.into = r.str();
    l.count_var = r.str();
    l.simple = r.u8() != 0;
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
        std::string k = r.str();
        m.request.captured[k] = r.u64();
    }
    finish(r);
    return m;
}

Bytes encode(const LoopResult& m) {
    ByteWriter w;
    w.u64(m.result.iterations);
    w.u64(m.result.final_value);
    w.u8(m.result.timed_out ? 1 : 0);
    w.u32(static_cast<uint32_t>(m.result.updated_vars.size()));
    for (const auto& [k, v] : m.result.updated_vars) {
        w.str(k);
        w.u64(v);
    }
    w.u64(m.first_log_index);
    return w.take();
}

LoopResult decode_loop_result(ByteSpan b) {
    ByteReader r(b);
    LoopResult m;
    m.result.iterations = r.u64();
    m.result.final_value = r.u64();
    m.result.timed_out = r.u8() != 0;
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
        std::string k = r.str();
        m.result.updated_vars[k] = r.u64();
    }
    m.first_log_index = r.u64();
    finish(r);
    return m;
}

Bytes encode(const MemPush& m) {
    ByteWriter w;
    write_header(w, m.hdr);
    w.u64(m.job_id);
    write_pagetable(w, m.pagetable);
    write_delta(w, m.delta);
    return w.take();
}

MemPush decode_mem_push(ByteSpan b) {
    ByteReader r(b);
    MemPush m;
    m.hdr = read_header(r);
    m.job_id = r.u64();
    m.pagetable = read_pagetable(r);
    m.delta = read_delta(r);
    finish(r);
    return m;
}

Bytes encode(const IrqWait& m) {
    ByteWriter w;
    write_header(w, m.hdr);
    w.u8(m.full_image ? 1 : 0);
    return w.take();
}

IrqWait decode_irq_wait(ByteSpan b) {
    ByteReader r(b);
    IrqWait m;
    m.hdr = read_header(r);
    m.full_image = r.u8() != 0;
    finish(r);
    return m;
}

Bytes encode(const IrqEvent& m) {
    ByteWriter w;
    w.u64(m.irq_status);
    write_delta(w, m.delta);
    return w.take();
}

IrqEvent decode_irq_event(ByteSpan b) {
    ByteReader r(b);
    IrqEvent m;
    m.irq_status = r.u64();
    m.delta = read_delta(r);
    finish(r);
    return m;
}

Bytes encode(const ReplayPrefix& m) { return encode_value(m.index); }
ReplayPrefix decode_replay_prefix(ByteSpan b) { return {decode_value(b)}; }

Bytes encode_value(uint64_t v) {
    ByteWriter w;
    w.u64(v);
    return w.take();
}

uint64_t decode_value(ByteSpan b) {
    ByteReader r(b);
    uint64_t v = r.u64();
    finish(r);
    return v;
}

}  // namespace dryrun::wire
