#include "dryrun/deferral.hpp"

#include <algorithm>

namespace dryrun {

Value Value::symbolic(SymExprPtr e, uint64_t taint) {
    if (e->kind() == SymExpr::Kind::Literal) return of(e->literal_value(), taint);
    return Value{std::nullopt, std::move(e), taint};
}

uint64_t Value::get() const {
    if (!concrete) throw Error(ErrorCode::ProtocolError, "symbolic value used where a concrete one is required");
    return *concrete;
}

Value combine(BinOp op, const Value& a, const Value& b) {
    uint64_t taint = std::max(a.taint, b.taint);
    if (a.concrete && b.concrete) return Value::of(apply(op, *a.concrete, *b.concrete), taint);
    return Value::symbolic(SymExpr::binary(op, a.as_expr(), b.as_expr()), taint);
}

SymbolId SymbolTable::fresh(uint32_t owner_thread) {
    SymbolId s = next_++;
    owner_[s] = owner_thread;
    return s;
}

const Binding* SymbolTable::find(SymbolId s) const {
    auto it = bound_.find(s);
    return it == bound_.end() ? nullptr : &it->second;
}

uint32_t SymbolTable::owner(SymbolId s) const {
    auto it = owner_.find(s);
    return it == owner_.end() ? UINT32_MAX : it->second;
}

Value SymbolTable::reduce(const Value& v) const {
    if (v.concrete) return v;
    uint64_t taint = v.taint;
    std::vector<SymbolId> syms;
    v.sym->collect_symbols(syms);
    bool any = false;
    for (SymbolId s : syms)
        if (const Binding* b = find(s)) {
            taint = std::max(taint, b->taint);
            any = true;
        }
    if (!any) return v;
    auto e = SymExpr::substitute(v.sym, [&](SymbolId s) -> std::optional<uint64_t> {
        const Binding* b = find(s);
        return b ? std::optional<uint64_t>(b->value) : std::nullopt;
    });
    return Value::symbolic(e, taint);
}

void SymbolTable::clear() {
    next_ = 1;
    bound_.clear();
    owner_.clear();
}

std::string_view to_string(CommitReason r) {
    switch (r) {
        case CommitReason::ControlDep: return "control-dep";
        case CommitReason::KernelLock: return "kernel-api-lock";
        case CommitReason::KernelUnlock: return "kernel-api-unlock";
        case CommitReason::ExplicitDelay: return "explicit-delay";
        case CommitReason::ScopeExit: return "scope-exit";
        case CommitReason::Extern: return "extern";
        case CommitReason::LoopOffload: return "loop-offload";
        case CommitReason::SyncAccess: return "sync-access";
        case CommitReason::ForcedFlush: return "forced-flush";
        case CommitReason::JobSync: return "job-sync";
    }
    return "?";
}

bool QueuedAccess::operator==(const QueuedAccess& o) const {
    if (op != o.op || addr != o.addr || sym != o.sym || taint != o.taint) return false;
    if (!value || !o.value) return !value && !o.value;
    return structurally_equal(*value, *o.value);
}

size_t Commit::read_count() const {
    return static_cast<size_t>(
        std::count_if(entries.begin(), entries.end(), [](const QueuedAccess& a) { return a.op == AccessOp::Read; }));
}

Signature Commit::signature() const {
    Signature s;
    s.reserve(entries.size());
    for (const auto& e : entries) s.push_back({e.op == AccessOp::Read ? 'R' : 'W', e.addr});
    return s;
}

uint64_t Commit::max_taint() const {
    uint64_t t = 0;
    for (const auto& e : entries) t = std::max(t, e.taint);
    return t;
}

uint64_t CommitResult::log_index_of_read(const Commit& c, size_t read_pos) const {
    size_t seen = 0;
    for (size_t i = 0; i < c.entries.size(); ++i)
        if (c.entries[i].op == AccessOp::Read && seen++ == read_pos) return first_log_index + i;
    throw Error(ErrorCode::ArityMismatch, "read position past commit");
}

void DeferralQueue::check_room() const {
    if (entries_.size() >= cap_)
        throw Error(ErrorCode::QueueOverflow, "deferral queue exceeded " + std::to_string(cap_) + " entries");
}

Value DeferralQueue::enqueue_read(uint32_t addr, SymbolTable& syms, uint32_t thread, uint64_t control_taint) {
    check_room();
    SymbolId s = syms.fresh(thread);
    entries_.push_back({AccessOp::Read, addr, s, nullptr, control_taint});
    return Value::symbolic(SymExpr::symbol(s), 0);
}

void DeferralQueue::enqueue_write(uint32_t addr, const Value& v, uint64_t control_taint) {
    check_room();
    entries_.push_back({AccessOp::Write, addr, 0, v.as_expr(), std::max(v.taint, control_taint)});
}

std::optional<Commit> DeferralQueue::flush(CommitReason reason, SiteId site, Category cat, uint64_t& next_commit_id) {
    if (entries_.empty()) return std::nullopt;
    Commit c;
    c.id = next_commit_id++;
    c.site = site;
    c.reason = reason;
    c.category = cat;
    c.entries = std::move(entries_);
    entries_.clear();
    return c;
}

void resolve(const Commit& c, const CommitResult& r, SymbolTable& syms, uint64_t taint) {
    if (r.commit_id != c.id) throw Error(ErrorCode::ArityMismatch, "result for a different commit");
    if (r.reads.size() != c.read_count())
        throw Error(ErrorCode::ArityMismatch, "commit has " + std::to_string(c.read_count()) + " reads, result has " +
                                                  std::to_string(r.reads.size()));
    size_t k = 0;
    for (const auto& e : c.entries)
        if (e.op == AccessOp::Read) syms.bind(e.sym, r.reads[k++], taint);
}

}  // namespace dryrun
