#pragma once

// Register-access deferral: per-thread queues of reads (yielding symbols) and
// writes (keeping symbolic expressions), flushed into commits.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dryrun/device.hpp"
#include "dryrun/symexpr.hpp"
#include "dryrun/workload.hpp"

namespace dryrun {

/// Concrete or symbolic 64-bit value. `taint` is the ordinal of the newest
/// predicted commit the value depends on (0 = none); it is clean once that
/// prediction has been validated.
struct Value {
    std::optional<uint64_t> concrete;
    SymExprPtr sym;
    uint64_t taint = 0;

    static Value of(uint64_t v, uint64_t taint = 0) { return Value{v, nullptr, taint}; }
    static Value symbolic(SymExprPtr e, uint64_t taint = 0);
    [[nodiscard]] bool is_concrete() const { return concrete.has_value(); }
    [[nodiscard]] uint64_t get() const;
    [[nodiscard]] SymExprPtr as_expr() const { return concrete ? SymExpr::literal(*concrete) : sym; }
    [[nodiscard]] uint32_t depth() const { return concrete ? 1 : sym->depth(); }
};

Value combine(BinOp op, const Value& a, const Value& b);

struct Binding {
    uint64_t value = 0;
    uint64_t taint = 0;
};

/// Symbol allocation and the symbol -> value bindings learned from commits.
class SymbolTable {
public:
    SymbolId fresh(uint32_t owner_thread);
    void bind(SymbolId s, uint64_t v, uint64_t taint) { bound_[s] = {v, taint}; }
    [[nodiscard]] const Binding* find(SymbolId s) const;
    [[nodiscard]] uint32_t owner(SymbolId s) const;
    /// Replaces bound symbols; the result is concrete once nothing free remains.
    [[nodiscard]] Value reduce(const Value& v) const;
    void clear();

private:
    SymbolId next_ = 1;
    std::unordered_map<SymbolId, Binding> bound_;
    std::unordered_map<SymbolId, uint32_t> owner_;
};

enum class CommitReason : uint8_t {
    ControlDep, KernelLock, KernelUnlock, ExplicitDelay, ScopeExit, Extern, LoopOffload,
    SyncAccess, ForcedFlush, JobSync,
};
inline constexpr size_t kReasonCount = 10;
std::string_view to_string(CommitReason r);

struct QueuedAccess {
    AccessOp op = AccessOp::Read;
    uint32_t addr = 0;
    SymbolId sym = 0;     // reads
    SymExprPtr value;     // writes
    uint64_t taint = 0;   // data and control taint at enqueue time

    bool operator==(const QueuedAccess& o) const;
};

struct SiteId {
    uint32_t thread = 0;
    uint32_t pc = 0;
    auto operator<=>(const SiteId&) const = default;
};

struct AccessSig {
    char op = 'R';  // R read, W write, P offloaded poll
    uint32_t addr = 0;
    bool operator==(const AccessSig&) const = default;
};
using Signature = std::vector<AccessSig>;

struct Commit {
    uint64_t id = 0;
    SiteId site;
    CommitReason reason = CommitReason::SyncAccess;
    Category category = Category::Other;
    std::vector<QueuedAccess> entries;

    [[nodiscard]] size_t read_count() const;
    [[nodiscard]] Signature signature() const;
    [[nodiscard]] uint64_t max_taint() const;
};

struct CommitResult {
    uint64_t commit_id = 0;
    std::vector<uint64_t> reads;
    /// Recording index of the commit's first access.
    uint64_t first_log_index = 0;
    /// Recording index of each read entry.
    [[nodiscard]] uint64_t log_index_of_read(const Commit& c, size_t read_pos) const;
};

class DeferralQueue {
public:
    explicit DeferralQueue(size_t cap = 4096) : cap_(cap) {}

    Value enqueue_read(uint32_t addr, SymbolTable& syms, uint32_t thread, uint64_t control_taint);
    void enqueue_write(uint32_t addr, const Value& v, uint64_t control_taint);
    /// Drains the queue; empty queue -> no commit.
    std::optional<Commit> flush(CommitReason reason, SiteId site, Category cat, uint64_t& next_commit_id);

    [[nodiscard]] size_t size() const { return entries_.size(); }
    [[nodiscard]] bool empty() const { return entries_.empty(); }
    [[nodiscard]] size_t cap() const { return cap_; }
    void clear() { entries_.clear(); }

private:
    void check_room() const;
    size_t cap_;
    std::vector<QueuedAccess> entries_;
};

/// Binds every read symbol of `c` to its returned value.
void resolve(const Commit& c, const CommitResult& r, SymbolTable& syms, uint64_t taint = 0);

}  // namespace dryrun
