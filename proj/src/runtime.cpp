#include "dryrun/runtime.hpp"

#include <algorithm>
#include <deque>
#include <random>

#include "dryrun/gpu_shim.hpp"
#include "dryrun/protocol.hpp"
#include "dryrun/text.hpp"

namespace dryrun {

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::Naive: return "naive";
        case Mode::M: return "m";
        case Mode::MD: return "md";
        case Mode::MDS: return "mds";
    }
    return "?";
}

std::optional<Mode> parse_mode(std::string_view s) {
    if (s == "naive") return Mode::Naive;
    if (s == "m") return Mode::M;
    if (s == "md") return Mode::MD;
    if (s == "mds") return Mode::MDS;
    return std::nullopt;
}

namespace {

struct MispredictSignal {
    Mispredict m;
};

/// Code whose execution depends on a predicted branch outcome. A region
/// covers [begin, end) of a forward branch's fall-through path; leaving it
/// any other way than through `end`, or a backward branch, makes it global.
struct Region {
    size_t begin = 0;
    size_t end = 0;
    uint64_t ordinal = 0;
    bool global = false;
};

struct Thread {
    uint32_t id = 0;
    const ThreadProgram* prog = nullptr;
    size_t pc = 0;
    std::map<std::string, Value> vars;
    DeferralQueue queue;
    std::vector<Region> regions;
    bool finished = false;
    bool in_poll = false;
    uint64_t poll_iter = 0;
    std::deque<uint64_t> cursor;
    uint64_t externs_to_skip = 0;
};

enum class Step { Continue, Yield, Blocked, Finished };

struct Outstanding {
    Channel::Ticket ticket = 0;
    bool is_poll = false;
    Commit commit;
    std::vector<uint64_t> predicted;
    bool predicted_timeout = false;
    uint32_t poll_reg = 0;
    uint64_t ordinal = 0;
    SiteId site;
    bool injected = false;
};

struct EmittedExtern {
    ExternOutput out;
    uint64_t log_pos = 0;
};

class Runtime {
public:
    Runtime(const Program& p, const RunOptions& o)
        : prog_(p),
          opt_(o),
          layout_(plan_layout(p)),
          inputs_(o.inputs ? *o.inputs : generate_inputs(p)),
          image_(initial_image(p, layout_, inputs_)),
          device_(p.device, o.device),
          shim_(device_, layout_, image_, header()),
          channel_(o.net, shim_),
          local_history_(o.spec.history_capacity),
          hist_(o.history ? o.history : &local_history_) {
        opt_.spec.validate();
        if (const RegisterSpec* r = p.device.find(regs::kJobStart)) job_start_ = r->addr;
        for (size_t i = 0; i < p.threads.size(); ++i) thread_index_[p.threads[i].id] = i;
    }

    RunReport execute() {
        reset_driver();
        for (;;) {
            try {
                schedule();
                finish();
                break;
            } catch (const MispredictSignal& s) {
                recover(s.m);
            }
        }
        return report();
    }

private:
    // ---- setup ---------------------------------------------------------

    RecordingHeader header() const {
        RecordingHeader h;
        h.device_map_hash = prog_.device.hash();
        h.workload_hash = workload_hash(prog_);
        h.mode = std::string(to_string(opt_.mode));
        h.net = opt_.net;
        h.device = opt_.device;
        h.device_map_text = prog_.device.to_text();
        for (PageIndex pg : prog_.pages()) h.pages.push_back(pg);
        for (PageIndex pg : layout_.inputs) h.inputs.push_back(pg);
        return h;
    }

    void reset_driver() {
        dmem_ = image_;
        dsync_.reset(image_);
        guard_.unlock_all();
        page_taint_.clear();
        threads_.clear();
        for (const auto& tp : prog_.threads) {
            Thread t;
            t.id = tp.id;
            t.prog = &tp;
            t.queue = DeferralQueue(opt_.queue_cap);
            threads_.push_back(std::move(t));
        }
        shared_.clear();
        lock_owner_.clear();
        running_job_.reset();
        pending_advance_ = 0;
        syms_.clear();
        outstanding_.clear();
    }

    [[nodiscard]] bool deferring() const { return opt_.mode == Mode::MD || opt_.mode == Mode::MDS; }
    [[nodiscard]] bool speculating() const { return opt_.mode == Mode::MDS && opt_.spec.enabled; }
    [[nodiscard]] bool naive() const { return opt_.mode == Mode::Naive; }
    [[nodiscard]] static bool replaying(const Thread& t) { return !t.cursor.empty(); }

    // ---- scheduling ----------------------------------------------------

    [[nodiscard]] bool blocked(const Thread& t) const {
        if (t.finished || t.pc >= t.prog->code.size()) return false;
        const Instr& in = t.prog->code[t.pc];
        if (in.op != Op::Lock) return false;
        auto it = lock_owner_.find(in.lock);
        return it != lock_owner_.end() && it->second != t.id;
    }

    void count_step() {
        if (++steps_ > opt_.max_steps) throw Error(ErrorCode::ProtocolError, "step limit exceeded (livelock?)");
    }

    void schedule() {
        std::mt19937_64 rng(opt_.schedule_seed);
        size_t cur = 0, n = threads_.size();
        for (;;) {
            std::vector<size_t> runnable;
            bool unfinished = false;
            for (size_t k = 0; k < n; ++k) {
                size_t i = (cur + k) % n;
                if (threads_[i].finished) continue;
                unfinished = true;
                if (!blocked(threads_[i])) runnable.push_back(i);
            }
            if (!unfinished) return;
            if (runnable.empty()) throw Error(ErrorCode::ProtocolError, "deadlock: every live thread waits for a lock");
            if (opt_.schedule == Schedule::Random) {
                size_t i = runnable[rng() % runnable.size()];
                count_step();
                step(threads_[i]);
                continue;
            }
            size_t i = runnable.front();
            Step s;
            do {
                count_step();
                s = step(threads_[i]);
            } while (s == Step::Continue);
            cur = (i + 1) % n;
        }
    }

    // ---- values --------------------------------------------------------

    Value* slot(Thread& t, const std::string& name) {
        auto& m = prog_.is_shared(name) ? shared_ : t.vars;
        auto it = m.find(name);
        return it == m.end() ? nullptr : &it->second;
    }

    Value lookup(Thread& t, const std::string& name) {
        Value* s = slot(t, name);
        if (!s) return Value::of(0);
        *s = syms_.reduce(*s);
        if (!s->is_concrete()) {
            std::vector<SymbolId> free;
            s->sym->collect_symbols(free);
            for (SymbolId id : free)
                if (!syms_.find(id) && syms_.owner(id) != t.id)
                    throw Error(ErrorCode::ReleaseConsistency, "thread " + std::to_string(t.id) + " read `" + name +
                                                                   "` holding an unresolved symbol of thread " +
                                                                   std::to_string(syms_.owner(id)));
        }
        return *s;
    }

    uint64_t control_taint(Thread& t) {
        uint64_t c = 0;
        std::erase_if(t.regions, [&](const Region& r) { return taint_.clean(r.ordinal); });
        for (const auto& r : t.regions) c = std::max(c, r.ordinal);
        return c;
    }

    void store(Thread& t, const std::string& name, Value v) {
        v.taint = std::max(v.taint, control_taint(t));
        auto& m = prog_.is_shared(name) ? shared_ : t.vars;
        m.insert_or_assign(name, std::move(v));
    }

    Value eval(Thread& t, const ExprPtr& e) {
        switch (e->kind) {
            case Expr::Kind::Literal: return Value::of(e->value);
            case Expr::Kind::Var: return lookup(t, e->var);
            case Expr::Kind::Binary: return combine(e->op, eval(t, e->lhs), eval(t, e->rhs));
        }
        return Value::of(0);
    }

    Value concrete(Thread& t, Value v, CommitReason why, size_t pc) {
        if (v.is_concrete()) return v;
        flush(t, why, pc);
        v = syms_.reduce(v);
        if (!v.is_concrete()) throw Error(ErrorCode::ProtocolError, "value still symbolic after commit: " + v.sym->to_string());
        return v;
    }

    Value bounded(Thread& t, Value v, size_t pc) {
        if (!v.is_concrete() && v.depth() > opt_.max_expr_depth) {
            flush(t, CommitReason::ForcedFlush, pc);
            v = syms_.reduce(v);
        }
        return v;
    }

    [[nodiscard]] Category category_at(const Thread& t, size_t pc) const {
        if (pc < t.prog->scope_of.size() && t.prog->scope_of[pc] >= 0) return t.prog->scopes[t.prog->scope_of[pc]].category;
        return Category::Other;
    }

    [[nodiscard]] bool in_scope(const Thread& t, size_t pc) const {
        return pc < t.prog->scope_of.size() && t.prog->scope_of[pc] >= 0;
    }

    // ---- channel -------------------------------------------------------

    wire::RequestHeader hdr(const Thread& t) {
        wire::RequestHeader h{t.id, pending_advance_};
        pending_advance_ = 0;
        return h;
    }

    Channel::Ticket send(MsgKind k, Bytes payload) {
        ++exchanges_;
        if (replay_phase_) ++metrics_.replay_messages;
        return channel_.send_async(k, std::move(payload));
    }

    Bytes wait_for(Channel::Ticket ticket) {
        channel_.block_until(channel_.arrival(ticket));
        drain_push();
        while (!outstanding_.empty()) validate_front();
        return channel_.await(ticket);
    }

    void stall_all() {
        if (outstanding_.empty()) return;
        ++metrics_.stalls;
        channel_.block_until(channel_.arrival(outstanding_.back().ticket));
        drain_push();
        while (!outstanding_.empty()) validate_front();
    }

    // The push Ack carries nothing; collect it once the link has delivered it.
    void drain_push() {
        if (push_ticket_ && channel_.ready(*push_ticket_)) {
            channel_.await(*push_ticket_);
            push_ticket_.reset();
        }
    }

    void validate_front() {
        Outstanding o = std::move(outstanding_.front());
        outstanding_.pop_front();
        Bytes b = channel_.await(o.ticket);
        std::optional<Mispredict> mis;
        if (!o.is_poll) {
            CommitResult r = wire::decode_commit_result(b);
            mis = validate(*hist_, o.commit, o.predicted, r);
        } else {
            wire::LoopResult lr = wire::decode_loop_result(b);
            hist_->append(o.site, {poll_signature(o.poll_reg), {lr.result.timed_out ? 1u : 0u}});
            metrics_.deferred_accesses += lr.result.iterations;
            if (lr.result.timed_out != o.predicted_timeout) mis = Mispredict{lr.first_log_index, o.site, false};
        }
        if (mis) {
            mis->injected = o.injected;
            ++metrics_.mispredictions;
            mispredicts_.push_back(*mis);
            throw MispredictSignal{*mis};
        }
        taint_.validated(o.ordinal);
    }

    // ---- commits -------------------------------------------------------

    void count_commit(Category cat, CommitReason why, size_t accesses) {
        ++metrics_.commits;
        ++metrics_.commits_by_category[static_cast<size_t>(cat)];
        ++metrics_.commits_by_reason[static_cast<size_t>(why)];
        metrics_.deferred_accesses += accesses;
    }

    void flush(Thread& t, CommitReason why, size_t pc) {
        auto c = t.queue.flush(why, SiteId{t.id, static_cast<uint32_t>(pc)}, category_at(t, pc), next_commit_id_);
        if (c) issue(t, std::move(*c));
    }

    void issue(Thread& t, Commit c) {
        bool tainted = false;
        for (auto& e : c.entries) {
            if (e.op == AccessOp::Write) {
                Value v = syms_.reduce(Value::symbolic(e.value, e.taint));
                e.value = v.as_expr();
                e.taint = std::max(e.taint, v.taint);
            }
            if (!taint_.clean(e.taint)) tainted = true;
        }
        count_commit(c.category, c.reason, c.entries.size());
        if (may_issue(tainted, false, outstanding_.size()) == IssueDecision::Stall) stall_all();
        for (const auto& e : c.entries)
            if (!taint_.clean(e.taint)) ++metrics_.safety_violations;

        std::optional<std::vector<uint64_t>> pred;
        if (speculating() && !disabled_.count(c.site)) pred = predict(*hist_, c.site, c.signature(), opt_.spec);

        wire::CommitRequest req{hdr(t), c.id, c.entries};
        Channel::Ticket ticket = send(MsgKind::CommitRequest, wire::encode(req));
        if (pred) {
            bool injected = false;
            if (opt_.inject_at && *opt_.inject_at == c.id && !injected_ && !pred->empty()) {
                (*pred)[0] ^= 1;
                injected = injected_ = true;
                ++metrics_.injections;
            }
            uint64_t ord = taint_.next();
            size_t k = 0;
            for (const auto& e : c.entries)
                if (e.op == AccessOp::Read) syms_.bind(e.sym, (*pred)[k++], ord);
            ++metrics_.speculated_commits;
            Outstanding o;
            o.ticket = ticket;
            o.site = c.site;
            o.predicted = std::move(*pred);
            o.ordinal = ord;
            o.injected = injected;
            o.commit = std::move(c);
            outstanding_.push_back(std::move(o));
            return;
        }
        CommitResult r = wire::decode_commit_result(wait_for(ticket));
        resolve(c, r, syms_, 0);
        hist_->append(c.site, {c.signature(), r.reads});
    }

    // ---- register accesses --------------------------------------------

    const LogEntry& consume(Thread& t, EntryKind kind, std::optional<uint32_t> addr = std::nullopt) {
        const LogEntry& e = replay_log_[t.cursor.front()];
        t.cursor.pop_front();
        if (e.kind != kind || (addr && e.addr != *addr))
            throw Error(ErrorCode::Divergence, "thread " + std::to_string(t.id) + " replay expected " +
                                                   std::string(to_string(kind)) + ", log has " +
                                                   std::string(to_string(e.kind)));
        pending_advance_ = 0;
        return e;
    }

    void go_live() { replay_phase_ = false; }

    uint64_t sync_access(Thread& t, AccessOp op, uint32_t reg, uint64_t value) {
        go_live();
        wire::SyncAccess m{hdr(t), op, reg, value};
        Bytes b = wait_for(send(MsgKind::SyncAccess, wire::encode(m)));
        ++metrics_.sync_accesses;
        return wire::decode_value(b);
    }

    Value do_read(Thread& t, uint32_t reg, size_t pc, bool queued, CommitReason why) {
        if (replaying(t)) return Value::of(consume(t, EntryKind::RegRead, reg).value);
        go_live();
        if (!deferring()) return Value::of(sync_access(t, AccessOp::Read, reg, 0));
        if (t.queue.size() >= t.queue.cap()) flush(t, CommitReason::ForcedFlush, pc);
        Value v = t.queue.enqueue_read(reg, syms_, t.id, control_taint(t));
        if (queued) return v;
        flush(t, why, pc);
        return syms_.reduce(v);
    }

    void do_write(Thread& t, uint32_t reg, Value v, size_t pc, bool queued, CommitReason why) {
        if (replaying(t)) {
            v = syms_.reduce(v);
            const LogEntry& e = consume(t, EntryKind::RegWrite, reg);
            if (!v.is_concrete() || e.value != *v.concrete)
                throw Error(ErrorCode::Divergence, "replayed write to " + prog_.device.at(reg).name + " differs from the log");
            return;
        }
        go_live();
        if (!deferring()) {
            sync_access(t, AccessOp::Write, reg, v.get());
            return;
        }
        if (t.queue.size() >= t.queue.cap()) {
            flush(t, CommitReason::ForcedFlush, pc);
            v = syms_.reduce(v);
        }
        t.queue.enqueue_write(reg, v, control_taint(t));
        if (!queued) flush(t, why, pc);
    }

    // ---- driver memory ---------------------------------------------------

    void check_page(PageIndex p) {
        guard_.check(p);
        if (device_.mapped(p)) throw Error(ErrorCode::ProtocolError, "page " + std::to_string(p) + " owned by both sides");
    }

    // ---- jobs ----------------------------------------------------------

    void submit(Thread& t, const Instr& in) {
        flush(t, CommitReason::JobSync, t.pc);
        stall_all();
        if (running_job_) wait_irq(t);
        if (!job_start_) throw Error(ErrorCode::ProtocolError, "device map has no JOB_START register");
        const JobSpec& job = prog_.job(in.job);
        auto meta = expand(job.meta);
        if (meta.empty()) throw Error(ErrorCode::ProtocolError, "job " + std::to_string(job.id) + " has no metastate page");
        PageIndex desc = meta.front();
        check_page(desc);
        write_descriptor(dmem_, desc, {job.id, job.transform, job.constant, job.meta, job.inputs, job.outputs});

        if (replaying(t)) {
            consume(t, EntryKind::JobBoundary);
            consume(t, EntryKind::MemPush);
            if (!naive()) dsync_.outgoing(dmem_, layout_.selector(), false);
        } else {
            go_live();
            wire::MemPush m;
            m.hdr = hdr(t);
            m.job_id = job.id;
            m.pagetable = job_pagetable(job, layout_);
            m.delta = naive() ? full_dump(dmem_, [](PageIndex) { return true; })
                              : dsync_.outgoing(dmem_, layout_.selector(), false);
            Bytes payload = wire::encode(m);
            metrics_.memory_bytes_to_device += payload.size();
            // deferring modes send the dump ahead of the job-start write without waiting
            if (deferring())
                push_ticket_ = send(MsgKind::MemPush, std::move(payload));
            else
                wait_for(send(MsgKind::MemPush, std::move(payload)));
        }
        guard_.lock(job_pages(job));
        running_job_ = job.id;
        ++metrics_.jobs;
        do_write(t, *job_start_, Value::of(desc), t.pc, false, CommitReason::JobSync);
    }

    void wait_irq(Thread& t) {
        flush(t, CommitReason::JobSync, t.pc);
        stall_all();
        if (!running_job_) throw Error(ErrorCode::ProtocolError, "wait_irq with no job outstanding");
        if (replaying(t)) {
            consume(t, EntryKind::Irq);
            const LogEntry& e = consume(t, EntryKind::MemPull);
            MemoryDelta d;
            d.compressed = e.delta.compressed;
            for (const auto& r : e.delta.records)
                if (naive() || layout_.synced(r.page)) d.records.push_back(r);
            if (naive())
                apply_delta(dmem_, d);
            else
                dsync_.incoming(dmem_, d);
        } else {
            go_live();
            wire::IrqWait m{hdr(t), naive()};
            Bytes b = wait_for(send(MsgKind::IrqWait, wire::encode(m)));
            metrics_.memory_bytes_from_device += b.size();
            wire::IrqEvent ev = wire::decode_irq_event(b);
            if (naive())
                apply_delta(dmem_, ev.delta);
            else
                dsync_.incoming(dmem_, ev.delta);
        }
        guard_.unlock_all();
        running_job_.reset();
    }

    // ---- polls ---------------------------------------------------------

    void finish_poll(Thread& t, const PollLoopSpec& l, uint64_t final_value, uint64_t iterations, bool timed_out) {
        if (!l.into.empty()) store(t, l.into, Value::of(final_value));
        if (!l.count_var.empty()) store(t, l.count_var, Value::of(iterations));
        t.in_poll = false;
        t.poll_iter = 0;
        t.pc = timed_out && !l.on_timeout.empty() ? l.on_timeout_pc : t.pc + 1;
    }

    void poll(Thread& t, const Instr& in) {
        const PollLoopSpec& l = in.poll;
        size_t pc = t.pc;
        if (!t.in_poll) {
            t.in_poll = true;
            t.poll_iter = 0;
            ++metrics_.polls;
        }
        Value rhs = l.rhs ? concrete(t, eval(t, l.rhs), CommitReason::ControlDep, pc) : Value::of(0);

        if (replaying(t) || !deferring() || !l.simple) {
            bool live = !replaying(t);
            Value v = do_read(t, l.reg, pc, false, CommitReason::ControlDep);
            v = concrete(t, v, CommitReason::ControlDep, pc);
            if (live) ++metrics_.local_poll_iterations;
            ++t.poll_iter;
            if (!taint_.clean(v.taint)) t.regions.push_back({0, 0, v.taint, true});
            bool ok = l.test(*v.concrete, *rhs.concrete);
            if (ok || t.poll_iter >= l.max_iters) {
                finish_poll(t, l, *v.concrete, t.poll_iter, !ok);
                return;
            }
            pending_advance_ += l.backoff;
            channel_.advance(ticks_to_time(l.backoff));
            return;
        }

        go_live();
        flush(t, CommitReason::LoopOffload, pc);
        std::map<std::string, uint64_t> captured;
        bool tainted = !taint_.clean(rhs.taint);
        if (l.rhs) {
            std::set<std::string> used;
            l.rhs->collect_vars(used);
            for (const auto& name : used) {
                Value v = concrete(t, lookup(t, name), CommitReason::LoopOffload, pc);
                tainted = tainted || !taint_.clean(v.taint);
                captured[name] = *v.concrete;
            }
        }
        if (tainted) stall_all();
        OffloadRequest req = make_offload_request(l, captured);
        req.loop.max_iters = l.max_iters - t.poll_iter;
        uint64_t id = next_commit_id_++;
        count_commit(Category::Polling, CommitReason::LoopOffload, 0);
        ++metrics_.polls_offloaded;
        SiteId site{t.id, static_cast<uint32_t>(pc)};
        std::optional<bool> pb;
        if (speculating() && l.into.empty() && l.count_var.empty() && !disabled_.count(site))
            pb = speculate_predicate(*hist_, site, l.reg, opt_.spec);

        Channel::Ticket ticket = send(MsgKind::LoopOffload, wire::encode(wire::LoopOffload{hdr(t), req}));
        if (pb) {
            bool predicted = *pb, injected = false;
            if (opt_.inject_at && *opt_.inject_at == id && !injected_) {
                predicted = !predicted;
                injected = injected_ = true;
                ++metrics_.injections;
            }
            uint64_t ord = taint_.next();
            Outstanding o;
            o.ticket = ticket;
            o.is_poll = true;
            o.predicted_timeout = predicted;
            o.poll_reg = l.reg;
            o.ordinal = ord;
            o.site = site;
            o.injected = injected;
            outstanding_.push_back(std::move(o));
            ++metrics_.speculated_commits;
            ++metrics_.polls_predicted;
            if (!l.on_timeout.empty()) t.regions.push_back({0, 0, ord, true});
            t.in_poll = false;
            t.poll_iter = 0;
            t.pc = predicted && !l.on_timeout.empty() ? l.on_timeout_pc : pc + 1;
            return;
        }
        wire::LoopResult lr = wire::decode_loop_result(wait_for(ticket));
        hist_->append(site, {poll_signature(l.reg), {lr.result.timed_out ? 1u : 0u}});
        metrics_.deferred_accesses += lr.result.iterations;
        finish_poll(t, l, lr.result.final_value, t.poll_iter + lr.result.iterations, lr.result.timed_out);
    }

    // ---- interpreter ---------------------------------------------------

    void branch_taint(Thread& t, size_t pc, size_t target, uint64_t ord) {
        if (target > pc) {
            for (const auto& name : t.prog->writes_in(pc + 1, target))
                if (Value* s = slot(t, name)) s->taint = std::max(s->taint, ord);
            t.regions.push_back({pc + 1, target, ord, false});
        } else {
            t.regions.push_back({0, 0, ord, true});
        }
    }

    void moved(Thread& t, size_t old_pc) {
        if (t.pc == old_pc) return;
        const auto& code = t.prog->code;
        for (auto& r : t.regions) {
            if (r.global) continue;
            if (t.pc == r.end) r.ordinal = 0;
            else if (t.pc < r.begin || t.pc > r.end) r.global = true;
        }
        std::erase_if(t.regions, [](const Region& r) { return r.ordinal == 0; });
        int s = t.prog->scope_of[old_pc];
        if (deferring() && s >= 0 && (t.pc >= code.size() || t.prog->scope_of[t.pc] != s))
            flush(t, CommitReason::ScopeExit, old_pc);
    }

    Step step(Thread& t) {
        const auto& code = t.prog->code;
        if (t.pc >= code.size()) {
            if (deferring()) flush(t, CommitReason::ScopeExit, code.size());
            t.finished = true;
            return Step::Finished;
        }
        const Instr& in = code[t.pc];
        size_t pc = t.pc;
        uint64_t ex = exchanges_;
        bool yield = false;
        switch (in.op) {
            case Op::Label:
            case Op::Note:
            case Op::HotBegin:
            case Op::HotEnd: t.pc = pc + 1; break;
            case Op::Assign: {
                Value v = bounded(t, eval(t, in.expr), pc);
                store(t, in.dst, std::move(v));
                t.pc = pc + 1;
                break;
            }
            case Op::Read: {
                Value v = do_read(t, in.reg, pc, deferring() && in_scope(t, pc), CommitReason::SyncAccess);
                store(t, in.dst, std::move(v));
                t.pc = pc + 1;
                break;
            }
            case Op::Write: {
                Value v = bounded(t, eval(t, in.expr), pc);
                do_write(t, in.reg, std::move(v), pc, deferring() && in_scope(t, pc), CommitReason::SyncAccess);
                t.pc = pc + 1;
                break;
            }
            case Op::Branch: {
                Value v = concrete(t, eval(t, in.expr), CommitReason::ControlDep, pc);
                if (!taint_.clean(v.taint)) branch_taint(t, pc, in.target, v.taint);
                t.pc = *v.concrete != 0 ? in.target : pc + 1;
                break;
            }
            case Op::Lock: {
                if (deferring()) flush(t, CommitReason::KernelLock, pc);
                auto it = lock_owner_.find(in.lock);
                if (it != lock_owner_.end() && it->second != t.id) return Step::Blocked;
                lock_owner_[in.lock] = t.id;
                t.pc = pc + 1;
                yield = true;
                break;
            }
            case Op::Unlock: {
                if (deferring()) flush(t, CommitReason::KernelUnlock, pc);
                lock_owner_.erase(in.lock);
                for (auto& [name, v] : shared_) v = syms_.reduce(v);
                t.pc = pc + 1;
                yield = true;
                break;
            }
            case Op::Delay: {
                if (deferring()) flush(t, CommitReason::ExplicitDelay, pc);
                pending_advance_ += in.ticks;
                channel_.advance(ticks_to_time(in.ticks));
                t.pc = pc + 1;
                yield = true;
                break;
            }
            case Op::Extern: {
                if (deferring()) flush(t, CommitReason::Extern, pc);
                stall_all();
                Value v = concrete(t, eval(t, in.expr), CommitReason::Extern, pc);
                if (!taint_.clean(v.taint)) ++metrics_.safety_violations;
                ++metrics_.externs;
                if (t.externs_to_skip)
                    --t.externs_to_skip;
                else
                    externs_.push_back({{t.id, *v.concrete}, shim_.recorder().size()});
                t.pc = pc + 1;
                break;
            }
            case Op::Poll: poll(t, in); break;
            case Op::Submit:
                submit(t, in);
                t.pc = pc + 1;
                break;
            case Op::WaitIrq:
                wait_irq(t);
                t.pc = pc + 1;
                break;
            case Op::MemWrite: {
                Value v = concrete(t, eval(t, in.expr), CommitReason::ForcedFlush, pc);
                check_page(in.page);
                dmem_.write_u64(in.page, in.offset, *v.concrete);
                page_taint_[in.page] = std::max(page_taint_[in.page], std::max(v.taint, control_taint(t)));
                t.pc = pc + 1;
                break;
            }
            case Op::MemRead: {
                check_page(in.page);
                uint64_t taint = page_taint_.count(in.page) ? page_taint_[in.page] : 0;
                store(t, in.dst, Value::of(dmem_.read_u64(in.page, in.offset), taint));
                t.pc = pc + 1;
                break;
            }
        }
        moved(t, pc);
        return yield || exchanges_ != ex ? Step::Yield : Step::Continue;
    }

    void finish() {
        if (deferring())
            for (auto& t : threads_) flush(t, CommitReason::ScopeExit, t.prog->code.size());
        stall_all();
        if (running_job_ && !threads_.empty()) wait_irq(threads_.front());
        stall_all();
        if (push_ticket_) {
            channel_.block_until(channel_.arrival(*push_ticket_));
            drain_push();
        }
    }

    // ---- recovery ------------------------------------------------------

    void recover(const Mispredict& m) {
        ++metrics_.recoveries;
        disabled_.insert(m.site);
        channel_.discard_pending();
        outstanding_.clear();
        push_ticket_.reset();
        pending_advance_ = 0;
        ++exchanges_;
        Bytes ack = channel_.send_request(MsgKind::ReplayPrefix, wire::encode(wire::ReplayPrefix{m.log_index}));
        uint64_t upto = wire::decode_value(ack);
        metrics_.replayed_entries += upto;
        taint_.retire_all();
        const auto& log = shim_.recorder().entries();
        replay_log_.assign(log.begin(), log.begin() + static_cast<std::ptrdiff_t>(upto));

        std::erase_if(externs_, [&](const EmittedExtern& e) { return e.log_pos > upto; });
        reset_driver();
        for (const auto& e : externs_) ++threads_[thread_index_.at(e.out.thread)].externs_to_skip;
        for (uint64_t i = 0; i < upto; ++i) {
            auto it = thread_index_.find(replay_log_[i].thread);
            if (it == thread_index_.end()) throw Error(ErrorCode::Divergence, "log entry from an unknown thread");
            threads_[it->second].cursor.push_back(i);
        }
        replay_phase_ = upto > 0;
    }

    // ---- report --------------------------------------------------------

    uint64_t final_value(Thread& t, const std::string& name, Value& v) {
        v = syms_.reduce(v);
        if (!v.is_concrete())
            throw Error(ErrorCode::ProtocolError, "thread " + std::to_string(t.id) + " ends with `" + name + "` unresolved");
        return *v.concrete;
    }

    RunReport report() {
        RunReport r;
        for (auto& t : threads_) {
            std::map<std::string, uint64_t> vars;
            for (auto& [name, v] : t.vars) vars[name] = final_value(t, name, v);
            r.vars.push_back(std::move(vars));
        }
        for (auto& [name, v] : shared_) {
            v = syms_.reduce(v);
            if (!v.is_concrete()) throw Error(ErrorCode::ProtocolError, "shared `" + name + "` ends unresolved");
            r.shared[name] = *v.concrete;
        }
        for (const auto& e : externs_) r.externs.push_back(e.out);
        r.mispredicts = mispredicts_;
        r.recording = shim_.recorder().finalize();
        r.device_state = device_.state_hash();
        for (PageIndex p : device_.written_outputs()) r.outputs[p] = device_.memory().page_or_zero(p);

        RunMetrics m = metrics_;
        const ChannelCounters& c = channel_.counters();
        m.round_trips = c.blocking_waits;
        m.sim_time = channel_.now();
        m.bytes_to_device = c.bytes_to_device;
        m.bytes_from_device = c.bytes_from_device;
        m.messages_to_device = c.messages_to_device;
        m.register_accesses = 0;
        for (const auto& e : r.recording.entries)
            if (e.kind == EntryKind::RegRead || e.kind == EntryKind::RegWrite) ++m.register_accesses;
        r.metrics = m;
        return r;
    }

    // ---- state ---------------------------------------------------------

    const Program& prog_;
    RunOptions opt_;
    MemoryLayout layout_;
    PageSet inputs_;
    MemoryImage image_;
    Device device_;
    GpuShim shim_;
    Channel channel_;
    CommitHistory local_history_;
    CommitHistory* hist_;

    std::optional<uint32_t> job_start_;
    std::map<uint32_t, size_t> thread_index_;

    MemoryImage dmem_;
    SyncPoint dsync_;
    AccessGuard guard_;
    std::map<PageIndex, uint64_t> page_taint_;
    std::vector<Thread> threads_;
    std::map<std::string, Value> shared_;
    std::map<std::string, uint32_t> lock_owner_;
    std::optional<uint64_t> running_job_;
    Ticks pending_advance_ = 0;

    SymbolTable syms_;
    TaintState taint_;
    std::deque<Outstanding> outstanding_;
    std::optional<Channel::Ticket> push_ticket_;
    std::set<SiteId> disabled_;
    uint64_t next_commit_id_ = 1;
    bool injected_ = false;

    std::vector<LogEntry> replay_log_;
    bool replay_phase_ = false;
    std::vector<EmittedExtern> externs_;
    std::vector<Mispredict> mispredicts_;

    uint64_t exchanges_ = 0;
    uint64_t steps_ = 0;
    RunMetrics metrics_;
};

}  // namespace

RunReport run(const Program& program, const RunOptions& options) {
    Runtime rt(program, options);
    return rt.execute();
}

}  // namespace dryrun
