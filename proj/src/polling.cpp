#include "dryrun/polling.hpp"

namespace dryrun {

uint64_t eval_concrete(const Expr& e, const std::map<std::string, uint64_t>& vars) {
    switch (e.kind) {
        case Expr::Kind::Literal: return e.value;
        case Expr::Kind::Var: {
            auto it = vars.find(e.var);
            return it == vars.end() ? 0 : it->second;
        }
        case Expr::Kind::Binary: return apply(e.op, eval_concrete(*e.lhs, vars), eval_concrete(*e.rhs, vars));
    }
    return 0;
}

OffloadRequest make_offload_request(const PollLoopSpec& loop, const std::map<std::string, uint64_t>& vars) {
    OffloadRequest req;
    req.loop = loop;
    std::set<std::string> used;
    if (loop.rhs) loop.rhs->collect_vars(used);
    for (const auto& v : used) {
        auto it = vars.find(v);
        req.captured[v] = it == vars.end() ? 0 : it->second;
    }
    return req;
}

OffloadResult execute_poll(Device& dev, const OffloadRequest& req, const ReadObserver& on_read) {
    const PollLoopSpec& loop = req.loop;
    if (!loop.simple) throw Error(ErrorCode::NotSimpleLoop, "loop is not offloadable");
    const RegisterSpec& spec = dev.map().at(loop.reg);
    if (!is_idempotent_read(spec.kind))
        throw Error(ErrorCode::NotSimpleLoop, spec.name + " reads are not idempotent");
    uint64_t rhs = loop.rhs ? eval_concrete(*loop.rhs, req.captured) : 0;
    OffloadResult r;
    for (uint64_t i = 1; i <= loop.max_iters; ++i) {
        Ticks tick = dev.now();
        uint64_t v = dev.read(loop.reg);
        if (on_read) on_read(tick, v);
        r.iterations = i;
        r.final_value = v;
        if (loop.test(v, rhs)) break;
        if (i == loop.max_iters) {
            r.timed_out = true;
            break;
        }
        dev.advance(loop.backoff);
    }
    if (!loop.into.empty()) r.updated_vars[loop.into] = r.final_value;
    if (!loop.count_var.empty()) r.updated_vars[loop.count_var] = r.iterations;
    return r;
}

}  // namespace dryrun
