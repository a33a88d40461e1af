#include "dryrun/device.hpp"

#include "dryrun/text.hpp"

namespace dryrun {

namespace {
uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}
}  // namespace

NondetStream::NondetStream(uint64_t seed) : state_(splitmix64(seed)) {
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ull;
}

uint64_t NondetStream::next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1Dull;
}

Device::Device(DeviceMap map, DeviceConfig config) : map_(std::move(map)), config_(config), nondet_(config.seed) {
    auto role = [&](std::string_view name) -> std::optional<uint32_t> {
        if (const RegisterSpec* r = map_.find(name)) return r->addr;
        return std::nullopt;
    };
    job_start_ = role(regs::kJobStart);
    irq_status_ = role(regs::kJobIrqStatus);
    irq_clear_ = role(regs::kJobIrqClear);
    reset();
}

void Device::reset() {
    regs_.clear();
    for (const auto& spec : map_.registers()) regs_[spec.addr].value = spec.init;
    fsm_ = JobFsm::Idle;
    irq_pending_ = false;
    due_ = 0;
    job_desc_ = 0;
    clock_ = 0;
    nondet_ = NondetStream(config_.seed);
    jobs_completed_ = 0;
    mem_ = MemoryImage{};
    pagetable_.clear();
    written_outputs_.clear();
}

void Device::settle_power(RegState& r) const {
    if (r.pending && clock_ >= r.ready_at) {
        r.value = r.target;
        r.pending = false;
    }
}

void Device::settle() {
    if (fsm_ == JobFsm::Running && clock_ >= due_) run_job();
}

std::optional<uint64_t> Device::apply_access(const RegisterAccess& acc) {
    const RegisterSpec* spec = map_.find(acc.addr);
    if (!spec) throw Error(ErrorCode::UnknownRegister, "device has no register at " + text::hex(acc.addr));
    if (acc.op == AccessOp::Write && !acc.value)
        throw Error(ErrorCode::SymbolLeak, "unresolved symbol written to " + spec->name);
    settle();
    RegState& r = regs_[acc.addr];
    std::optional<uint64_t> result;

    if (acc.op == AccessOp::Read) {
        switch (spec->kind) {
            case RegKind::Constant: result = r.value; break;
            case RegKind::Counter: result = r.value++; break;
            case RegKind::ClearOnRead:
                result = r.value;
                r.value = 0;
                break;
            case RegKind::JobStatus:
                r.value = static_cast<uint64_t>(fsm_);
                result = r.value;
                break;
            case RegKind::PowerFsm:
                settle_power(r);
                result = r.value;
                break;
            case RegKind::Nondet:
                r.value = nondet_.next();
                result = r.value;
                break;
        }
    } else {
        uint64_t v = *acc.value;
        if (job_start_ && acc.addr == *job_start_) {
            if (fsm_ == JobFsm::Running) throw Error(ErrorCode::JobBusy, "JOB_START while a job is running");
            fsm_ = JobFsm::Running;
            job_desc_ = static_cast<PageIndex>(v);
            due_ = clock_ + config_.ticks.job;
            r.value = v;
        } else if (irq_clear_ && acc.addr == *irq_clear_) {
            r.value = v;
            if (irq_status_) regs_[*irq_status_].value &= ~v;
            if (v & 1) irq_pending_ = false;
        } else {
            switch (spec->kind) {
                case RegKind::JobStatus: break;  // read-only
                case RegKind::PowerFsm:
                    settle_power(r);
                    r.target = v;
                    r.ready_at = clock_ + config_.ticks.power_transition;
                    r.pending = true;
                    settle_power(r);
                    break;
                default: r.value = v; break;
            }
        }
    }
    clock_ += config_.ticks.access;
    return result;
}

void Device::check_mapped(PageIndex p) const {
    if (!mapped(p)) throw TrapFault(p, "GPU");
}

JobResult Device::run_job() {
    if (fsm_ != JobFsm::Running) throw Error(ErrorCode::ProtocolError, "run_job without a running job");
    JobResult res;
    check_mapped(job_desc_);
    auto desc = read_descriptor(mem_, job_desc_);
    bool fault = !desc;
    if (desc) {
        res.job_id = desc->job_id;
        auto meta = expand(desc->meta), in = expand(desc->inputs), out = expand(desc->outputs);
        for (PageIndex p : meta) check_mapped(p);
        for (PageIndex p : in) check_mapped(p);
        for (PageIndex p : out) check_mapped(p);
        if (desc->transform == Transform::Add) {
            if (in.size() != out.size()) {
                fault = true;
            } else {
                auto c = static_cast<uint8_t>(desc->constant);
                for (size_t i = 0; i < in.size(); ++i) {
                    Page src = mem_.page_or_zero(in[i]);
                    Page& dst = mem_.page(out[i]);
                    for (uint32_t b = 0; b < kPageSize; ++b) dst[b] = static_cast<uint8_t>(src[b] + c);
                }
                res.outputs = out;
            }
        } else {
            constexpr size_t kPerPage = kPageSize / 8;
            if (out.size() * kPerPage < in.size()) {
                fault = true;
            } else {
                for (PageIndex p : out) mem_.fill(p, 0);
                for (size_t i = 0; i < in.size(); ++i) {
                    uint64_t sum = 0;
                    for (uint8_t b : mem_.page_or_zero(in[i])) sum += b;
                    mem_.write_u64(out[i / kPerPage], static_cast<uint32_t>((i % kPerPage) * 8), sum);
                }
                res.outputs = out;
            }
        }
    }
    res.fault = fault;
    uint64_t status = (res.job_id << 8) | (fault ? jobdesc::kStatusFault : jobdesc::kStatusDone);
    mem_.write_u64(job_desc_, jobdesc::kStatusOffset, status);
    written_outputs_.insert(res.outputs.begin(), res.outputs.end());
    irq_pending_ = true;
    if (irq_status_) regs_[*irq_status_].value |= 1;
    fsm_ = JobFsm::Done;
    ++jobs_completed_;
    return res;
}

void Device::advance(Ticks dt) {
    clock_ += dt;
    settle();
}

void Device::advance_to(Ticks t) {
    if (t > clock_) clock_ = t;
    settle();
}

void Device::finish_job() {
    if (fsm_ == JobFsm::Running) advance_to(due_);
}

std::optional<Ticks> Device::job_due() const {
    if (fsm_ != JobFsm::Running) return std::nullopt;
    return due_;
}

void Device::map_pages(const std::map<PageIndex, PagePerm>& entries) {
    for (const auto& [p, perm] : entries) {
        PagePerm pp = perm;
        pp.mapped_to_device = true;
        pagetable_[p] = pp;
    }
}

void Device::unmap_all() {
    for (auto& [p, perm] : pagetable_) perm.mapped_to_device = false;
}

bool Device::mapped(PageIndex p) const {
    auto it = pagetable_.find(p);
    return it != pagetable_.end() && it->second.mapped_to_device;
}

bool Device::any_mapped() const {
    for (const auto& [p, perm] : pagetable_)
        if (perm.mapped_to_device) return true;
    return false;
}

uint64_t Device::peek(uint32_t addr) const {
    auto it = regs_.find(addr);
    if (it == regs_.end()) throw Error(ErrorCode::UnknownRegister, "no register at " + text::hex(addr));
    return it->second.value;
}

Digest Device::state_hash() const {
    ByteWriter w;
    for (const auto& [addr, r] : regs_) {
        w.u32(addr);
        w.u64(r.value);
        w.u8(r.pending);
        w.u64(r.target);
        w.u64(r.ready_at);
    }
    w.u8(static_cast<uint8_t>(fsm_));
    w.u8(irq_pending_);
    w.u64(due_);
    w.u32(job_desc_);
    w.u64(clock_);
    w.u64(nondet_.state());
    w.u64(jobs_completed_);
    for (const auto& [p, perm] : pagetable_) {
        w.u32(p);
        w.u8(static_cast<uint8_t>(perm.readable | perm.writable << 1 | perm.executable << 2 | perm.mapped_to_device << 3));
    }
    for (const auto& [p, pg] : mem_.pages()) {
        w.u32(p);
        w.raw(ByteSpan(pg.data(), pg.size()));
    }
    return sha256(w.bytes());
}

}  // namespace dryrun
