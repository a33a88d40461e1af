#include "dryrun/generator.hpp"

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "dryrun/error.hpp"
#include "dryrun/text.hpp"

namespace dryrun {

namespace {

constexpr std::string_view kMap = R"(# Register map of a small Mali-like GPU.
REG 0x0000 GPU_ID constant 0x6221
REG 0x0004 CORE_COUNT constant 0x4
REG 0x0008 SHADER_PRESENT constant 0xf
REG 0x000c MMU_CONFIG constant 0x0
REG 0x0010 L2_CONFIG constant 0x0
REG 0x0014 GPU_FEATURES constant 0x7
REG 0x0018 CYCLE_COUNT counter 0x0
REG 0x001c LATEST_FLUSH_ID nondet 0x0
REG 0x0020 PWR_STATE power-fsm 0x0
REG 0x0024 L2_STATE power-fsm 0x0
REG 0x0028 CACHE_STATE power-fsm 0x0
REG 0x002c GPU_IRQ_MASK constant 0x0
REG 0x0030 GPU_IRQ_RAWSTAT clear-on-read 0x0
REG 0x0040 JOB_START constant 0x0
REG 0x0044 JOB_STATUS job-status 0x0
REG 0x0048 JOB_IRQ_STATUS clear-on-read 0x0
REG 0x004c JOB_IRQ_CLEAR constant 0x0
REG 0x0050 JOB_IRQ_MASK constant 0x0
REG 0x0054 AS_TRANSTAB constant 0x0
REG 0x0058 AS_MEMATTR constant 0x0
REG 0x005c AS_COMMAND constant 0x0
)";

constexpr const char* kReadRegs[] = {"GPU_ID",     "CORE_COUNT", "SHADER_PRESENT", "GPU_FEATURES",
                                     "L2_CONFIG",  "MMU_CONFIG", "JOB_STATUS",     "AS_MEMATTR"};
constexpr const char* kRmwRegs[] = {"MMU_CONFIG", "L2_CONFIG", "AS_MEMATTR", "GPU_IRQ_MASK"};
constexpr const char* kWriteRegs[] = {"AS_TRANSTAB", "AS_COMMAND", "JOB_IRQ_MASK", "GPU_IRQ_MASK"};
constexpr Category kBurstCategories[] = {Category::Other, Category::Power, Category::Interrupt, Category::Other};

struct PollPlan {
    bool job_check = false, pwr_on = false, pwr_off = false, l2_on = false, l2_off = false;
    uint32_t cache_pre = 0, cache_post = 0;
};

PollPlan plan_polls(uint32_t n) {
    PollPlan p;
    auto take = [&](bool& flag) {
        if (n) {
            flag = true;
            --n;
        }
    };
    take(p.job_check);
    take(p.pwr_on);
    take(p.pwr_off);
    if (n) --n, ++p.cache_pre;
    if (n) --n, ++p.cache_post;
    take(p.l2_on);
    take(p.l2_off);
    p.cache_pre += n;
    return p;
}

class Emitter {
public:
    Emitter(const WorkloadProfile& prof, std::vector<uint64_t> filler)
        : prof_(prof), filler_(std::move(filler)), rng_(prof.seed), complex_left_(prof.complex_polls) {}

    std::string emit() {
        std::ostringstream head;
        head << "# generated workload: profile " << prof_.name << ", seed " << prof_.seed << '\n';
        head << kMap;
        head << "hints " << to_string(prof_.hints) << '\n';
        uint32_t meta = prof_.meta_pages, per = prof_.pages_per_job;
        PageIndex in0 = meta, out0 = meta + prof_.n_jobs * per;
        for (uint32_t j = 1; j <= prof_.n_jobs; ++j) {
            PageIndex in = in0 + (j - 1) * per, out = out0 + (j - 1) * per;
            head << "job " << j << " meta=0-" << (meta - 1) << " in=" << in << '-' << (in + per - 1) << " out=" << out << '-'
                 << (out + per - 1) << " xform=";
            if (j % 4 == 0) head << "checksum\n";
            else head << "add:" << (j % 5 + 1) << '\n';
        }
        if (prof_.n_jobs) head << "input " << in0 << '-' << (out0 - 1) << " random=" << prof_.seed << '\n';
        head << "thread 0\n";

        init();
        for (uint32_t j = 1; j <= prof_.n_jobs; ++j) job(j);
        if (!prof_.n_jobs && !filler_.empty()) bursts(filler_[0]);
        return head.str() + body_.str();
    }

    [[nodiscard]] uint64_t accesses() const { return accesses_; }
    [[nodiscard]] uint32_t polls() const { return polls_; }

private:
    void line(std::string_view s, int indent = 0) {
        body_ << std::string(static_cast<size_t>(indent) * 2, ' ') << s << '\n';
    }
    void read(const std::string& var, std::string_view reg, int indent = 1) {
        line(var + " = read " + std::string(reg), indent);
        ++accesses_;
    }
    void write(std::string_view reg, const std::string& expr, int indent = 1) {
        line("write " + std::string(reg) + ", " + expr, indent);
        ++accesses_;
    }
    uint64_t pick(uint64_t n) { return rng_() % n; }

    void check(const std::string& cond) {
        line("poll " + cond + " max 100 backoff 2");
        ++accesses_;
        ++polls_;
    }

    void transition(const std::string& reg) {
        uint64_t next = state_[reg] ^ 1;
        state_[reg] = next;
        line("hot_begin power");
        write(reg, std::to_string(next));
        line("hot_end");
        std::string poll = "poll " + reg + " == " + std::to_string(next) + " max 100 backoff 2";
        if (complex_left_) {
            --complex_left_;
            poll += " count n";
        }
        line(poll);
        accesses_ += 3;
        ++polls_;
    }

    void init() {
        line("hot_begin init");
        read("id", "GPU_ID");
        read("cores", "CORE_COUNT");
        read("present", "SHADER_PRESENT");
        read("feat", "GPU_FEATURES");
        read("cyc", "CYCLE_COUNT");
        read("mmu", "MMU_CONFIG");
        write("MMU_CONFIG", "mmu | 0x10");
        write("GPU_IRQ_MASK", "0xff");
        write("JOB_IRQ_MASK", "0x1");
        line("hot_end");
        line("extern cores");
        const char* checks[] = {"GPU_ID & 0xff00 == 0x6200", "PWR_STATE == 0", "L2_STATE == 0", "CACHE_STATE == 0",
                                "JOB_STATUS == 0"};
        uint32_t n = std::min<uint32_t>(prof_.n_polls, 5);
        if (!prof_.n_jobs) n = prof_.n_polls;
        for (uint32_t i = 0; i < n; ++i) check(checks[i % 5]);
    }

    /// Configuration bursts of 3 to 7 accesses totalling exactly `n`.
    void bursts(uint64_t n) {
        while (n) {
            uint64_t size = std::min<uint64_t>(n, 3 + pick(5));
            n -= size;
            burst(size);
        }
    }

    void burst(uint64_t size) {
        Category cat = kBurstCategories[burst_no_++ % std::size(kBurstCategories)];
        line("hot_begin " + std::string(to_string(cat)));
        int var = 0;
        while (size) {
            uint64_t op = pick(4);
            std::string v = "t" + std::to_string(var++ % 4);
            if (op < 2 && size >= 2) {
                const char* reg = kRmwRegs[pick(std::size(kRmwRegs))];
                read(v, reg);
                write(reg, v + " | " + text::hex(uint64_t{1} << pick(8)));
                size -= 2;
            } else if (op == 2) {
                bool nondet = prof_.nondet_fraction > 0 &&
                              static_cast<double>(rng_() >> 11) * 0x1.0p-53 < prof_.nondet_fraction;
                read(v, nondet ? "LATEST_FLUSH_ID" : kReadRegs[pick(std::size(kReadRegs))]);
                --size;
            } else {
                write(kWriteRegs[pick(std::size(kWriteRegs))], text::hex(pick(16)));
                --size;
            }
        }
        line("hot_end");
    }

    void job(uint32_t j) {
        uint32_t base = prof_.n_jobs ? (prof_.n_polls - std::min<uint32_t>(prof_.n_polls, 5)) / prof_.n_jobs : 0;
        uint32_t rem = prof_.n_jobs ? (prof_.n_polls - std::min<uint32_t>(prof_.n_polls, 5)) % prof_.n_jobs : 0;
        PollPlan plan = plan_polls(base + (j <= rem ? 1 : 0));
        uint64_t fill = j - 1 < filler_.size() ? filler_[j - 1] : 0;
        uint64_t quarter = fill / 4;
        uint64_t slot[4] = {quarter, quarter, quarter, fill - 3 * quarter};

        line("note job " + std::to_string(j));
        bursts(slot[0]);
        if (plan.pwr_on) transition("PWR_STATE");
        if (plan.l2_on) transition("L2_STATE");
        bursts(slot[1]);
        for (uint32_t i = 0; i < plan.cache_pre; ++i) transition("CACHE_STATE");

        line("hot_begin other");
        line("lock gpu", 1);
        read("c", "L2_CONFIG");
        write("L2_CONFIG", "c | 0x1");
        line("unlock gpu", 1);
        line("hot_end");
        if (prof_.meta_pages > 1) line("memw 1 0x0 " + std::to_string(j));
        bursts(slot[2]);
        if (plan.job_check) check("JOB_STATUS != 1");

        line("hot_begin other");
        write("AS_TRANSTAB", text::hex(uint64_t{0x1000} * j));
        write("AS_MEMATTR", "0x88");
        write("AS_COMMAND", "0x1");
        read("s", "JOB_STATUS");
        line("hot_end");
        line("delay 20");
        line("submit " + std::to_string(j));
        ++accesses_;
        line("wait_irq");
        line("hot_begin interrupt");
        read("irq", "JOB_IRQ_STATUS");
        write("JOB_IRQ_CLEAR", "irq");
        read("raw", "GPU_IRQ_RAWSTAT");
        line("hot_end");
        line("memr st 0 0xf00");
        line("extern st");
        bursts(slot[3]);
        for (uint32_t i = 0; i < plan.cache_post; ++i) transition("CACHE_STATE");
        if (plan.l2_off) transition("L2_STATE");
        if (plan.pwr_off) transition("PWR_STATE");
    }

    const WorkloadProfile& prof_;
    std::vector<uint64_t> filler_;
    std::mt19937_64 rng_;
    uint32_t complex_left_;
    std::ostringstream body_;
    std::map<std::string, uint64_t> state_;
    uint64_t accesses_ = 0;
    uint32_t polls_ = 0;
    uint64_t burst_no_ = 0;
};

}  // namespace

std::string_view builtin_device_map() { return kMap; }

std::optional<WorkloadProfile> bundled_profile(std::string_view name) {
    WorkloadProfile p;
    p.name = std::string(name);
    if (name == "mnist-like") {
        p.n_jobs = 16;
        p.accesses = 2800;
        p.n_polls = 117;
        p.meta_pages = 8;
        return p;
    }
    if (name == "vgg16-like") {
        p.n_jobs = 32;
        p.accesses = 8000;
        p.n_polls = 492;
        p.meta_pages = 16;
        return p;
    }
    if (name == "flush-id") {
        p.n_jobs = 4;
        p.accesses = 600;
        p.n_polls = 25;
        p.nondet_fraction = 0.2;
        return p;
    }
    if (name == "complex-polls") {
        p.n_jobs = 4;
        p.accesses = 600;
        p.n_polls = 25;
        p.complex_polls = 6;
        return p;
    }
    return std::nullopt;
}

std::vector<std::string> bundled_profile_names() { return {"mnist-like", "vgg16-like", "flush-id", "complex-polls"}; }

std::string synthesize_workload_text(const WorkloadProfile& prof) {
    if (!(prof.nondet_fraction >= 0.0 && prof.nondet_fraction <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "nondet_fraction must lie in [0, 1]");
    if (prof.n_jobs && (prof.meta_pages == 0 || prof.pages_per_job == 0))
        throw Error(ErrorCode::InvalidArgument, "jobs need at least one metastate page and one data page");
    if (prof.complex_polls > prof.n_polls) throw Error(ErrorCode::InvalidArgument, "more complex polls than polls");

    Emitter probe(prof, {});
    probe.emit();
    uint64_t base = probe.accesses();
    if (prof.accesses && prof.accesses < base)
        throw Error(ErrorCode::InvalidArgument, "profile " + prof.name + " needs at least " + std::to_string(base) +
                                                    " accesses for its segments, asked for " + std::to_string(prof.accesses));
    uint64_t extra = prof.accesses ? prof.accesses - base : 0;
    std::vector<uint64_t> filler;
    uint32_t slots = std::max<uint32_t>(prof.n_jobs, 1);
    for (uint32_t j = 0; j < slots; ++j) filler.push_back(extra / slots + (j < extra % slots ? 1 : 0));

    Emitter e(prof, filler);
    std::string text = e.emit();
    if (prof.accesses && e.accesses() != prof.accesses)
        throw Error(ErrorCode::InvalidArgument, "generator miscounted accesses");
    return text;
}

Program synthesize_workload(const WorkloadProfile& prof) { return parse_workload(synthesize_workload_text(prof)); }

}  // namespace dryrun
