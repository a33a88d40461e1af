#include <gtest/gtest.h>

#include <random>

#include "dryrun/error.hpp"
#include "dryrun/generator.hpp"
#include "dryrun/runtime.hpp"

using namespace dryrun;

namespace {

const std::string kMap(builtin_device_map());

Program prog(const std::string& body) { return parse_workload(kMap + body); }

RunReport run_in(const Program& p, Mode m) {
    RunOptions o;
    o.mode = m;
    return run(p, o);
}

const Mode kModes[] = {Mode::Naive, Mode::M, Mode::MD, Mode::MDS};

}  // namespace

TEST(Runtime, ModeNames) {
    for (Mode m : kModes) EXPECT_EQ(parse_mode(to_string(m)), m);
    EXPECT_FALSE(parse_mode("fast").has_value());
}

TEST(Runtime, EmptyProgram) {
    Program p = prog("thread 0\n");
    for (Mode m : kModes) {
        RunReport r = run_in(p, m);
        EXPECT_EQ(r.metrics.round_trips, 0u);
        EXPECT_EQ(r.metrics.commits, 0u);
    }
}

TEST(Runtime, NaiveAccessIsOneRoundTrip) {
    Program p = prog("thread 0\n a = read GPU_ID\n b = read CORE_COUNT\n c = read SHADER_PRESENT\n");
    RunReport r = run_in(p, Mode::Naive);
    EXPECT_EQ(r.metrics.round_trips, 3u);
    EXPECT_EQ(r.metrics.register_accesses, 3u);
    EXPECT_EQ(r.vars[0].at("b"), 4u);
}

TEST(Runtime, HotScopeIsOneCommit) {
    Program p = prog("thread 0\nhot_begin interrupt\n irq = read JOB_IRQ_STATUS\n write JOB_IRQ_CLEAR, irq\n"
                     " m = read JOB_IRQ_MASK\n write JOB_IRQ_MASK, m | 1\nhot_end\n");
    RunReport naive = run_in(p, Mode::Naive);
    RunReport md = run_in(p, Mode::MD);
    EXPECT_EQ(naive.metrics.round_trips, 4u);
    EXPECT_EQ(md.metrics.commits, 1u);
    EXPECT_EQ(md.metrics.round_trips, 1u);
    EXPECT_EQ(md.metrics.deferred_accesses, 4u);
    EXPECT_EQ(md.metrics.commits_by_category[static_cast<size_t>(Category::Interrupt)], 1u);
    EXPECT_EQ(md.device_state, naive.device_state);
}

TEST(Runtime, BranchOnSymbolCommitsFirst) {
    Program p = prog("thread 0\nhot_begin other\n c = read CORE_COUNT\n if c == 4 goto four\n write AS_MEMATTR, 1\n"
                     "four:\n write AS_MEMATTR, 2\nhot_end\n extern c\n");
    RunReport md = run_in(p, Mode::MD);
    RunReport naive = run_in(p, Mode::Naive);
    EXPECT_EQ(md.metrics.commits, 2u);
    EXPECT_EQ(md.metrics.commits_by_reason[static_cast<size_t>(CommitReason::ControlDep)], 1u);
    EXPECT_EQ(md.device_state, naive.device_state);
    EXPECT_EQ(md.externs, naive.externs);
    EXPECT_EQ(md.externs[0].value, 4u);
}

TEST(Runtime, DelayAndLockAreCommitPoints) {
    Program p = prog("thread 0\nhot_begin other\n a = read GPU_ID\n delay 10\n b = read CORE_COUNT\n lock L\n"
                     " c = read SHADER_PRESENT\n unlock L\nhot_end\n");
    RunReport md = run_in(p, Mode::MD);
    EXPECT_EQ(md.metrics.commits, 3u);
    EXPECT_EQ(md.device_state, run_in(p, Mode::Naive).device_state);
}

TEST(Runtime, ProgramOrderIsKeptOnTheDevice) {
    Program p = prog("thread 0\nhot_begin other\n r = read CYCLE_COUNT\n write AS_MEMATTR, r + 1\n"
                     " s = read CYCLE_COUNT\n write AS_TRANSTAB, s ^ r\nhot_end\n extern s\n");
    RunReport naive = run_in(p, Mode::Naive);
    for (Mode m : kModes) {
        RunReport r = run_in(p, m);
        EXPECT_EQ(r.device_state, naive.device_state) << to_string(m);
        EXPECT_EQ(r.externs, naive.externs) << to_string(m);
        std::vector<std::pair<EntryKind, uint32_t>> order, want;
        for (const auto& e : r.recording.entries) order.push_back({e.kind, e.addr});
        for (const auto& e : naive.recording.entries) want.push_back({e.kind, e.addr});
        EXPECT_EQ(order, want) << to_string(m);
    }
}

TEST(Runtime, BundledWorkloadsAgreeAcrossModes) {
    for (const char* name : {"listing-mmu.wl", "listing-irq.wl", "locks3.wl"}) {
        Program p = load_workload(std::string(DRYRUN_DATA_DIR) + "/workloads/" + name);
        RunReport base = run_in(p, Mode::Naive);
        for (Mode m : kModes) {
            RunReport r = run_in(p, m);
            EXPECT_EQ(r.device_state, base.device_state) << name << " " << to_string(m);
            EXPECT_EQ(r.externs, base.externs) << name << " " << to_string(m);
            EXPECT_EQ(r.shared, base.shared) << name << " " << to_string(m);
            EXPECT_EQ(r.outputs, base.outputs) << name << " " << to_string(m);
        }
    }
}

TEST(Runtime, NondetValuesDifferBySeedOnly) {
    Program p = prog("thread 0\n f = read LATEST_FLUSH_ID\n extern f\n");
    RunOptions a, b, c;
    b.device.seed = a.device.seed;
    c.device.seed = a.device.seed + 1;
    EXPECT_EQ(run(p, a).externs, run(p, b).externs);
    EXPECT_NE(run(p, a).externs, run(p, c).externs);
}

TEST(Runtime, RandomSchedulesKeepLockedUpdatesConsistent) {
    Program p = load_workload(std::string(DRYRUN_DATA_DIR) + "/workloads/locks3.wl");
    RunReport base = run_in(p, Mode::Naive);
    for (uint64_t s = 0; s < 40; ++s) {
        RunOptions o;
        o.mode = s % 2 ? Mode::MDS : Mode::MD;
        o.schedule = Schedule::Random;
        o.schedule_seed = s;
        RunReport r = run(p, o);
        EXPECT_EQ(r.shared.at("total"), base.shared.at("total")) << s;
    }
}

TEST(Runtime, ForeignSymbolOutsideLockIsRejected) {
    Program p = prog("shared v guard A\nthread 0\n lock A\nhot_begin other\n v = read GPU_ID\nhot_end\n unlock A\n"
                     "thread 1\n delay 5\n lock A\n x = v\n unlock A\n extern x\n");
    for (Mode m : kModes) {
        RunReport r = run_in(p, m);
        ASSERT_EQ(r.externs.size(), 1u);
        EXPECT_EQ(r.externs[0].value, 0x6221u) << to_string(m);
    }
}

TEST(Runtime, QueueCapForcesFlush) {
    std::string body = "thread 0\nhot_begin other\n";
    for (int i = 0; i < 20; ++i) body += " a" + std::to_string(i) + " = read GPU_ID\n";
    body += "hot_end\n";
    RunOptions o;
    o.mode = Mode::MD;
    o.queue_cap = 8;
    RunReport r = run(prog(body), o);
    EXPECT_EQ(r.metrics.register_accesses, 20u);
    EXPECT_GE(r.metrics.commits, 3u);
}
