#include <gtest/gtest.h>

#include <random>

#include "dryrun/error.hpp"
#include "dryrun/generator.hpp"
#include "dryrun/polling.hpp"
#include "dryrun/runtime.hpp"

using namespace dryrun;

namespace {

const std::string kMap(builtin_device_map());

PollLoopSpec poll_of(const std::string& line) {
    Program p = parse_workload(kMap + "thread 0\n" + line + "\n");
    return p.threads[0].code[0].poll;
}

Device fresh() { return Device(DeviceMap::parse(kMap)); }

/// Reference: the loop driven one read at a time from outside the device.
OffloadResult local_oracle(Device& dev, const PollLoopSpec& loop, uint64_t rhs) {
    OffloadResult r;
    for (uint64_t i = 0; i < loop.max_iters; ++i) {
        uint64_t v = dev.read(loop.reg);
        r.iterations = i + 1;
        r.final_value = v;
        uint64_t m = loop.mask ? (v & *loop.mask) : v;
        if (apply(loop.cmp, m, rhs)) return r;
        if (i + 1 < loop.max_iters) dev.advance(loop.backoff);
    }
    r.timed_out = true;
    return r;
}

}  // namespace

TEST(Polling, PowerTransitionTakesThreeReads) {
    Device dev = fresh();
    dev.write(dev.map().find("PWR_STATE")->addr, 1);
    auto res = execute_poll(dev, make_offload_request(poll_of("poll PWR_STATE == 1 max 100 backoff 2"), {}));
    EXPECT_EQ(res.iterations, 3u);
    EXPECT_FALSE(res.timed_out);
    EXPECT_EQ(res.final_value, 1u);
}

TEST(Polling, TimeoutReportsMaxIterations) {
    Device dev = fresh();
    auto res = execute_poll(dev, make_offload_request(poll_of("poll PWR_STATE == 1 max 7 backoff 1 into v"), {}));
    EXPECT_TRUE(res.timed_out);
    EXPECT_EQ(res.iterations, 7u);
}

TEST(Polling, CapturedVariablesFeedThePredicate) {
    PollLoopSpec loop = poll_of("poll CORE_COUNT == want max 3 into got");
    std::map<std::string, uint64_t> vars{{"want", 4}, {"other", 1}};
    OffloadRequest req = make_offload_request(loop, vars);
    EXPECT_EQ(req.captured.size(), 1u);
    Device dev = fresh();
    auto res = execute_poll(dev, req);
    EXPECT_EQ(res.iterations, 1u);
    EXPECT_EQ(res.updated_vars.at("got"), 4u);
}

TEST(Polling, NonIdempotentLoopIsRejected) {
    Device dev = fresh();
    try {
        execute_poll(dev, make_offload_request(poll_of("poll JOB_IRQ_STATUS == 1 max 5"), {}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotSimpleLoop);
    }
}

TEST(Polling, OffloadMatchesLocalExecution) {
    std::mt19937_64 rng(5);
    const char* regs[] = {"PWR_STATE", "L2_STATE", "CACHE_STATE", "CORE_COUNT", "GPU_FEATURES"};
    for (int i = 0; i < 200; ++i) {
        std::string reg = regs[rng() % 5];
        uint64_t target = rng() % 3, max = 1 + rng() % 12, backoff = rng() % 4, settle = rng() % 8;
        std::string line = "poll " + reg + " == " + std::to_string(target) + " max " + std::to_string(max) +
                           " backoff " + std::to_string(backoff);
        PollLoopSpec loop = poll_of(line);
        Device a = fresh(), b = fresh();
        for (Device* d : {&a, &b}) {
            d->write(d->map().find("PWR_STATE")->addr, 1);
            d->write(d->map().find("L2_STATE")->addr, 2);
            d->advance(settle);
        }
        OffloadResult got = execute_poll(a, make_offload_request(loop, {}));
        OffloadResult want = local_oracle(b, loop, target);
        ASSERT_EQ(got.iterations, want.iterations) << line;
        ASSERT_EQ(got.timed_out, want.timed_out) << line;
        ASSERT_EQ(got.final_value, want.final_value) << line;
        ASSERT_EQ(a.state_hash(), b.state_hash()) << line;
    }
}

TEST(Polling, OffloadedPollIsOneRoundTrip) {
    Program p = parse_workload(kMap + "thread 0\n  write PWR_STATE, 1\n  poll PWR_STATE == 1 max 100 backoff 2\n");
    RunOptions o;
    o.mode = Mode::Naive;
    RunReport naive = run(p, o);
    EXPECT_EQ(naive.metrics.round_trips, 4u);
    o.mode = Mode::MD;
    RunReport md = run(p, o);
    EXPECT_EQ(md.metrics.polls_offloaded, 1u);
    EXPECT_EQ(md.metrics.round_trips, 2u);
    EXPECT_EQ(md.device_state, naive.device_state);
}

TEST(Polling, ComplexPollRunsLocally) {
    Program p = parse_workload(kMap + "thread 0\n  write PWR_STATE, 1\n  poll PWR_STATE == 1 max 100 backoff 2 count n\n  extern n\n");
    RunOptions o;
    o.mode = Mode::MD;
    RunReport r = run(p, o);
    EXPECT_EQ(r.metrics.polls_offloaded, 0u);
    EXPECT_EQ(r.metrics.local_poll_iterations, 3u);
    ASSERT_EQ(r.externs.size(), 1u);
    EXPECT_EQ(r.externs[0].value, 3u);
}
