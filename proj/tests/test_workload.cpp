#include <gtest/gtest.h>

#include <filesystem>

#include "dryrun/error.hpp"
#include "dryrun/generator.hpp"
#include "dryrun/workload.hpp"

using namespace dryrun;

namespace {

const std::string kRegs = std::string(builtin_device_map());

Program parse(const std::string& body) { return parse_workload(kRegs + body); }

ErrorCode parse_error(const std::string& body) {
    try {
        parse(body);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Workload, ReadThenDependentWrite) {
    Program p = parse("thread 0\n r1 = read JOB_IRQ_STATUS\n write JOB_IRQ_CLEAR, r1\n");
    ASSERT_EQ(p.threads.size(), 1u);
    const auto& code = p.threads[0].code;
    ASSERT_EQ(code.size(), 2u);
    EXPECT_EQ(code[0].op, Op::Read);
    EXPECT_EQ(code[0].dst, "r1");
    EXPECT_EQ(code[1].op, Op::Write);
    EXPECT_EQ(code[1].expr->kind, Expr::Kind::Var);
    EXPECT_EQ(code[1].expr->var, "r1");
}

TEST(Workload, SimplePollIsClassified) {
    Program p = parse("thread 0\n poll JOB_STATUS == 0 max 1000\n");
    const PollLoopSpec& poll = p.threads[0].code[0].poll;
    EXPECT_EQ(poll.cmp, BinOp::Eq);
    EXPECT_EQ(poll.max_iters, 1000u);
    EXPECT_TRUE(poll.simple);
    EXPECT_TRUE(poll.test(0, 0));
    EXPECT_FALSE(poll.test(1, 0));
}

TEST(Workload, PollOnClearOnReadOrWithCounterIsComplex) {
    Program a = parse("thread 0\n poll JOB_IRQ_STATUS == 1 max 10\n");
    EXPECT_FALSE(a.threads[0].code[0].poll.simple);
    Program b = parse("thread 0\n poll JOB_STATUS == 0 max 10 count n\n extern n\n");
    EXPECT_FALSE(b.threads[0].code[0].poll.simple);
    Program c = parse("thread 0\n poll PWR_STATE & 0x1 == 1 max 10 backoff 3 into v\n");
    EXPECT_TRUE(c.threads[0].code[0].poll.simple);
    EXPECT_EQ(*c.threads[0].code[0].poll.mask, 1u);
    EXPECT_EQ(c.threads[0].code[0].poll.backoff, 3u);
}

TEST(Workload, StaticErrors) {
    EXPECT_EQ(parse_error("thread 0\n lock A\n"), ErrorCode::UnbalancedLock);
    EXPECT_EQ(parse_error("thread 0\n unlock A\n"), ErrorCode::UnbalancedLock);
    EXPECT_EQ(parse_error("thread 0\n lock A\n if x goto out\n unlock A\nout:\n"), ErrorCode::UnbalancedLock);
    EXPECT_EQ(parse_error("thread 0\nhot_begin\nhot_begin\nhot_end\nhot_end\n"), ErrorCode::OverlappingHotScope);
    EXPECT_EQ(parse_error("thread 0\nhot_begin\n x = 1\n"), ErrorCode::OverlappingHotScope);
    EXPECT_EQ(parse_error("thread 0\n x = read NOPE\n"), ErrorCode::UnknownRegister);
    EXPECT_EQ(parse_error("thread 0\n x = = 1\n"), ErrorCode::SyntaxError);
    EXPECT_EQ(parse_error("shared t guard A\nthread 0\n t = 1\n"), ErrorCode::UnguardedShared);
}

TEST(Workload, DiagnosticsCarryLineAndColumn) {
    try {
        parse_workload("REG 0x0 A constant 0\nthread 0\n  x = read A\n  y = x +\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.code(), ErrorCode::SyntaxError);
        EXPECT_EQ(e.line(), 4);
        EXPECT_GT(e.column(), 1);
    }
}

TEST(Workload, HotScopesAndLabels) {
    Program p = parse("thread 0\n i = 0\ntop:\nhot_begin interrupt\n v = read GPU_ID\nhot_end\n i = i + 1\n if i < 3 goto top\n");
    const auto& t = p.threads[0];
    ASSERT_EQ(t.scopes.size(), 1u);
    EXPECT_EQ(t.scopes[0].category, Category::Interrupt);
    EXPECT_EQ(t.code[t.code.size() - 1].target, 1u);
    auto w = t.writes_in(0, t.code.size());
    EXPECT_TRUE(w.count("i") && w.count("v"));
}

TEST(Workload, ExpressionsFollowPrecedenceAsWritten) {
    Program p = parse("thread 0\n x = 1 + 2 == 3\n y = (1 | 2) ^ 1\n");
    EXPECT_EQ(p.threads[0].code[0].expr->to_string(), "((0x1 + 0x2) == 0x3)");
}

TEST(Workload, PrintParseIdentityOnBundledFiles) {
    for (const auto& entry : std::filesystem::directory_iterator(std::string(DRYRUN_DATA_DIR) + "/workloads")) {
        Program a = load_workload(entry.path().string());
        Program b = parse_workload(print_workload(a));
        EXPECT_TRUE(program_equal(a, b)) << entry.path();
        EXPECT_EQ(workload_hash(a), workload_hash(b)) << entry.path();
    }
}

TEST(Workload, PrintParseIdentityOnGeneratedProfiles) {
    for (const auto& name : bundled_profile_names()) {
        Program a = synthesize_workload(*bundled_profile(name));
        EXPECT_TRUE(program_equal(a, parse_workload(print_workload(a)))) << name;
    }
}

TEST(Workload, PageRanges) {
    auto r = parse_ranges("0-3,8,10-11");
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(expand(r).size(), 7u);
    EXPECT_EQ(format_ranges(r), "0-3,8,10-11");
    EXPECT_THROW(parse_ranges("5-2"), Error);
}

TEST(Workload, JobsInputsAndHints) {
    Program p = parse("hints readonly\njob 2 meta=0 in=1-2 out=3-4 xform=checksum\ninput 1-2 fill=0x7\nthread 0\n submit 2\n wait_irq\n");
    EXPECT_EQ(p.hints, Hints::Readonly);
    EXPECT_EQ(p.job(2).transform, Transform::Checksum);
    EXPECT_EQ(p.pages().size(), 5u);
    EXPECT_EQ(p.input_pages().size(), 2u);
    EXPECT_EQ(parse_error("thread 0\n submit 9\n"), ErrorCode::SyntaxError);
}
