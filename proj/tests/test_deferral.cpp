#include <gtest/gtest.h>

#include <random>

#include "dryrun/deferral.hpp"
#include "dryrun/error.hpp"

using namespace dryrun;

TEST(SymExpr, SubstitutionFoldsToLiteral) {
    auto e = SymExpr::binary(BinOp::Or, SymExpr::symbol(1), SymExpr::literal(0x10));
    EXPECT_EQ(e->depth(), 2u);
    auto partial = SymExpr::substitute(e, [](SymbolId) { return std::nullopt; });
    EXPECT_EQ(partial->kind(), SymExpr::Kind::Binary);
    auto full = SymExpr::substitute(e, [](SymbolId) { return std::optional<uint64_t>(3); });
    ASSERT_EQ(full->kind(), SymExpr::Kind::Literal);
    EXPECT_EQ(full->literal_value(), 0x13u);
}

TEST(SymExpr, RandomTreesMatchDirectEvaluation) {
    std::mt19937_64 rng(42);
    const BinOp ops[] = {BinOp::And, BinOp::Or, BinOp::Xor, BinOp::Add, BinOp::Sub,
                         BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Gt};
    std::vector<uint64_t> env(8);
    for (int round = 0; round < 300; ++round) {
        for (auto& v : env) v = rng() % 16;
        // build the tree and the same computation as plain arithmetic side by side
        std::function<std::pair<SymExprPtr, uint64_t>(int)> gen = [&](int depth) -> std::pair<SymExprPtr, uint64_t> {
            if (depth == 0 || rng() % 3 == 0) {
                if (rng() % 2) {
                    SymbolId s = rng() % env.size();
                    return {SymExpr::symbol(s), env[s]};
                }
                uint64_t lit = rng() % 16;
                return {SymExpr::literal(lit), lit};
            }
            BinOp op = ops[rng() % 9];
            auto [l, lv] = gen(depth - 1);
            auto [r, rv] = gen(depth - 1);
            uint64_t v = 0;
            switch (op) {
                case BinOp::And: v = lv & rv; break;
                case BinOp::Or: v = lv | rv; break;
                case BinOp::Xor: v = lv ^ rv; break;
                case BinOp::Add: v = lv + rv; break;
                case BinOp::Sub: v = lv - rv; break;
                case BinOp::Eq: v = lv == rv; break;
                case BinOp::Ne: v = lv != rv; break;
                case BinOp::Lt: v = lv < rv; break;
                case BinOp::Gt: v = lv > rv; break;
            }
            return {SymExpr::binary(op, l, r), v};
        };
        auto [e, expect] = gen(5);
        ASSERT_EQ(e->evaluate([&](SymbolId s) { return env[s]; }), expect);
        auto folded = SymExpr::substitute(e, [&](SymbolId s) { return std::optional<uint64_t>(env[s]); });
        ASSERT_EQ(folded->kind(), SymExpr::Kind::Literal);
        ASSERT_EQ(folded->literal_value(), expect);
    }
}

TEST(Deferral, EmptyQueueMakesNoCommit) {
    DeferralQueue q;
    uint64_t id = 1;
    EXPECT_FALSE(q.flush(CommitReason::ScopeExit, {}, Category::Other, id).has_value());
    EXPECT_EQ(id, 1u);
}

TEST(Deferral, ReadYieldsSymbolAndWriteKeepsExpression) {
    DeferralQueue q;
    SymbolTable syms;
    Value r = q.enqueue_read(0x10, syms, 0, 0);
    EXPECT_FALSE(r.is_concrete());
    Value w = combine(BinOp::Or, r, Value::of(0x10));
    q.enqueue_write(0x10, w, 0);
    EXPECT_EQ(q.size(), 2u);

    uint64_t id = 7;
    auto c = q.flush(CommitReason::ScopeExit, {0, 3}, Category::Init, id);
    ASSERT_TRUE(c.has_value());
    EXPECT_TRUE(q.empty());
    EXPECT_EQ(c->id, 7u);
    EXPECT_EQ(id, 8u);
    EXPECT_EQ(c->read_count(), 1u);
    Signature expect{{'R', 0x10}, {'W', 0x10}};
    EXPECT_EQ(c->signature(), expect);

    CommitResult res{7, {0x5}, 0};
    resolve(*c, res, syms);
    Value v = syms.reduce(w);
    ASSERT_TRUE(v.is_concrete());
    EXPECT_EQ(v.get(), 0x15u);
}

TEST(Deferral, ResolveChecksArity) {
    DeferralQueue q;
    SymbolTable syms;
    (void)q.enqueue_read(0x0, syms, 0, 0);
    (void)q.enqueue_read(0x4, syms, 0, 0);
    uint64_t id = 1;
    auto c = q.flush(CommitReason::ControlDep, {}, Category::Other, id);
    try {
        resolve(*c, CommitResult{1, {1}, 0}, syms);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ArityMismatch);
    }
    EXPECT_THROW(resolve(*c, CommitResult{2, {1, 2}, 0}, syms), Error);
}

TEST(Deferral, ConcreteResultsOnlyAfterCommit) {
    SymbolTable syms;
    DeferralQueue q;
    Value a = q.enqueue_read(0x0, syms, 0, 0);
    Value b = combine(BinOp::Add, a, Value::of(1));
    EXPECT_THROW((void)b.get(), Error);
    uint64_t id = 1;
    auto c = q.flush(CommitReason::ControlDep, {}, Category::Other, id);
    resolve(*c, CommitResult{c->id, {41}, 0}, syms, 0);
    EXPECT_EQ(syms.reduce(b).get(), 42u);
}

TEST(Deferral, TaintFlowsThroughReduce) {
    SymbolTable syms;
    DeferralQueue q;
    Value a = q.enqueue_read(0x0, syms, 0, 0);
    uint64_t id = 1;
    auto c = q.flush(CommitReason::ControlDep, {}, Category::Other, id);
    resolve(*c, CommitResult{c->id, {3}, 0}, syms, 5);
    EXPECT_EQ(syms.reduce(a).taint, 5u);
    q.enqueue_write(0x4, Value::of(1, 2), 9);
    auto w = q.flush(CommitReason::ControlDep, {}, Category::Other, id);
    EXPECT_EQ(w->max_taint(), 9u);
}

TEST(Deferral, QueueCapIsEnforced) {
    DeferralQueue q(4);
    SymbolTable syms;
    for (int i = 0; i < 4; ++i) (void)q.enqueue_read(0x0, syms, 0, 0);
    try {
        (void)q.enqueue_read(0x0, syms, 0, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::QueueOverflow);
    }
}

TEST(Deferral, SymbolsRememberTheirThread) {
    SymbolTable syms;
    SymbolId a = syms.fresh(2), b = syms.fresh(5);
    EXPECT_NE(a, b);
    EXPECT_EQ(syms.owner(a), 2u);
    EXPECT_EQ(syms.owner(b), 5u);
}

TEST(Deferral, LogIndexOfRead) {
    Commit c;
    c.entries = {{AccessOp::Write, 0, 0, SymExpr::literal(1), 0}, {AccessOp::Read, 4, 1, nullptr, 0},
                 {AccessOp::Read, 8, 2, nullptr, 0}};
    CommitResult r{0, {0, 0}, 100};
    EXPECT_EQ(r.log_index_of_read(c, 0), 101u);
    EXPECT_EQ(r.log_index_of_read(c, 1), 102u);
    EXPECT_THROW((void)r.log_index_of_read(c, 2), Error);
}
