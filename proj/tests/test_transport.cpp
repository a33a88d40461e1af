#include <gtest/gtest.h>

#include <random>

#include "dryrun/error.hpp"
#include "dryrun/transport.hpp"

using namespace dryrun;
using namespace std::chrono_literals;

namespace {

/// Echoes the payload back and stays busy for a fixed number of ticks.
struct Echo : Endpoint {
    Ticks busy = 0;
    size_t reply_bytes = 0;
    std::vector<MsgKind> seen;
    Reply handle(MsgKind kind, ByteSpan payload) override {
        seen.push_back(kind);
        Bytes out = reply_bytes ? Bytes(reply_bytes, 0) : Bytes(payload.begin(), payload.end());
        return {out, busy};
    }
};

}  // namespace

TEST(Network, Presets) {
    EXPECT_EQ(NetworkConfig::wifi().rtt, 20ms);
    EXPECT_EQ(NetworkConfig::wifi().bandwidth_bps, 80e6);
    EXPECT_EQ(NetworkConfig::cellular().rtt, 50ms);
    EXPECT_EQ(NetworkConfig::cellular().bandwidth_bps, 40e6);
    EXPECT_THROW(NetworkConfig::preset("lte"), Error);
    EXPECT_THROW(NetworkConfig::custom(0, 10).validate(), Error);
    EXPECT_THROW(NetworkConfig::custom(10, 0).validate(), Error);
}

TEST(Network, OneMegabyteAtEightyMegabitIsHundredMs) {
    EXPECT_EQ(NetworkConfig::wifi().serialization(1'000'000), 100ms);
}

TEST(Channel, EmptyExchangeCostsOneRtt) {
    Echo dev;
    Channel ch(NetworkConfig::custom(30, 100), dev);
    ch.send_request(MsgKind::SyncAccess, {});
    EXPECT_EQ(ch.now(), 30ms);
    EXPECT_EQ(ch.counters().blocking_waits, 1u);
}

TEST(Channel, TimeIsRttPlusSerializationPlusBusy) {
    Echo dev;
    dev.busy = 1000;  // 1 ms of device time
    dev.reply_bytes = 500'000;
    Channel ch(NetworkConfig::custom(20, 80), dev);
    ch.send_request(MsgKind::CommitRequest, Bytes(1'000'000, 1));
    // 100 ms up, 50 ms back, 1 ms busy, 20 ms propagation
    EXPECT_EQ(ch.now(), 171ms);
    EXPECT_EQ(ch.counters().bytes_to_device, 1'000'000u);
    EXPECT_EQ(ch.counters().bytes_from_device, 500'000u);
    EXPECT_EQ(ch.counters().frame_bytes_to_device, 1'000'000u + kFrameOverhead);
}

TEST(Channel, AsyncRequestsOverlap) {
    Echo dev;
    Channel ch(NetworkConfig::custom(40, 1000), dev);
    std::vector<Channel::Ticket> t;
    for (int i = 0; i < 5; ++i) t.push_back(ch.send_async(MsgKind::CommitRequest, Bytes(8, 0)));
    EXPECT_EQ(ch.pending(), 5u);
    for (auto x : t) ch.await(x);
    // sequential exchanges would take 200 ms
    EXPECT_LT(ch.now(), 41ms);
}

TEST(Channel, ResponsesArriveInRequestOrder) {
    Echo dev;
    Channel ch(NetworkConfig::custom(10, 1), dev);
    std::mt19937_64 rng(1);
    SimTime last{0};
    for (int i = 0; i < 50; ++i) {
        auto t = ch.send_async(MsgKind::SyncAccess, Bytes(rng() % 2000, 0));
        EXPECT_GE(ch.arrival(t), last);
        last = ch.arrival(t);
        if (rng() % 3 == 0) ch.advance(1ms);
    }
}

TEST(Channel, AwaitTwiceOrNeverSent) {
    Echo dev;
    Channel ch(NetworkConfig::wifi(), dev);
    auto t = ch.send_async(MsgKind::SyncAccess, {1, 2, 3});
    EXPECT_EQ(ch.await(t), (Bytes{1, 2, 3}));
    try {
        ch.await(t);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AwaitBeforeSend);
    }
    EXPECT_THROW(ch.await(99), Error);
}

TEST(Channel, OnlyRequestsCanBeSent) {
    Echo dev;
    Channel ch(NetworkConfig::wifi(), dev);
    EXPECT_THROW(ch.send_async(MsgKind::Ack, {}), Error);
    EXPECT_EQ(response_kind(MsgKind::LoopOffload), MsgKind::LoopResult);
    EXPECT_EQ(response_kind(MsgKind::IrqWait), MsgKind::IrqEvent);
}

TEST(Channel, ByteConservation) {
    Echo dev;
    Channel ch(NetworkConfig::cellular(), dev);
    uint64_t sent = 0;
    size_t obs = 0;
    ch.set_observer([&](MsgKind, size_t n) { obs += n; });
    std::mt19937_64 rng(9);
    for (int i = 0; i < 40; ++i) {
        size_t n = rng() % 5000;
        sent += n;
        ch.send_request(MsgKind::CommitRequest, Bytes(n, 7));
    }
    EXPECT_EQ(ch.counters().bytes_to_device, sent);
    EXPECT_EQ(ch.counters().bytes_from_device, sent);
    EXPECT_EQ(obs, sent);
    EXPECT_EQ(ch.counters().messages_to_device, 40u);
    EXPECT_EQ(dev.seen.size(), 40u);
}

TEST(Frame, RoundTripAndCorruption) {
    Message m{MsgKind::MemPush, 42, Bytes{9, 8, 7, 6}};
    Bytes f = encode_frame(m);
    EXPECT_EQ(f.size(), 4 + kFrameOverhead);
    Message back = decode_frame(f);
    EXPECT_EQ(back.kind, m.kind);
    EXPECT_EQ(back.seq, 42u);
    EXPECT_EQ(back.payload, m.payload);
    for (size_t i = 0; i < f.size(); ++i) {
        Bytes bad = f;
        bad[i] ^= 0x40;
        try {
            decode_frame(bad);
            ADD_FAILURE() << "flip at " << i << " accepted";
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::FrameCorrupt);
        }
    }
    f.pop_back();
    EXPECT_THROW(decode_frame(f), Error);
}
