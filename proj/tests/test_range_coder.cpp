#include <gtest/gtest.h>

#include <random>

#include "dryrun/error.hpp"
#include "dryrun/range_coder.hpp"

using namespace dryrun;

namespace {

Bytes random_bytes(std::mt19937_64& rng, size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<uint8_t>(rng());
    return b;
}

}  // namespace

TEST(RangeCoder, EmptyInputRoundTrips) {
    Bytes coded = rc::encode({});
    EXPECT_FALSE(coded.empty());
    EXPECT_TRUE(rc::decode(coded).empty());
}

TEST(RangeCoder, ZeroPageCompressesBelow64Bytes) {
    Bytes zeros(4096, 0);
    Bytes coded = rc::encode(zeros);
    EXPECT_LT(coded.size(), 64u);
    EXPECT_EQ(rc::decode(coded), zeros);
}

TEST(RangeCoder, RandomPageDoesNotShrinkButRoundTrips) {
    std::mt19937_64 rng(7);
    Bytes in = random_bytes(rng, 4096);
    Bytes coded = rc::encode(in);
    EXPECT_GE(coded.size(), in.size());
    EXPECT_EQ(rc::decode(coded), in);
}

TEST(RangeCoder, SeededBuffersRoundTrip) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        size_t n = rng() % 9000;
        Bytes in = random_bytes(rng, n);
        // skew half the buffers so the adaptive model has something to learn
        if (i % 2)
            for (auto& x : in) x &= 0x3;
        ASSERT_EQ(rc::decode(rc::encode(in)), in) << "buffer " << i;
    }
}

TEST(RangeCoder, SkewedDataCompresses) {
    Bytes in(8192);
    for (size_t i = 0; i < in.size(); ++i) in[i] = (i % 17 == 0) ? 0xff : 0;
    EXPECT_LT(rc::encode(in).size(), in.size() / 4);
}

TEST(RangeCoder, EncodingIsDeterministic) {
    std::mt19937_64 a(3), b(3);
    EXPECT_EQ(rc::encode(random_bytes(a, 1000)), rc::encode(random_bytes(b, 1000)));
}

TEST(RangeCoder, TruncatedStreamIsRejected) {
    Bytes in(3000);
    for (size_t i = 0; i < in.size(); ++i) in[i] = static_cast<uint8_t>(i * 7);
    Bytes coded = rc::encode(in);
    coded.resize(2);
    try {
        (void)rc::decode(coded);
        FAIL() << "decode accepted a truncated stream";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CorruptStream);
    }
}
