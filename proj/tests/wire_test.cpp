#include <gtest/gtest.h>

#include "loader/wire.hpp"
#include "support.hpp"

namespace loader {
namespace {

UpdateHeader header(std::uint32_t src, std::uint32_t dst, std::uint32_t state, std::uint32_t replica,
                    std::uint64_t value) {
  return {src, dst, state, replica, value, 0};
}

TEST(Wire, ZeroHeader) {
  const std::vector<UpdateHeader> hs{header(0, 0, 0, 0, 0)};
  const auto bits = encode_update(hs, 0xABCD);
  EXPECT_EQ(bits.bit_length, kUpdateHeaderBits);
  ASSERT_EQ(bits.bytes.size(), 26u);
  EXPECT_EQ(bits.bytes[24], 0xAB);
  EXPECT_EQ(bits.bytes[25], 0xCD);
}

TEST(Wire, ChainingRule) {
  const std::vector<UpdateHeader> hs{header(1, 0, 0, 0, 1), header(2, 0, 1, 0, 2), header(3, 0, 2, 0, 3)};
  const auto bits = encode_update(hs, kIpEthType);
  EXPECT_EQ(bits.bit_length, 624u);
  const auto dec = decode_update(bits);
  ASSERT_EQ(dec.headers.size(), 3u);
  EXPECT_EQ(dec.headers[0].l3_protocol_type, kLoaderEthType);
  EXPECT_EQ(dec.headers[1].l3_protocol_type, kLoaderEthType);
  EXPECT_EQ(dec.headers[2].l3_protocol_type, kIpEthType);
}

TEST(Wire, TwoHeadersOverIp) {
  const std::vector<UpdateHeader> hs{header(7, 8, 9, 1, 42), header(7, 8, 10, 1, 43)};
  const auto dec = decode_update(encode_update(hs, kIpEthType));
  ASSERT_EQ(dec.headers.size(), 2u);
  EXPECT_EQ(dec.residual_type, kIpEthType);
  EXPECT_EQ(dec.headers[0].state_value, 42u);
  EXPECT_EQ(dec.headers[1].state_id, 10u);
}

TEST(Wire, OffByOneIsTruncated) {
  auto bits = encode_update(std::vector<UpdateHeader>{header(1, 2, 3, 4, 5)}, kIpEthType);
  bits.truncate(207);
  EXPECT_EQ(bits.bit_length, 207u);
  EXPECT_THROW(decode_update(bits), TruncatedHeader);
}

TEST(Wire, GoldenVectors) {
  // Field order: src 32, dst 32, state 32, replica 32, value 64, type 16.
  const std::vector<UpdateHeader> one{header(1, 2, 3, 4, 0x1122334455667788ull)};
  EXPECT_EQ(to_hex(encode_update(one, kIpEthType)),
            "00000001000000020000000300000004112233445566778808" "00");
  const std::vector<UpdateHeader> two{header(0xDEADBEEF, 0, 0xFFFFFFFF, 1, 0xFFFFFFFFFFFFFFFFull),
                                      header(0, 0, 0, 0, 0)};
  EXPECT_EQ(to_hex(encode_update(two, 0x86DD)),
            "deadbeef00000000ffffffff00000001ffffffffffffffff88b5"
            "000000000000000000000000000000000000000000000000" "86dd");
  const auto round = from_hex(to_hex(encode_update(two, 0x86DD)), 416);
  EXPECT_EQ(round, encode_update(two, 0x86DD));
}

TEST(WireProperty, RoundTripRandomStacks) {
  testing::Gen g(61);
  for (int c = 0; c < 1000; ++c) {
    const auto k = g.range(1, 6);
    std::vector<UpdateHeader> hs;
    for (std::uint64_t i = 0; i < k; ++i)
      hs.push_back(header(static_cast<std::uint32_t>(g.next()), static_cast<std::uint32_t>(g.next()),
                          static_cast<std::uint32_t>(g.next()), static_cast<std::uint32_t>(g.next()), g.next()));
    std::uint16_t inner = static_cast<std::uint16_t>(g.next());
    if (inner == kLoaderEthType) inner = kIpEthType;
    const auto bits = encode_update(hs, inner);
    ASSERT_EQ(bits.bit_length, kUpdateHeaderBits * k);
    ASSERT_EQ(bits.bytes.size(), 26 * k);
    const auto dec = decode_update(bits);
    ASSERT_EQ(dec.headers.size(), k);
    EXPECT_EQ(dec.residual_type, inner);
    for (std::uint64_t i = 0; i < k; ++i) {
      auto expect = hs[i];
      expect.l3_protocol_type = i + 1 < k ? kLoaderEthType : inner;
      EXPECT_EQ(dec.headers[i], expect);
    }
    EXPECT_EQ(encode_update(dec.headers, inner), bits);
    EXPECT_EQ(from_hex(to_hex(bits), bits.bit_length), bits);
    auto cut = bits;
    cut.truncate(g.range(0, bits.bit_length - 1));
    EXPECT_THROW(decode_update(cut), TruncatedHeader);
  }
}

}  // namespace
}  // namespace loader
