#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "loader/app_model.hpp"

namespace loader {

inline constexpr std::uint16_t kLoaderEthType = 0x88B5;
inline constexpr std::uint16_t kIpEthType = 0x0800;
inline constexpr std::size_t kUpdateHeaderBits = 208;

class TruncatedHeader : public Error {
 public:
  using Error::Error;
};

struct UpdateHeader {
  std::uint32_t src_sw_id = 0;
  std::uint32_t dst_sw_id = 0;
  std::uint32_t state_id = 0;
  std::uint32_t replica_id = 0;
  std::uint64_t state_value = 0;
  std::uint16_t l3_protocol_type = 0;
  bool operator==(const UpdateHeader&) const = default;
};

/// Bit string, MSB first. Bits past `bit_length` in the last byte are zero.
struct BitString {
  std::vector<std::uint8_t> bytes;
  std::size_t bit_length = 0;

  bool operator==(const BitString&) const = default;
  /// Drops bits from the end (keeps padding bits zero).
  void truncate(std::size_t bits);
};

/// All headers but the last carry kLoaderEthType; the last carries `inner_type`.
BitString encode_update(std::span<const UpdateHeader> headers, std::uint16_t inner_type);

struct DecodedUpdate {
  std::vector<UpdateHeader> headers;
  std::uint16_t residual_type = 0;
};

DecodedUpdate decode_update(const BitString& bits);

std::string to_hex(const BitString& bits);
BitString from_hex(const std::string& hex, std::size_t bit_length);

}  // namespace loader
