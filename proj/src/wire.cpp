#include "loader/wire.hpp"

#include <fmt/format.h>

namespace loader {

namespace {

class BitWriter {
 public:
  explicit BitWriter(BitString& out) : out_(out) {}
  void put(std::uint64_t value, unsigned bits) {
    for (unsigned i = bits; i-- > 0;) {
      const std::size_t pos = out_.bit_length++;
      if (pos / 8 >= out_.bytes.size()) out_.bytes.push_back(0);
      if ((value >> i) & 1U) out_.bytes[pos / 8] |= static_cast<std::uint8_t>(0x80U >> (pos % 8));
    }
  }

 private:
  BitString& out_;
};

class BitReader {
 public:
  explicit BitReader(const BitString& in) : in_(in) {}
  std::size_t remaining() const { return in_.bit_length - pos_; }
  std::uint64_t get(unsigned bits) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < bits; ++i, ++pos_) v = (v << 1) | ((in_.bytes[pos_ / 8] >> (7 - pos_ % 8)) & 1U);
    return v;
  }

 private:
  const BitString& in_;
  std::size_t pos_ = 0;
};

}  // namespace

void BitString::truncate(std::size_t bits) {
  if (bits >= bit_length) return;
  bit_length = bits;
  bytes.resize((bits + 7) / 8);
  if (bits % 8 != 0) bytes.back() &= static_cast<std::uint8_t>(0xFFU << (8 - bits % 8));
}

BitString encode_update(std::span<const UpdateHeader> headers, std::uint16_t inner_type) {
  if (headers.empty()) throw Error("encode_update needs at least one header");
  BitString out;
  out.bytes.reserve(headers.size() * kUpdateHeaderBits / 8);
  BitWriter w(out);
  for (std::size_t i = 0; i < headers.size(); ++i) {
    const auto& h = headers[i];
    w.put(h.src_sw_id, 32);
    w.put(h.dst_sw_id, 32);
    w.put(h.state_id, 32);
    w.put(h.replica_id, 32);
    w.put(h.state_value, 64);
    w.put(i + 1 < headers.size() ? kLoaderEthType : inner_type, 16);
  }
  return out;
}

DecodedUpdate decode_update(const BitString& bits) {
  DecodedUpdate out;
  BitReader r(bits);
  while (true) {
    if (r.remaining() < kUpdateHeaderBits)
      throw TruncatedHeader(fmt::format("{} bits left, header needs {}", r.remaining(), kUpdateHeaderBits));
    UpdateHeader h;
    h.src_sw_id = static_cast<std::uint32_t>(r.get(32));
    h.dst_sw_id = static_cast<std::uint32_t>(r.get(32));
    h.state_id = static_cast<std::uint32_t>(r.get(32));
    h.replica_id = static_cast<std::uint32_t>(r.get(32));
    h.state_value = r.get(64);
    h.l3_protocol_type = static_cast<std::uint16_t>(r.get(16));
    out.headers.push_back(h);
    if (h.l3_protocol_type != kLoaderEthType) {
      out.residual_type = h.l3_protocol_type;
      return out;
    }
  }
}

std::string to_hex(const BitString& bits) {
  std::string s;
  s.reserve(bits.bytes.size() * 2);
  for (auto b : bits.bytes) s += fmt::format("{:02x}", b);
  return s;
}

BitString from_hex(const std::string& hex, std::size_t bit_length) {
  if (hex.size() % 2 != 0) throw Error("odd hex length");
  BitString out;
  for (std::size_t i = 0; i < hex.size(); i += 2)
    out.bytes.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
  if (bit_length > out.bytes.size() * 8) throw Error("bit length exceeds hex data");
  out.bit_length = out.bytes.size() * 8;
  out.truncate(bit_length);
  return out;
}

}  // namespace loader
