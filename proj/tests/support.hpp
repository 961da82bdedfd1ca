#pragma once
// Shared fixtures and hand-rolled generators for the test binaries.

#include <cstdint>
#include <string>
#include <vector>

#include "loader/experiment.hpp"

namespace loader::testing {

/// splitmix64; small, seedable, identical on every platform.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : s_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (s_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  /// Uniform in [lo, hi].
  std::uint64_t range(std::uint64_t lo, std::uint64_t hi) { return lo + next() % (hi - lo + 1); }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  bool coin() { return next() & 1; }

 private:
  std::uint64_t s_;
};

inline std::string scenario_path(const std::string& name) {
  return std::string(LOADER_SCENARIO_DIR) + "/" + name + ".scn";
}

/// Ring SW1..SW4 with AS_i at SW_i, SRV1 and SRV2 at SW2, SRV3 at SW4.
inline Topology ring_topology(std::int64_t delay_ns = 100'000, std::uint64_t cap = 10'000'000) {
  Topology t;
  for (int i = 1; i <= 4; ++i) t.add_node("SW" + std::to_string(i), NodeKind::Switch);
  for (int i = 1; i <= 4; ++i) t.add_node("AS" + std::to_string(i), NodeKind::Host);
  for (int i = 1; i <= 3; ++i) t.add_node("SRV" + std::to_string(i), NodeKind::Host);
  for (NodeId i = 0; i < 4; ++i) t.add_link(i, (i + 1) % 4, delay_ns, cap);
  for (NodeId i = 0; i < 4; ++i) t.add_link(4 + i, i, 10'000, 100'000'000);
  t.add_link(8, 1, 10'000, 100'000'000);
  t.add_link(9, 1, 10'000, 100'000'000);
  t.add_link(10, 3, 10'000, 100'000'000);
  return t;
}

/// Connected random switch graph with `n` switches, one host per switch,
/// integer delays in [1, 9] microseconds.
inline Topology random_topology(Gen& g, std::uint32_t n, double extra_edge_p = 0.4) {
  Topology t;
  for (std::uint32_t i = 0; i < n; ++i) t.add_node("S" + std::to_string(i), NodeKind::Switch);
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (std::uint32_t i = 1; i < n; ++i) {
    const auto j = static_cast<std::uint32_t>(g.range(0, i - 1));
    adj[i][j] = adj[j][i] = true;
    t.add_link(j, i, static_cast<std::int64_t>(g.range(1, 9)) * 1000, 1'000'000'000);
  }
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      if (!adj[i][j] && g.unit() < extra_edge_p) {
        adj[i][j] = adj[j][i] = true;
        t.add_link(i, j, static_cast<std::int64_t>(g.range(1, 9)) * 1000, 1'000'000'000);
      }
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto h = t.add_node("H" + std::to_string(i), NodeKind::Host);
    t.add_link(h, i, 1000, 1'000'000'000);
  }
  return t;
}

}  // namespace loader::testing
