#include <gtest/gtest.h>

#include <sstream>

#include "loader/apps.hpp"
#include "support.hpp"

namespace loader {
namespace {

constexpr std::int64_t kMs = 1'000'000;

// H1 -- SW1 -- H2 with the host-side link parameters given.
Deployment one_switch(std::int64_t delay_ns, std::uint64_t cap_bps) {
  Topology t;
  t.add_node("SW1", NodeKind::Switch);
  t.add_node("H1", NodeKind::Host);
  t.add_node("H2", NodeKind::Host);
  t.add_link(1, 0, delay_ns, cap_bps);
  // 1 ns delay and a huge capacity: the last hop costs 1 ns plus the 1 ns
  // serialization rounding floor.
  t.add_link(0, 2, 1, 1'000'000'000'000'000ull);
  DeployOptions opt;
  opt.embedding.replicas = 1;
  return deploy(t, make_ddos_app(1, 1e9, 0.01, {"SW1"}), opt);
}

FlowSpec flow(NodeId src, NodeId dst, double pps, std::uint32_t bits, std::int64_t start, std::int64_t stop,
              bool syn = false) {
  return {"f", src, dst, pps, bits, start, stop, syn};
}

std::vector<std::int64_t> times_of(const std::string& trace, const std::string& kind) {
  std::vector<std::int64_t> out;
  std::istringstream in(trace);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::int64_t t;
    std::string k;
    ls >> t >> k;
    if (k == kind) out.push_back(t);
  }
  return out;
}

TEST(Simulator, EmptyScheduleGivesEmptyLog) {
  const auto dep = one_switch(kMs, 1'000'000);
  SimConfig cfg;
  cfg.t_end_ns = 10'000 * kMs;
  const auto log = simulate(dep, {}, {}, cfg);
  EXPECT_EQ(log.data_sent, 0u);
  EXPECT_TRUE(log.detections.empty());
  EXPECT_TRUE(log.drops.empty());
  for (const auto& l : log.links)
    for (std::size_t b = 0; b < log.bins(); ++b) EXPECT_EQ(l.data_bits[b] + l.replication_bits[b], 0u);
}

TEST(Simulator, LosslessPathDeliversEveryPacket) {
  const auto dep = one_switch(kMs, 100'000'000);
  SimConfig cfg;
  cfg.t_end_ns = 2000 * kMs;
  const auto log = simulate(dep, {flow(1, 2, 100, 512, 0, 1000 * kMs)}, {}, cfg);
  EXPECT_EQ(log.flow_sent_packets[0], 100u);
  EXPECT_EQ(log.flow_delivered_packets[0], 100u);
}

TEST(Simulator, TransmitIsDelayPlusSerialization) {
  const auto dep = one_switch(kMs, 1'000'000);
  SimConfig cfg;
  cfg.t_end_ns = 100 * kMs;
  cfg.trace = true;
  const auto log = simulate(dep, {flow(1, 2, 1, 1000, 0, 1)}, {}, cfg);
  const auto sent = times_of(log.trace, "send");
  const auto got = times_of(log.trace, "deliver");
  ASSERT_EQ(sent.size(), 1u);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0] - sent[0], 2 * kMs + 2);
}

TEST(Simulator, BackToBackPacketsAreOneSerializationApart) {
  const auto dep = one_switch(kMs, 1'000'000);
  SimConfig cfg;
  cfg.t_end_ns = 100 * kMs;
  cfg.trace = true;
  const auto log = simulate(dep, {flow(1, 2, 1e6, 1000, 0, 2000)}, {}, cfg);
  const auto got = times_of(log.trace, "deliver");
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[1] - got[0], kMs);
}

TEST(Simulator, TailDropOnBurst) {
  const auto dep = one_switch(kMs, 1'000'000);
  SimConfig cfg;
  cfg.t_end_ns = 100 * kMs;
  cfg.queue_limit = 10;
  const auto log = simulate(dep, {flow(1, 2, 1e9, 512, 0, 12)}, {}, cfg);
  EXPECT_EQ(log.flow_sent_packets[0], 12u);
  EXPECT_EQ(log.data_dropped, 2u);
  EXPECT_EQ((log.drops.at({"queue", 1})), 2u);
}

TEST(Simulator, SynAtEdgeIsCounted) {
  const auto dep = one_switch(10'000, 100'000'000);
  SimConfig cfg;
  cfg.t_end_ns = 2000 * kMs;
  Simulator sim(dep, {flow(1, 2, 1000, 512, 0, 2000 * kMs, true)}, {}, cfg);
  const auto log = sim.run_until(cfg.t_end_ns);
  EXPECT_EQ(log.flow_delivered_packets[0], log.flow_sent_packets[0]);
  const auto v = sim.global_value(0, "syn_total", cfg.t_end_ns);
  ASSERT_TRUE(v);
  EXPECT_EQ(*v, 1000u);
}

ScenarioConfig fig7() { return load_scenario(testing::scenario_path("fig7_ddos_c2")); }

TEST(Simulator, ReplicationDoesNotChangeForwarding) {
  auto cfg = fig7();
  cfg.t_end = 10;
  for (std::uint32_t c : {2u, 4u}) {
    const auto dep = deploy(cfg.topo, cfg.app, cfg.deploy_options(c));
    auto sc = cfg.sim_config();
    const auto with = simulate(dep, cfg.flows, cfg.loads, sc);
    sc.replication_enabled = false;
    const auto without = simulate(dep, cfg.flows, cfg.loads, sc);
    ASSERT_EQ(with.data_dropped, 0u);
    ASSERT_EQ(without.data_dropped, 0u);
    EXPECT_GT(with.updates_emitted, 0u);
    EXPECT_EQ(without.updates_emitted, 0u);
    EXPECT_EQ(with.egress_digest, without.egress_digest);
  }
}

TEST(Simulator, ConservationAndLoopFreedom) {
  auto cfg = fig7();
  cfg.t_end = 10;
  for (std::uint32_t c : {1u, 2u, 3u, 4u}) {
    const auto log = run_single(cfg, c).log;
    EXPECT_EQ(log.data_sent, log.data_delivered + log.data_dropped + log.data_in_flight);
    EXPECT_EQ(log.directed_link_repeats, 0u);
    EXPECT_EQ(log.drops.count({"misdelivered", 0}), 0u);
  }
}

TEST(Simulator, RegisterMemoryIsAcPlusOne) {
  auto cfg = fig7();
  cfg.t_end = 1;
  for (std::uint32_t c : {1u, 2u, 4u}) {
    const auto log = run_single(cfg, c).log;
    ASSERT_EQ(log.register_bits.size(), c);
    for (const auto& [node, bits] : log.register_bits) EXPECT_EQ(bits, 32u * (c + 1)) << "C=" << c;
  }
}

TEST(Simulator, TraceIsDeterministic) {
  auto cfg = fig7();
  cfg.t_end = 3;
  cfg.trace = true;
  const auto a = run_single(cfg, 2).log;
  const auto b = run_single(cfg, 2).log;
  EXPECT_FALSE(a.trace.empty());
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.egress_digest, b.egress_digest);
}

TEST(Simulator, SingleReplicaDetoursThroughIt) {
  // With the state at SW1 only, AS3's SYN traffic to SRV3 (SW3 -> SW4) must
  // pass SW1, so SW4 -> SW1 carries data it would not carry otherwise.
  auto cfg = fig7();
  cfg.t_end = 4;
  const auto log = run_single(cfg, 1).log;
  const auto& topo = cfg.topo;
  const auto sw1 = topo.require("SW1"), sw3 = topo.require("SW3");
  std::uint64_t into_sw1 = 0;
  for (const auto& l : log.links)
    if (l.to == sw1 && topo.is_switch(l.from))
      for (auto b : l.data_bits) into_sw1 += b;
  EXPECT_GT(into_sw1, 0u);
  // Every SYN packet from AS3 enters SW1 before reaching a server.
  std::uint64_t from_sw3_to_sw4 = 0;
  for (const auto& l : log.links)
    if (l.from == sw3 && l.to == topo.require("SW4"))
      for (auto b : l.data_bits) from_sw3_to_sw4 += b;
  EXPECT_EQ(from_sw3_to_sw4, 0u);
}

TEST(Simulator, LinkClassesSumToTotal) {
  auto cfg = fig7();
  cfg.t_end = 5;
  const auto run = run_single(cfg, 4);
  const auto csv = links_csv(run.log, run.deployment->topo);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    ASSERT_EQ(f.size(), 9u);
    EXPECT_EQ(std::stoull(f[6]) + std::stoull(f[7]), std::stoull(f[8]));
  }
}

}  // namespace
}  // namespace loader
