#include <gtest/gtest.h>

#include "loader/replication.hpp"
#include "support.hpp"

namespace loader {
namespace {

constexpr std::int64_t kMs = 1'000'000;

TEST(UpdateTrigger, TimePeriodCrossings) {
  auto trig = UpdateTrigger::time_period(1 * kMs);
  EXPECT_TRUE(trig.on_packet(0));
  EXPECT_FALSE(trig.on_packet(kMs / 2));
  EXPECT_TRUE(trig.on_packet(1200 * 1000));
  EXPECT_EQ(trig.t_prime(), 1200 * 1000);
}

TEST(UpdateTrigger, PacketPeriodCounts) {
  auto trig = UpdateTrigger::packet_period(3);
  std::vector<bool> fired;
  for (int i = 0; i < 5; ++i) fired.push_back(trig.on_packet(i));
  EXPECT_EQ(fired, (std::vector<bool>{false, false, true, false, false}));
  EXPECT_EQ(trig.pkt_count(), 2u);
}

TEST(UpdateTrigger, NoTrafficNoUpdates) {
  // Emission is piggybacked on data packets; with none, nothing goes out.
  ReplicaStore store(1);
  store.declare_local(0, ValueKind::counter(), 32);
  store.write_local(0, 0, 5);
  auto trig = UpdateTrigger::time_period(kMs);
  int emitted = 0;
  for (std::int64_t t : {std::int64_t{0}}) emitted += maybe_trigger_update(trig, t, {0}, store, 0).has_value();
  EXPECT_EQ(emitted, 1);
  // Ten silent seconds: no call, no emission; the next packet emits once.
  EXPECT_TRUE(maybe_trigger_update(trig, 10'000 * kMs, {0}, store, 0).has_value());
  EXPECT_FALSE(UpdateTrigger::none().on_packet(0));
}

TEST(UpdateMessage, CarriesEveryLocalState) {
  ReplicaStore store(2);
  store.declare_local(10, ValueKind::counter(), 32);
  store.declare_local(11, ValueKind::counter(), 32);
  store.write_local(10, 0, 7);
  store.write_local(11, 0, 1);
  store.write_local(11, 0, 1);
  auto trig = UpdateTrigger::packet_period(1);
  const auto m = maybe_trigger_update(trig, 5, {10, 11}, store, 3);
  ASSERT_TRUE(m);
  ASSERT_EQ(m->headers.size(), 2u);
  EXPECT_EQ(m->headers[0].state_value, 7u);
  EXPECT_EQ(m->headers[1].state_value, 2u);
  EXPECT_EQ(m->headers[0].replica_id, 3u);
  EXPECT_EQ(m->headers[0].src_sw_id, 2u);
  EXPECT_EQ(m->headers[0].l3_protocol_type, kLoaderEthType);
  EXPECT_EQ(m->origin_writes, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(m->size_bits, (18u + 2 * 26u) * 8);
}

UpdateHeader from(std::uint32_t origin, StateId id, std::uint64_t v) { return {origin, 0, id, 0, v, 0}; }

TEST(ReplicaStore, FirstWriteLands) {
  ReplicaStore store(1);
  store.declare_local(0, ValueKind::counter(), 32);
  store.declare_remote(0, 3, 32);
  const auto r = store.apply_update(from(3, 0, 42), 100);
  EXPECT_TRUE(r.applied);
  EXPECT_EQ(r.previous_origin_ts, kNever);
  EXPECT_EQ(store.remote(0, 3)->value, 42u);
  EXPECT_EQ(store.combined_value(0, 200), 42u);
}

TEST(ReplicaStore, DuplicateIsIdempotent) {
  ReplicaStore store(1);
  store.declare_remote(0, 3, 32);
  store.apply_update(from(3, 0, 42), 100);
  const auto r = store.apply_update(from(3, 0, 42), 100);
  EXPECT_FALSE(r.applied);
  EXPECT_EQ(store.remote(0, 3)->value, 42u);
  EXPECT_EQ(store.remote(0, 3)->origin_ts, 100);
}

TEST(ReplicaStore, ReorderedUpdateIgnored) {
  ReplicaStore store(1);
  store.declare_remote(0, 3, 32);
  store.apply_update(from(3, 0, 50), 5);
  EXPECT_FALSE(store.apply_update(from(3, 0, 30), 3).applied);
  EXPECT_EQ(store.remote(0, 3)->value, 50u);
}

TEST(ReplicaStore, UnknownStateThrows) {
  ReplicaStore store(1);
  EXPECT_THROW(store.apply_update(from(3, 9, 1), 1), UnknownState);
}

TEST(ReplicaStore, OwnEchoIgnored) {
  ReplicaStore store(1);
  store.declare_local(0, ValueKind::counter(), 32);
  store.write_local(0, 0, 4);
  EXPECT_FALSE(store.apply_update(from(1, 0, 99), 10).applied);
  EXPECT_EQ(store.local_value(0, 10), 4u);
}

TEST(ReadGlobal, SumAndIdentityFill) {
  ReplicaStore store(1);
  store.declare_local(0, ValueKind::scalar(), 32);
  store.declare_remote(0, 2, 32);
  store.declare_remote(0, 3, 32);
  store.set_local(0, 0, 10);
  const GlobalBinding sum{ReductionPrimitive::Sum, {0}, true, 1};
  EXPECT_EQ(read_global(store, sum, 0), 10u);
  store.apply_update(from(2, 0, 20), 1);
  store.apply_update(from(3, 0, 5), 1);
  EXPECT_EQ(read_global(store, sum, 2), 35u);
}

TEST(ReadGlobal, ArgMinTieTakesLowestIndex) {
  ReplicaStore store(1);
  for (StateId id = 0; id < 3; ++id) store.declare_local(id, ValueKind::scalar(), 16);
  store.set_local(0, 0, 7);
  store.set_local(1, 0, 3);
  store.set_local(2, 0, 3);
  EXPECT_EQ(read_global(store, {ReductionPrimitive::ArgMin, {0, 1, 2}, false, 3}, 0), 1u);
}

TEST(ReadGlobal, FoldedMeanShifts) {
  ReplicaStore store(1);
  store.declare_local(0, ValueKind::scalar(), 32);
  store.declare_remote(0, 2, 32);
  store.set_local(0, 0, 600);
  store.apply_update(from(2, 0, 200), 1);
  EXPECT_EQ(read_global(store, {ReductionPrimitive::Mean, {0}, true, 4}, 2), 200u);
}

TEST(FloodOnTree, ThreeNodeTree) {
  // Origin SW1 has one tree port; SW2 has ports 0 (to SW1) and 1 (to SW3).
  const int kLocal = -1;
  EXPECT_EQ(flood_on_tree({0}, kLocal), (std::vector<int>{0}));
  EXPECT_EQ(flood_on_tree({0, 1}, 0), (std::vector<int>{1}));
  EXPECT_TRUE(flood_on_tree({0}, 0).empty());   // leaf
}

TEST(ReplicaStore, RegisterAccounting) {
  // A(C+1) for A = 32, C = 3: one local partial, C - 1 remote copies, one global.
  ReplicaStore store(0);
  store.declare_local(0, ValueKind::rate(0.1, 8), 32);
  store.declare_remote(0, 1, 32);
  store.declare_remote(0, 2, 32);
  store.declare_global(32);
  EXPECT_EQ(store.register_bits(), 32u * 4);
}

TEST(ReplicaStoreProperty, LastWriterWinsUnderShuffles) {
  testing::Gen g(71);
  for (int c = 0; c < 500; ++c) {
    ReplicaStore store(0);
    store.declare_remote(0, 1, 32);
    const auto n = g.range(1, 20);
    std::vector<std::pair<std::int64_t, std::uint64_t>> ups;
    for (std::uint64_t i = 0; i < n; ++i) ups.push_back({static_cast<std::int64_t>(i + 1), g.next() & 0xFFFF});
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[g.range(0, i)]);
    for (auto i : order) store.apply_update(from(1, 0, ups[i].second), ups[i].first);
    for (auto i : order) store.apply_update(from(1, 0, ups[i].second), ups[i].first);   // redelivery
    EXPECT_EQ(store.remote(0, 1)->value, ups.back().second);
    EXPECT_EQ(store.remote(0, 1)->origin_ts, ups.back().first);
  }
}

}  // namespace
}  // namespace loader
