#include "loader/replication.hpp"

#include <algorithm>
#include <bit>

#include <fmt/format.h>

#include "loader/embedding.hpp"

namespace loader {

bool UpdateTrigger::on_packet(std::int64_t t_clk) {
  switch (mode_) {
    case Mode::None:
      return false;
    case Mode::TimePeriod:
      if (t_prime_ != kNever && t_clk < t_prime_ + tau_ns_) return false;
      t_prime_ = t_clk;
      return true;
    case Mode::PacketPeriod:
      if (++pkt_count_ < p_) return false;
      pkt_count_ = 0;
      t_prime_ = t_clk;
      return true;
  }
  return false;
}

void ReplicaStore::declare_local(StateId id, const ValueKind& kind, std::uint32_t width_bits) {
  Local l;
  l.kind = kind;
  l.width_bits = width_bits;
  if (kind.kind == ValueKind::Kind::RateEstimate)
    l.estimator.emplace(static_cast<std::int64_t>(kind.delta * 1e9 + 0.5), kind.window);
  locals_[id] = std::move(l);
}

void ReplicaStore::declare_remote(StateId id, std::uint32_t origin, std::uint32_t width_bits) {
  if (origin == self_) return;
  remotes_[id][origin].width_bits = width_bits;
}

bool ReplicaStore::knows(StateId id) const { return locals_.count(id) || remotes_.count(id); }

std::vector<StateId> ReplicaStore::local_ids() const {
  std::vector<StateId> out;
  for (const auto& [id, l] : locals_) out.push_back(id);
  return out;
}

void ReplicaStore::write_local(StateId id, std::int64_t t_now, std::uint64_t increment) {
  auto& l = locals_.at(id);
  if (l.estimator)
    l.estimator->update(t_now, increment);
  else
    l.value += increment;
  ++l.writes;
}

void ReplicaStore::set_local(StateId id, std::int64_t t_now, std::uint64_t value) {
  (void)t_now;
  auto& l = locals_.at(id);
  l.value = value;
  ++l.writes;
}

std::uint64_t ReplicaStore::local_value(StateId id, std::int64_t t_now) {
  auto& l = locals_.at(id);
  if (l.estimator) return l.estimator->read(t_now);
  return l.value;
}

std::uint64_t ReplicaStore::local_writes(StateId id) const { return locals_.at(id).writes; }

ApplyResult ReplicaStore::apply_update(const UpdateHeader& header, std::int64_t origin_ts,
                                       std::uint64_t origin_writes) {
  auto it = remotes_.find(header.state_id);
  if (it == remotes_.end()) {
    if (!locals_.count(header.state_id))
      throw UnknownState(fmt::format("state {} not hosted on switch {}", header.state_id, self_));
    return {};
  }
  if (header.src_sw_id == self_) return {};
  auto slot = it->second.find(header.src_sw_id);
  if (slot == it->second.end())
    throw UnknownState(fmt::format("no slot for state {} from switch {}", header.state_id, header.src_sw_id));
  auto& s = slot->second;
  ApplyResult r{false, s.origin_ts, s.origin_writes};
  if (s.origin_ts != kNever && origin_ts <= s.origin_ts) return r;
  s.value = header.state_value;
  s.origin_ts = origin_ts;
  s.origin_writes = origin_writes;
  r.applied = true;
  return r;
}

const RemoteSlot* ReplicaStore::remote(StateId id, std::uint32_t origin) const {
  auto it = remotes_.find(id);
  if (it == remotes_.end()) return nullptr;
  auto s = it->second.find(origin);
  return s == it->second.end() ? nullptr : &s->second;
}

const std::map<std::uint32_t, RemoteSlot>* ReplicaStore::remotes(StateId id) const {
  auto it = remotes_.find(id);
  return it == remotes_.end() ? nullptr : &it->second;
}

std::uint64_t ReplicaStore::combined_value(StateId id, std::int64_t t_now, bool use_max) {
  std::uint64_t v = has_local(id) ? local_value(id, t_now) : 0;
  if (auto it = remotes_.find(id); it != remotes_.end())
    for (const auto& [origin, slot] : it->second) v = use_max ? std::max(v, slot.value) : v + slot.value;
  return v;
}

std::uint64_t ReplicaStore::register_bits() const {
  std::uint64_t bits = global_bits_;
  for (const auto& [id, l] : locals_) bits += static_cast<std::uint64_t>(l.width_bits) * l.kind.length;
  for (const auto& [id, slots] : remotes_)
    for (const auto& [origin, s] : slots) bits += s.width_bits;
  return bits;
}

std::uint64_t read_global(ReplicaStore& store, const GlobalBinding& binding, std::int64_t t_now) {
  if (binding.inputs.empty()) return 0;
  if (binding.folded) {
    const bool use_max = binding.primitive == ReductionPrimitive::Max;
    const auto total = store.combined_value(binding.inputs.front(), t_now, use_max);
    if (binding.primitive == ReductionPrimitive::Mean)
      return total >> std::countr_zero(std::bit_ceil(binding.arity));
    return total;
  }
  std::vector<std::uint64_t> values;
  values.reserve(binding.inputs.size());
  for (auto id : binding.inputs) values.push_back(store.combined_value(id, t_now));
  return apply_reduction(binding.primitive, values);
}

std::optional<UpdateMessage> maybe_trigger_update(UpdateTrigger& trigger, std::int64_t t_clk,
                                                  const std::vector<StateId>& state_ids, ReplicaStore& store,
                                                  std::uint32_t replica_id) {
  if (state_ids.empty() || !trigger.on_packet(t_clk)) return std::nullopt;
  UpdateMessage m;
  m.origin_ts = t_clk;
  for (auto id : state_ids) {
    UpdateHeader h;
    h.src_sw_id = store.self();
    h.state_id = id;
    h.replica_id = replica_id;
    h.state_value = store.local_value(id, t_clk);
    m.headers.push_back(h);
    m.origin_writes.push_back(store.local_writes(id));
  }
  for (std::size_t i = 0; i + 1 < m.headers.size(); ++i) m.headers[i].l3_protocol_type = kLoaderEthType;
  m.size_bits = update_frame_bits(m.headers.size());
  return m;
}

std::vector<int> flood_on_tree(const std::vector<int>& tree_ports, int ingress_port) {
  std::vector<int> out;
  for (int p : tree_ports)
    if (p != ingress_port) out.push_back(p);
  return out;
}

}  // namespace loader
