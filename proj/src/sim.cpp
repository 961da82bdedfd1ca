#include "loader/sim.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <set>

#include <fmt/format.h>

namespace loader {

std::size_t MetricsLog::bins() const {
  if (bin_ns <= 0) return 0;
  return static_cast<std::size_t>((t_end_ns + bin_ns - 1) / bin_ns);
}

namespace {

bool foldable(const ApplicationSpec& app, const PrimitiveProgram& program, const ReplicaPlacement& placement) {
  if (app.states.empty()) return false;
  const auto& s0 = app.states.front();
  for (const auto& s : app.states) {
    if (s.value_kind.kind != ValueKind::Kind::RateEstimate && s.value_kind.kind != ValueKind::Kind::Counter)
      return false;
    if (!(s.scope == s0.scope) || !(s.value_kind == s0.value_kind) || s.measure != s0.measure ||
        s.width_bits != s0.width_bits)
      return false;
    if (s.scope.port_class != PortClass::External) return false;
  }
  const auto& n0 = placement.nodes.at(program.state_ids.front());
  for (auto id : program.state_ids)
    if (placement.nodes.at(id) != n0) return false;
  for (const auto& a : program.actions) {
    if (a.kind != PrimitiveAction::Kind::Reduce) continue;
    const bool any_state = std::any_of(a.operands.begin(), a.operands.end(),
                                       [](const Operand& o) { return o.kind == Operand::Kind::State; });
    if (!any_state) continue;
    std::set<std::uint32_t> seen;
    for (const auto& o : a.operands) {
      if (o.kind != Operand::Kind::State) return false;
      seen.insert(o.id);
    }
    if (seen.size() != program.state_ids.size() || a.operands.size() != seen.size()) return false;
    switch (a.reduce) {
      case ReductionPrimitive::Sum:
      case ReductionPrimitive::Max:
      case ReductionPrimitive::Mean:
      case ReductionPrimitive::Identity:
        break;
      default:
        return false;
    }
  }
  return true;
}

}  // namespace

Deployment deploy(Topology topo, const ApplicationSpec& app, const DeployOptions& options) {
  topo.check_connected();
  Deployment d;
  d.topo = std::move(topo);
  d.app = app;
  const auto dag = build_dag(app);
  StateIdRegistry registry;
  d.program = assign_state_ids(compile(dag, full_capabilities()), registry);
  d.placement = place_replicas(d.topo, options.embedding, d.program);
  d.plan = plan_replication(d.topo, d.placement, d.program, options.r_min, options.trigger_mode);
  d.paths = shortest_paths(d.topo);
  d.rules = install_rules(d.placement, d.plan, d.topo, d.paths);
  d.folded = foldable(d.app, d.program, d.placement);

  for (const auto& [id, ns] : d.placement.nodes)
    if (ns.size() > d.replicas.size()) d.replicas = ns;

  if (!d.folded) {
    for (std::size_t i = 0; i < d.program.state_ids.size(); ++i) {
      const auto id = d.program.state_ids[i];
      const auto& ns = d.placement.nodes.at(id);
      NodeId owner = ns.front();
      if (const auto& hint = d.app.states[i].target_hint) {
        if (auto node = d.topo.find(*hint)) {
          NodeId target = *node;
          if (d.topo.node(target).kind == NodeKind::Host) target = d.topo.attached_switch(target);
          if (std::find(ns.begin(), ns.end(), target) != ns.end()) {
            owner = target;
          } else {
            auto best = ns.front();
            for (auto n : ns)
              if (d.paths.dist[target][n] < d.paths.dist[target][best] ||
                  (d.paths.dist[target][n] == d.paths.dist[target][best] && n < best))
                best = n;
            owner = best;
          }
        }
      }
      d.owner[id] = owner;
    }
  }
  return d;
}

namespace {

enum class EventKind : std::uint8_t { FlowStart, FlowStop, HostSend, PacketArrival, ControllerNotify, LoadInjection, BinTick };

struct Event {
  std::int64_t t;
  std::uint64_t seq;
  EventKind kind;
  std::uint32_t a;
  std::int32_t b;
  std::uint32_t c;
  bool operator>(const Event& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

struct Packet {
  std::uint64_t uid = 0;
  std::uint32_t flow = 0;
  std::uint32_t seq = 0;                // k-th packet of its flow
  NodeId src = 0;
  NodeId dst = 0;
  std::uint32_t size_bits = 0;
  bool syn = false;
  bool is_update = false;
  bool from_external = false;
  bool accounted = false;
  NodeId accounted_by = 0;
  NodeId ext_ingress = 0;
  std::int64_t waypoint = -1;
  BitString wire;
  std::int64_t origin_ts = 0;
  std::vector<std::uint64_t> origin_writes;
  std::vector<std::uint32_t> visited;   // directed links an update crossed
};

struct PortQueue {
  std::int64_t busy_until = 0;
  std::deque<std::int64_t> finish;
};

struct SwitchRuntime {
  bool hosts_state = false;
  std::uint32_t replica_id = 0;
  ReplicaStore store;
  UpdateTrigger trigger = UpdateTrigger::none();
  std::vector<StateId> emit_ids;
  std::vector<int> tree_ports;
  std::vector<char> trig_prev;
  std::map<std::uint32_t, int> flow_rules;
  std::uint64_t rng = 0;
  std::int64_t last_data_arrival = kNever;
};

std::uint64_t splitmix(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform(std::uint64_t& s) { return static_cast<double>(splitmix(s) >> 11) * 0x1.0p-53; }

std::uint64_t mix3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t s = a * 0x100000001B3ULL ^ (b << 20) ^ (c << 40) ^ c;
  return splitmix(s);
}

bool flags_match(const ScopeFilter& f, const Packet& p, const Topology& topo) {
  if (f.syn_only() && !p.syn) return false;
  if (!f.dst_filter.empty() &&
      std::find(f.dst_filter.begin(), f.dst_filter.end(), topo.node(p.dst).name) == f.dst_filter.end())
    return false;
  return true;
}

}  // namespace

struct Simulator::Impl {
  const Deployment& dep;
  const Topology& topo;
  std::vector<FlowSpec> flows;
  std::vector<LoadSample> loads;
  SimConfig cfg;
  MetricsLog log;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
  std::uint64_t seq = 0;
  std::int64_t now = 0;
  std::vector<Packet> pool;
  std::vector<std::uint32_t> free_slots;
  std::vector<char> in_use;
  std::uint64_t next_uid = 0;
  std::vector<std::vector<PortQueue>> port_queues;
  std::vector<std::vector<int>> peer_port;
  std::vector<SwitchRuntime> sw;
  std::vector<char> flow_active;
  std::vector<std::string> pending_messages;
  std::vector<std::int64_t> pending_sent;
  std::vector<NodeId> pending_node;
  std::vector<std::string> trigger_inputs;
  StateId folded_id = 0;
  std::map<std::string, std::vector<std::pair<StateId, NodeId>>> load_targets;

  Impl(const Deployment& d, std::vector<FlowSpec> f, std::vector<LoadSample> l, SimConfig c)
      : dep(d), topo(d.topo), flows(std::move(f)), loads(std::move(l)), cfg(c) {
    if (cfg.bin_ns <= 0) throw Error("bin width must be positive");
    log.t_end_ns = cfg.t_end_ns;
    log.bin_ns = cfg.bin_ns;
    const auto nbins = log.bins();
    for (std::uint32_t i = 0; i < topo.links().size(); ++i) {
      const auto& l = topo.links()[i];
      log.links.push_back({i, l.a, l.b, l.capacity_bps, std::vector<std::uint64_t>(nbins), std::vector<std::uint64_t>(nbins)});
      log.links.push_back({i, l.b, l.a, l.capacity_bps, std::vector<std::uint64_t>(nbins), std::vector<std::uint64_t>(nbins)});
    }
    port_queues.resize(topo.size());
    peer_port.resize(topo.size());
    for (NodeId n = 0; n < topo.size(); ++n) {
      port_queues[n].resize(topo.ports(n).size());
      for (const auto& p : topo.ports(n)) {
        int back = -1;
        const auto& pp = topo.ports(p.peer);
        for (std::size_t j = 0; j < pp.size(); ++j)
          if (pp[j].link == p.link) back = static_cast<int>(j);
        peer_port[n].push_back(back);
      }
    }
    for (const auto& fl : flows) {
      log.flow_names.push_back(fl.name);
      if (!(fl.rate_pps > 0)) throw Error(fmt::format("flow {} has non-positive rate", fl.name));
    }
    log.flow_delivered_bits.assign(flows.size(), std::vector<std::uint64_t>(nbins));
    log.flow_sent_packets.assign(flows.size(), 0);
    log.flow_delivered_packets.assign(flows.size(), 0);
    flow_active.assign(flows.size(), 0);
    for (auto s : topo.switches()) log.max_gap_ns[s].assign(nbins, 0);
    setup_switches();
    for (std::uint32_t i = 0; i < flows.size(); ++i) {
      push(flows[i].start_ns, EventKind::FlowStart, i, 0, 0);
      push(flows[i].stop_ns, EventKind::FlowStop, i, 0, 0);
    }
    for (std::uint32_t i = 0; i < loads.size(); ++i) push(loads[i].t_ns, EventKind::LoadInjection, 0, 0, i);
    for (std::uint32_t b = 0; b <= nbins; ++b) push(static_cast<std::int64_t>(b) * cfg.bin_ns, EventKind::BinTick, b, 0, 0);
  }

  void setup_switches() {
    sw.resize(topo.size());
    const auto& prog = dep.program;
    for (NodeId n = 0; n < topo.size(); ++n) {
      sw[n].store = ReplicaStore(n);
      sw[n].rng = mix3(cfg.seed, n, 0x5EED);
      sw[n].trig_prev.assign(prog.actions.size(), 0);
    }
    std::uint32_t reduce_over_states = 0;
    std::uint32_t global_width = 0;
    for (const auto& a : prog.actions)
      if (a.kind == PrimitiveAction::Kind::Reduce) {
        ++reduce_over_states;
        for (const auto& o : a.operands)
          if (o.kind == Operand::Kind::State)
            global_width = std::max(global_width, dep.app.states[prog.state_index(o.id)].width_bits);
      }
    if (global_width == 0 && !dep.app.states.empty()) global_width = dep.app.states.front().width_bits;

    if (dep.folded) {
      folded_id = prog.state_ids.front();
      const auto& s0 = dep.app.states.front();
      for (std::size_t r = 0; r < dep.replicas.size(); ++r) {
        const auto n = dep.replicas[r];
        auto& rt = sw[n];
        rt.hosts_state = true;
        rt.replica_id = static_cast<std::uint32_t>(r);
        rt.store.declare_local(folded_id, s0.value_kind, s0.width_bits);
        for (auto o : dep.replicas) rt.store.declare_remote(folded_id, o, s0.width_bits);
        for (const auto& a : prog.actions)
          if (a.kind == PrimitiveAction::Kind::Reduce &&
              std::all_of(a.operands.begin(), a.operands.end(), [](const Operand& o) { return o.kind == Operand::Kind::State; }))
            rt.store.declare_global(s0.width_bits);
        if (dep.plan.states.count(folded_id)) rt.emit_ids.push_back(folded_id);
      }
    } else {
      for (std::size_t i = 0; i < prog.state_ids.size(); ++i) {
        const auto id = prog.state_ids[i];
        const auto& spec = dep.app.states[i];
        const auto owner = dep.owner.at(id);
        for (auto n : dep.placement.nodes.at(id)) {
          auto& rt = sw[n];
          rt.hosts_state = true;
          rt.replica_id = dep.placement.replica_id(id, n).value_or(0);
          if (n == owner) {
            rt.store.declare_local(id, spec.value_kind, spec.width_bits);
            if (dep.plan.states.count(id)) rt.emit_ids.push_back(id);
          } else {
            rt.store.declare_remote(id, owner, spec.width_bits);
          }
        }
        if (spec.target_hint) load_targets[*spec.target_hint].push_back({id, owner});
      }
      for (NodeId n = 0; n < topo.size(); ++n)
        if (sw[n].hosts_state)
          for (std::uint32_t k = 0; k < reduce_over_states; ++k) sw[n].store.declare_global(global_width);
    }

    for (auto n : topo.switches()) {
      auto& rt = sw[n];
      const auto& tp = dep.rules.per_node[n].tree_ports;
      if (!tp.empty()) rt.tree_ports = tp.begin()->second;
      if (!rt.emit_ids.empty()) {
        const StatePlan* best = nullptr;
        for (auto id : rt.emit_ids) {
          const auto& sp = dep.plan.states.at(id);
          if (!best || sp.period.d_r < best->period.d_r) best = &sp;
        }
        if (best->mode == TriggerMode::TimePeriod)
          rt.trigger = UpdateTrigger::time_period(seconds_to_ns(best->period.tau_r));
        else if (best->mode == TriggerMode::PacketPeriod)
          rt.trigger = UpdateTrigger::packet_period(std::max<std::uint64_t>(1, best->period.p));
      }
      if (rt.hosts_state) log.register_bits[n] = rt.store.register_bits();
    }

    std::set<std::string> seen;
    for (const auto& a : prog.actions)
      if (a.kind == PrimitiveAction::Kind::Trigger) {
        const auto& src = a.operands.front();
        const std::string name = src.kind == Operand::Kind::Result ? prog.action(src.id).element
                                                                   : prog.state_names[prog.state_index(src.id)];
        if (seen.insert(name).second) trigger_inputs.push_back(name);
      }
  }

  void push(std::int64_t t, EventKind k, std::uint32_t a, std::int32_t b, std::uint32_t c) {
    if (t < now) throw EventQueueCorruption(fmt::format("event at {} scheduled in the past ({})", t, now));
    queue.push({t, seq++, k, a, b, c});
  }

  std::uint32_t alloc() {
    std::uint32_t slot;
    if (!free_slots.empty()) {
      slot = free_slots.back();
      free_slots.pop_back();
      pool[slot] = Packet{};
      in_use[slot] = 1;
    } else {
      slot = static_cast<std::uint32_t>(pool.size());
      pool.emplace_back();
      in_use.push_back(1);
    }
    pool[slot].uid = next_uid++;
    return slot;
  }

  void release(std::uint32_t slot) {
    in_use[slot] = 0;
    pool[slot].wire = {};
    pool[slot].visited.clear();
    free_slots.push_back(slot);
  }

  void trace(const char* kind, NodeId node, const std::string& detail) {
    if (!cfg.trace) return;
    log.trace += fmt::format("{} {} {} {}\n", now, kind, topo.node(node).name, detail);
  }

  void drop(std::uint32_t slot, NodeId node, const char* reason) {
    ++log.drops[{reason, node}];
    if (!pool[slot].is_update) ++log.data_dropped;
    trace("drop", node, fmt::format("uid={} reason={}", pool[slot].uid, reason));
    release(slot);
  }

  void transmit(NodeId node, int port, std::uint32_t slot) {
    auto& pkt = pool[slot];
    const auto& p = topo.ports(node)[static_cast<std::size_t>(port)];
    const auto& link = topo.links()[p.link];
    const std::uint32_t dir = node == link.a ? 0 : 1;
    auto& q = port_queues[node][static_cast<std::size_t>(port)];
    while (!q.finish.empty() && q.finish.front() <= now) q.finish.pop_front();
    if (q.finish.size() >= cfg.queue_limit) {
      drop(slot, node, "queue");
      return;
    }
    if (pkt.is_update) {
      const std::uint32_t key = p.link * 2 + dir;
      if (std::find(pkt.visited.begin(), pkt.visited.end(), key) != pkt.visited.end()) ++log.directed_link_repeats;
      pkt.visited.push_back(key);
    }
    const std::int64_t start = std::max(now, q.busy_until);
    const std::int64_t finish = start + topo.serialization_ns(p.link, pkt.size_bits);
    q.busy_until = finish;
    q.finish.push_back(finish);
    const auto bin = static_cast<std::size_t>(start / cfg.bin_ns);
    auto& series = log.links[p.link * 2 + dir];
    if (bin < series.data_bits.size()) (pkt.is_update ? series.replication_bits : series.data_bits)[bin] += pkt.size_bits;
    const auto arrival = finish + link.delay_ns;
    if (arrival <= cfg.t_end_ns) push(arrival, EventKind::PacketArrival, p.peer, peer_port[node][static_cast<std::size_t>(port)], slot);
  }

  std::vector<ActionOutcome> evaluate_at(NodeId n, std::int64_t t) {
    auto& rt = sw[n];
    const auto& prog = dep.program;
    std::vector<std::uint64_t> values(prog.state_ids.size(), 0);
    std::map<std::uint32_t, std::uint64_t> prefill;
    if (dep.folded) {
      for (const auto& a : prog.actions) {
        if (a.kind != PrimitiveAction::Kind::Reduce) continue;
        if (!std::all_of(a.operands.begin(), a.operands.end(), [](const Operand& o) { return o.kind == Operand::Kind::State; }))
          continue;
        GlobalBinding b{a.reduce, {folded_id}, true, static_cast<std::uint32_t>(a.operands.size())};
        prefill[a.action_id] = read_global(rt.store, b, t);
      }
    } else {
      for (std::size_t i = 0; i < prog.state_ids.size(); ++i)
        if (rt.store.knows(prog.state_ids[i])) values[i] = rt.store.combined_value(prog.state_ids[i], t);
    }
    return evaluate(prog, values, prefill);
  }

  bool monitored(const Packet& p) const {
    return !dep.app.states.empty() && flags_match(dep.app.states.front().scope, p, topo);
  }

  std::uint64_t measure(const StateSpec& s, const Packet& p) const {
    return s.measure == Measure::Bits ? p.size_bits : 1;
  }

  void on_data_at_switch(NodeId s, int in_port, std::uint32_t slot) {
    auto& rt = sw[s];
    const auto& prog = dep.program;
    {
      auto& pkt = pool[slot];
      const auto bin = static_cast<std::size_t>(now / cfg.bin_ns);
      if (rt.last_data_arrival != kNever && bin < log.max_gap_ns[s].size())
        log.max_gap_ns[s][bin] = std::max(log.max_gap_ns[s][bin], now - rt.last_data_arrival);
      rt.last_data_arrival = now;

      const bool from_host = topo.ports(s)[static_cast<std::size_t>(in_port)].port_class == PortClass::External;
      if (from_host) {
        pkt.from_external = true;
        pkt.ext_ingress = s;
        if (dep.folded && monitored(pkt) && !dep.replicas.empty()) {
          const auto dst_sw = topo.attached_switch(pkt.dst);
          NodeId best = dep.replicas.front();
          std::int64_t best_cost = kUnreachable;
          for (auto r : dep.replicas) {
            const auto c = dep.paths.dist[s][r] + dep.paths.dist[r][dst_sw];
            if (c < best_cost || (c == best_cost && r < best)) {
              best = r;
              best_cost = c;
            }
          }
          if (best != s) pkt.waypoint = best;
        }
      }

      // Ingress-scoped writes.
      if (rt.hosts_state) {
        if (dep.folded) {
          if (pkt.from_external && !pkt.accounted && monitored(pkt)) {
            pkt.accounted = true;
            pkt.accounted_by = s;
            rt.store.write_local(folded_id, now, measure(dep.app.states.front(), pkt));
          }
        } else {
          for (std::size_t i = 0; i < prog.state_ids.size(); ++i) {
            const auto id = prog.state_ids[i];
            if (!rt.store.has_local(id)) continue;
            const auto& st = dep.app.states[i];
            if (st.value_kind.kind == ValueKind::Kind::Scalar || st.value_kind.kind == ValueKind::Kind::ScalarArray) continue;
            const auto pc = st.scope.port_class;
            const bool ok = pc == PortClass::Any || (pc == PortClass::External && from_host) ||
                            (pc == PortClass::Internal && !from_host);
            if (ok && flags_match(st.scope, pkt, topo)) rt.store.write_local(id, now, measure(st, pkt));
          }
        }
      }
    }

    // Triggers and activities.
    if (rt.hosts_state) {
      const auto out = evaluate_at(s, now);
      std::vector<char> fired(prog.actions.size(), 0);
      for (const auto& a : prog.actions) {
        if (a.kind != PrimitiveAction::Kind::Trigger) continue;
        const auto& o = out[a.action_id];
        if (a.predicate.kind == Predicate::Kind::Probabilistic)
          fired[a.action_id] = o.probability > 0.0 && uniform(rt.rng) < o.probability;
        else
          fired[a.action_id] = o.fired;
      }
      for (const auto& a : prog.actions) {
        if (a.kind != PrimitiveAction::Kind::Act) continue;
        const auto trig = a.operands.front().id;
        const bool now_fired = fired[trig];
        const bool rising = now_fired && !rt.trig_prev[trig];
        if (a.act.kind == ActivityAction::Kind::NotifyController && rising) {
          log.detections.push_back({now, s, prog.action(trig).element});
          pending_messages.push_back(a.act.message);
          pending_sent.push_back(now);
          pending_node.push_back(s);
          push(now + cfg.controller_delay_ns, EventKind::ControllerNotify, s, 0,
               static_cast<std::uint32_t>(pending_messages.size() - 1));
          trace("notify", s, a.act.message);
        }
        if (!now_fired) continue;
        auto& pkt = pool[slot];
        if (!flags_match(a.scope, pkt, topo)) continue;
        switch (a.act.kind) {
          case ActivityAction::Kind::NotifyController:
            break;
          case ActivityAction::Kind::DropPacket: {
            const bool here = dep.folded ? (pkt.accounted && pkt.accounted_by == s)
                                         : (pkt.from_external && pkt.ext_ingress == s);
            if (a.scope.port_class == PortClass::External && !here) break;
            record_trigger_state(rt, fired);
            drop(slot, s, "activity");
            maybe_update(s);
            return;
          }
          case ActivityAction::Kind::SetEgress: {
            if (!(pkt.from_external && pkt.ext_ingress == s)) break;
            const std::int64_t v = a.act.constant ? *a.act.constant : static_cast<std::int64_t>(out[a.operands[1].id].value);
            if (v == kControllerPort) {
              record_trigger_state(rt, fired);
              drop(slot, s, "to_controller");
              maybe_update(s);
              return;
            }
            if (auto host = egress_target(a, v)) pkt.dst = *host;
            break;
          }
          case ActivityAction::Kind::InsertFlowRule: {
            if (!(pkt.from_external && pkt.ext_ingress == s) || rt.flow_rules.count(pkt.flow)) break;
            const auto v = out[a.operands[1].id].value;
            std::uint64_t k = 0;
            const auto& ps = topo.ports(s);
            for (std::size_t i = 0; i < ps.size(); ++i)
              if (ps[i].port_class == PortClass::Uplink && k++ == v) rt.flow_rules[pkt.flow] = static_cast<int>(i);
            break;
          }
        }
      }
      record_trigger_state(rt, fired);
    }

    // Forwarding.
    auto& pkt = pool[slot];
    int port = -1;
    if (auto it = rt.flow_rules.find(pkt.flow); it != rt.flow_rules.end() && pkt.from_external) {
      port = it->second;
    } else {
      if (pkt.waypoint == static_cast<std::int64_t>(s)) pkt.waypoint = -1;
      const NodeId target = pkt.waypoint >= 0 ? static_cast<NodeId>(pkt.waypoint) : pkt.dst;
      port = dep.rules.per_node[s].next_port[target];
    }
    if (port < 0) {
      drop(slot, s, "no_route");
      maybe_update(s);
      return;
    }
    // Keyed by (flow, seq): update packets draw uids too, so uids differ with replication on.
    log.egress_digest += mix3((std::uint64_t{pkt.flow} << 32) | pkt.seq, s, static_cast<std::uint64_t>(port));

    // Egress-scoped writes.
    if (rt.hosts_state && !dep.folded) {
      const auto& eport = topo.ports(s)[static_cast<std::size_t>(port)];
      for (std::size_t i = 0; i < prog.state_ids.size(); ++i) {
        const auto id = prog.state_ids[i];
        if (!rt.store.has_local(id)) continue;
        const auto& st = dep.app.states[i];
        const auto pc = st.scope.port_class;
        if (pc != PortClass::Uplink && pc != PortClass::Downlink) continue;
        if (eport.port_class != pc || !flags_match(st.scope, pkt, topo)) continue;
        if (st.scope.port) {
          std::uint32_t idx = 0;
          const auto& ps = topo.ports(s);
          for (int j = 0; j < port; ++j)
            if (ps[static_cast<std::size_t>(j)].port_class == pc) ++idx;
          if (idx != *st.scope.port) continue;
        }
        rt.store.write_local(id, now, measure(st, pkt));
      }
    }
    transmit(s, port, slot);
    maybe_update(s);
  }

  std::optional<NodeId> egress_target(const PrimitiveAction& act, std::int64_t v) {
    if (act.operands.size() < 2 || v < 0) return std::nullopt;
    const auto& src = act.operands[1];
    if (src.kind != Operand::Kind::Result) return std::nullopt;
    const auto& red = dep.program.action(src.id);
    if (static_cast<std::size_t>(v) >= red.operands.size()) return std::nullopt;
    const auto& o = red.operands[static_cast<std::size_t>(v)];
    if (o.kind != Operand::Kind::State) return std::nullopt;
    const auto& hint = dep.app.states[dep.program.state_index(o.id)].target_hint;
    if (!hint) return std::nullopt;
    auto node = topo.find(*hint);
    if (!node || topo.node(*node).kind != NodeKind::Host) return std::nullopt;
    return node;
  }

  static void record_trigger_state(SwitchRuntime& rt, const std::vector<char>& fired) {
    for (std::size_t i = 0; i < fired.size(); ++i) rt.trig_prev[i] = fired[i];
  }

  void maybe_update(NodeId s) {
    auto& rt = sw[s];
    if (!cfg.replication_enabled || rt.emit_ids.empty() || rt.tree_ports.empty()) return;
    auto msg = maybe_trigger_update(rt.trigger, now, rt.emit_ids, rt.store, rt.replica_id);
    if (!msg) return;
    ++log.updates_emitted;
    trace("update", s, fmt::format("headers={}", msg->headers.size()));
    for (int port : rt.tree_ports) {
      const auto slot = alloc();
      auto& pkt = pool[slot];
      pkt.is_update = true;
      pkt.src = s;
      pkt.size_bits = static_cast<std::uint32_t>(msg->size_bits);
      pkt.wire = encode_update(msg->headers, 0);
      pkt.origin_ts = msg->origin_ts;
      pkt.origin_writes = msg->origin_writes;
      transmit(s, port, slot);
    }
  }

  void on_update_at_switch(NodeId s, int in_port, std::uint32_t slot) {
    auto& rt = sw[s];
    DecodedUpdate dec;
    try {
      dec = decode_update(pool[slot].wire);
    } catch (const TruncatedHeader&) {
      drop(slot, s, "malformed");
      return;
    }
    for (std::size_t i = 0; i < dec.headers.size(); ++i) {
      const auto& h = dec.headers[i];
      if (!rt.store.knows(h.state_id)) {
        if (rt.hosts_state) ++log.drops[{"unknown_state", s}];
        continue;
      }
      const auto writes = i < pool[slot].origin_writes.size() ? pool[slot].origin_writes[i] : 0;
      const auto r = rt.store.apply_update(h, pool[slot].origin_ts, writes);
      if (!r.applied) continue;
      ++log.updates_applied;
      auto& rec = log.staleness[{s, h.src_sw_id, h.state_id}];
      ++rec.updates_applied;
      if (r.previous_origin_ts != kNever) {
        rec.max_age_ns = std::max(rec.max_age_ns, now - r.previous_origin_ts);
        auto& origin = sw[h.src_sw_id].store;
        if (origin.has_local(h.state_id)) {
          const auto cur = origin.local_writes(h.state_id);
          rec.max_write_lag = std::max(rec.max_write_lag, cur - std::min(cur, r.previous_writes));
        }
      }
    }
    const auto ports = flood_on_tree(rt.tree_ports, in_port);
    for (int port : ports) {
      const auto copy = alloc();
      const auto uid = pool[copy].uid;
      pool[copy] = pool[slot];
      pool[copy].uid = uid;
      transmit(s, port, copy);
    }
    release(slot);
  }

  void on_arrival(NodeId n, int in_port, std::uint32_t slot) {
    if (!in_use[slot]) throw EventQueueCorruption("arrival for a released packet");
    const auto kind = topo.node(n).kind;
    if (kind == NodeKind::Host) {
      auto& pkt = pool[slot];
      if (pkt.is_update || pkt.dst != n) {
        drop(slot, n, "misdelivered");
        return;
      }
      const auto bin = static_cast<std::size_t>(now / cfg.bin_ns);
      if (bin < log.flow_delivered_bits[pkt.flow].size()) log.flow_delivered_bits[pkt.flow][bin] += pkt.size_bits;
      ++log.flow_delivered_packets[pkt.flow];
      ++log.data_delivered;
      trace("deliver", n, fmt::format("uid={} flow={}", pkt.uid, flows[pkt.flow].name));
      release(slot);
      return;
    }
    if (pool[slot].is_update)
      on_update_at_switch(n, in_port, slot);
    else
      on_data_at_switch(n, in_port, slot);
  }

  void on_host_send(std::uint32_t f, std::uint32_t k) {
    const auto& fl = flows[f];
    if (!flow_active[f] || now >= fl.stop_ns) return;
    const auto slot = alloc();
    auto& pkt = pool[slot];
    pkt.flow = f;
    pkt.seq = k;
    pkt.src = fl.src;
    pkt.dst = fl.dst;
    pkt.size_bits = std::max<std::uint32_t>(512, fl.size_bits);
    pkt.syn = fl.syn;
    ++log.flow_sent_packets[f];
    ++log.data_sent;
    trace("send", fl.src, fmt::format("uid={} flow={}", pkt.uid, fl.name));
    transmit(fl.src, 0, slot);
    const auto next = fl.start_ns + static_cast<std::int64_t>(static_cast<double>(k + 1) * 1e9 / fl.rate_pps + 0.5);
    if (next < fl.stop_ns && next <= cfg.t_end_ns) push(next, EventKind::HostSend, f, 0, k + 1);
  }

  void on_bin_tick(std::uint32_t b) {
    for (auto n : dep.replicas) {
      if (!sw[n].hosts_state) continue;
      const auto out = evaluate_at(n, now);
      for (const auto& name : trigger_inputs) {
        std::uint64_t v = 0;
        if (auto id = dep.program.action_for(name)) v = out[*id].value;
        else v = sw[n].store.combined_value(dep.program.state_ids[0], now);
        log.states.push_back({now, n, name, v});
      }
    }
    (void)b;
  }

  void on_load(std::uint32_t i) {
    const auto& l = loads[i];
    auto it = load_targets.find(l.target);
    if (it == load_targets.end()) return;
    // A load report is a packet reaching the owner switch, so it may carry an update.
    for (const auto& [id, owner] : it->second)
      if (sw[owner].store.has_local(id)) {
        sw[owner].store.set_local(id, now, l.value);
        maybe_update(owner);
      }
  }

  MetricsLog run(std::int64_t t_end) {
    while (!queue.empty() && queue.top().t <= t_end) {
      const auto ev = queue.top();
      queue.pop();
      if (ev.t < now) throw EventQueueCorruption("time went backwards");
      now = ev.t;
      switch (ev.kind) {
        case EventKind::FlowStart:
          flow_active[ev.a] = 1;
          if (flows[ev.a].start_ns < flows[ev.a].stop_ns) on_host_send(ev.a, 0);
          break;
        case EventKind::FlowStop:
          flow_active[ev.a] = 0;
          break;
        case EventKind::HostSend:
          on_host_send(ev.a, ev.c);
          break;
        case EventKind::PacketArrival:
          on_arrival(ev.a, ev.b, ev.c);
          break;
        case EventKind::ControllerNotify:
          log.notifications.push_back({pending_sent[ev.c], now, pending_node[ev.c], pending_messages[ev.c]});
          break;
        case EventKind::LoadInjection:
          on_load(ev.c);
          break;
        case EventKind::BinTick:
          on_bin_tick(ev.a);
          break;
      }
    }
    log.data_in_flight = 0;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (in_use[i] && !pool[i].is_update) ++log.data_in_flight;
    return log;
  }
};

Simulator::Simulator(const Deployment& deployment, std::vector<FlowSpec> flows, std::vector<LoadSample> loads,
                     SimConfig config)
    : impl_(std::make_unique<Impl>(deployment, std::move(flows), std::move(loads), config)) {}

Simulator::~Simulator() = default;

MetricsLog Simulator::run_until(std::int64_t t_end_ns) { return impl_->run(t_end_ns); }

std::optional<std::uint64_t> Simulator::global_value(NodeId node, const std::string& name, std::int64_t t_ns) {
  if (node >= impl_->sw.size() || !impl_->sw[node].hosts_state) return std::nullopt;
  auto id = impl_->dep.program.action_for(name);
  if (!id) return std::nullopt;
  return impl_->evaluate_at(node, t_ns)[*id].value;
}

MetricsLog simulate(const Deployment& deployment, const std::vector<FlowSpec>& flows,
                    const std::vector<LoadSample>& loads, const SimConfig& config) {
  Simulator sim(deployment, flows, loads, config);
  return sim.run_until(config.t_end_ns);
}

}  // namespace loader
