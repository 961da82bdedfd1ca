#include "loader/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

#include <fmt/format.h>

namespace loader {

namespace {

double weight_of(const TrafficWeights& w, NodeId n) {
  auto it = w.find(n);
  return it == w.end() ? 1.0 : it->second;
}

/// Contribution of all pairs with source `s` (ordered pairs, before halving).
std::vector<double> brandes_source(const Topology& topo, const TrafficWeights& weights,
                                   const std::vector<bool>& terminal, NodeId s) {
  const auto n = topo.size();
  std::vector<double> contrib(n, 0.0);
  std::vector<std::int64_t> dist(n, kUnreachable);
  std::vector<double> sigma(n, 0.0);
  std::vector<std::vector<NodeId>> pred(n);
  std::vector<NodeId> order;
  using Item = std::pair<std::int64_t, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[s] = 0;
  sigma[s] = 1.0;
  pq.push({0, s});
  std::vector<bool> done(n, false);
  while (!pq.empty()) {
    const auto [d, v] = pq.top();
    pq.pop();
    if (done[v] || d != dist[v]) continue;
    done[v] = true;
    order.push_back(v);
    for (const auto& p : topo.ports(v)) {
      const auto u = p.peer;
      if (!topo.is_switch(u) || done[u]) continue;
      const auto nd = d + topo.links()[p.link].delay_ns;
      if (nd < dist[u]) {
        dist[u] = nd;
        sigma[u] = sigma[v];
        pred[u].assign(1, v);
        pq.push({nd, u});
      } else if (nd == dist[u]) {
        sigma[u] += sigma[v];
        pred[u].push_back(v);
      }
    }
  }
  const double ws = weight_of(weights, s);
  std::vector<double> delta(n, 0.0);
  double reachable_weight = 0.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto w = *it;
    const double tw = (terminal[w] && w != s) ? weight_of(weights, w) : 0.0;
    const double coeff = (tw + delta[w]) / sigma[w];
    for (auto v : pred[w]) delta[v] += sigma[v] * coeff;
    if (w != s) {
      contrib[w] += ws * (delta[w] + tw);
      reachable_weight += tw;
    }
  }
  contrib[s] += ws * reachable_weight;
  return contrib;
}

std::vector<bool> terminal_mask(const Topology& topo) {
  std::vector<bool> t(topo.size(), false);
  for (auto s : topo.switches()) t[s] = topo.has_hosts(s);
  return t;
}

}  // namespace

std::vector<double> weighted_betweenness_serial(const Topology& topo, const TrafficWeights& weights) {
  topo.check_connected();
  const auto terminal = terminal_mask(topo);
  std::vector<double> score(topo.size(), 0.0);
  for (auto s : topo.switches()) {
    if (!terminal[s]) continue;
    const auto c = brandes_source(topo, weights, terminal, s);
    for (std::size_t v = 0; v < c.size(); ++v) score[v] += c[v];
  }
  for (auto& x : score) x /= 2.0;
  return score;
}

std::vector<double> weighted_betweenness(const Topology& topo, const TrafficWeights& weights) {
  topo.check_connected();
  const auto terminal = terminal_mask(topo);
  std::vector<NodeId> sources;
  for (auto s : topo.switches())
    if (terminal[s]) sources.push_back(s);
  std::vector<std::vector<double>> per_source(sources.size());
  const auto count = static_cast<std::int64_t>(sources.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i)
    per_source[static_cast<std::size_t>(i)] = brandes_source(topo, weights, terminal, sources[static_cast<std::size_t>(i)]);
  // Summed in source order so the result matches the serial kernel bit for bit.
  std::vector<double> score(topo.size(), 0.0);
  for (const auto& c : per_source)
    for (std::size_t v = 0; v < c.size(); ++v) score[v] += c[v];
  for (auto& x : score) x /= 2.0;
  return score;
}

std::optional<std::uint32_t> ReplicaPlacement::replica_id(StateId state, NodeId node) const {
  auto it = nodes.find(state);
  if (it == nodes.end()) return std::nullopt;
  auto pos = std::find(it->second.begin(), it->second.end(), node);
  if (pos == it->second.end()) return std::nullopt;
  return static_cast<std::uint32_t>(pos - it->second.begin());
}

std::vector<NodeId> ReplicaPlacement::all_nodes() const {
  std::set<NodeId> all;
  for (const auto& [id, ns] : nodes) all.insert(ns.begin(), ns.end());
  return {all.begin(), all.end()};
}

bool ReplicaPlacement::hosts(NodeId node) const {
  for (const auto& [id, ns] : nodes)
    if (std::find(ns.begin(), ns.end(), node) != ns.end()) return true;
  return false;
}

std::vector<std::vector<std::size_t>> trigger_ancestors(const PrimitiveProgram& program) {
  std::vector<std::vector<std::size_t>> out(program.actions.size());
  for (const auto& a : program.actions) {
    if (a.kind != PrimitiveAction::Kind::Trigger) continue;
    std::set<std::size_t> states;
    std::vector<Operand> stack(a.operands.begin(), a.operands.end());
    while (!stack.empty()) {
      const auto o = stack.back();
      stack.pop_back();
      if (o.kind == Operand::Kind::State) {
        states.insert(program.state_index(o.id));
      } else {
        const auto& src = program.action(o.id);
        stack.insert(stack.end(), src.operands.begin(), src.operands.end());
      }
    }
    out[a.action_id] = {states.begin(), states.end()};
  }
  return out;
}

ReplicaPlacement place_replicas(const Topology& topo, const EmbeddingConfig& config,
                                const PrimitiveProgram& program) {
  if (config.replicas == 0) throw InsufficientNodes("replica count must be at least 1");
  const auto sws = topo.switches();
  if (config.replicas > sws.size())
    throw InsufficientNodes(fmt::format("{} replicas requested but only {} switches", config.replicas, sws.size()));
  const auto score = weighted_betweenness(topo, config.traffic_weights);

  ReplicaPlacement placement;
  std::vector<NodeId> remaining = sws;   // ascending ids
  while (placement.ranked.size() < config.replicas) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < remaining.size(); ++i) {
      const double a = score[remaining[i]];
      const double b = score[remaining[best]];
      const double tol = 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
      if (a > b + tol) best = i;
    }
    placement.ranked.push_back(remaining[best]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }

  // States feeding a trigger that forbids inconsistency live on one node.
  std::vector<bool> single(program.state_ids.size(), false);
  const auto anc = trigger_ancestors(program);
  for (const auto& a : program.actions) {
    if (a.kind != PrimitiveAction::Kind::Trigger || a.inconsistency.kind != InconsistencyKind::None) continue;
    for (auto idx : anc[a.action_id]) single[idx] = true;
  }
  for (std::size_t i = 0; i < program.state_ids.size(); ++i) {
    if (single[i])
      placement.nodes[program.state_ids[i]] = {placement.ranked.front()};
    else
      placement.nodes[program.state_ids[i]] = placement.ranked;
  }
  return placement;
}

namespace {

struct Dsu {
  std::vector<std::size_t> parent;
  explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

TreeEdge make_edge(const Topology& topo, std::uint32_t link) {
  const auto& l = topo.links()[link];
  return {std::min(l.a, l.b), std::max(l.a, l.b), link};
}

}  // namespace

SteinerTree steiner_tree(const Topology& topo, const std::vector<NodeId>& terminals) {
  if (terminals.empty()) throw DisconnectedTerminals("no terminals");
  std::vector<NodeId> terms(terminals.begin(), terminals.end());
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  for (auto t : terms)
    if (t >= topo.size() || !topo.is_switch(t)) throw DisconnectedTerminals(fmt::format("terminal {} is not a switch", t));
  if (terms.size() == 1) return {};
  const auto sp = shortest_paths(topo);

  struct ClosureEdge {
    std::int64_t dist;
    NodeId a, b;
  };
  std::vector<ClosureEdge> closure;
  for (std::size_t i = 0; i < terms.size(); ++i)
    for (std::size_t j = i + 1; j < terms.size(); ++j) {
      const auto d = sp.dist[terms[i]][terms[j]];
      if (d == kUnreachable)
        throw DisconnectedTerminals(fmt::format("{} and {} are disconnected", topo.node(terms[i]).name,
                                                topo.node(terms[j]).name));
      closure.push_back({d, terms[i], terms[j]});
    }
  std::sort(closure.begin(), closure.end(),
            [](const ClosureEdge& x, const ClosureEdge& y) { return std::tie(x.dist, x.a, x.b) < std::tie(y.dist, y.a, y.b); });

  std::set<std::uint32_t> expanded;
  Dsu closure_dsu(topo.size());
  for (const auto& e : closure) {
    if (!closure_dsu.unite(e.a, e.b)) continue;
    NodeId cur = e.a;
    while (cur != e.b) {
      const auto& port = topo.ports(cur)[static_cast<std::size_t>(sp.next_port[cur][e.b])];
      expanded.insert(port.link);
      cur = port.peer;
    }
  }

  std::vector<std::uint32_t> links(expanded.begin(), expanded.end());
  std::sort(links.begin(), links.end(), [&](std::uint32_t x, std::uint32_t y) {
    const auto ex = make_edge(topo, x);
    const auto ey = make_edge(topo, y);
    return std::make_tuple(topo.links()[x].delay_ns, ex.a, ex.b, x) <
           std::make_tuple(topo.links()[y].delay_ns, ey.a, ey.b, y);
  });
  Dsu dsu(topo.size());
  std::vector<TreeEdge> tree;
  for (auto l : links) {
    const auto e = make_edge(topo, l);
    if (dsu.unite(e.a, e.b)) tree.push_back(e);
  }

  // Drop non-terminal leaves until none remain.
  const std::set<NodeId> term_set(terms.begin(), terms.end());
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<NodeId, int> degree;
    for (const auto& e : tree) {
      ++degree[e.a];
      ++degree[e.b];
    }
    auto is_prunable = [&](const TreeEdge& e) {
      return (degree[e.a] == 1 && !term_set.count(e.a)) || (degree[e.b] == 1 && !term_set.count(e.b));
    };
    const auto before = tree.size();
    tree.erase(std::remove_if(tree.begin(), tree.end(), is_prunable), tree.end());
    changed = tree.size() != before;
  }
  std::sort(tree.begin(), tree.end());
  return tree;
}

std::int64_t tree_cost(const Topology& topo, const SteinerTree& tree) {
  std::int64_t c = 0;
  for (const auto& e : tree) c += topo.links()[e.link].delay_ns;
  return c;
}

ReplicationPeriod solve_replication_period(const InconsistencySpec& spec, double worst_pair_delay, double r_min) {
  double budget = 0.0;
  switch (spec.kind) {
    case InconsistencyKind::None:
      throw InfeasibleBudget("no inconsistency tolerated; state cannot be replicated");
    case InconsistencyKind::TimeObsolescence:
      budget = spec.epsilon_t;
      break;
    case InconsistencyKind::UpdateError:
      if (spec.max_write_rate <= 0.0) throw InfeasibleBudget("max write rate must be positive");
      budget = static_cast<double>(spec.epsilon_r) / spec.max_write_rate;
      break;
  }
  if (!(r_min > 0.0)) throw InfeasibleBudget("r_min must be positive");
  if (budget <= worst_pair_delay)
    throw InfeasibleBudget(fmt::format("budget {}s does not exceed worst pair delay {}s", budget, worst_pair_delay));
  ReplicationPeriod out;
  out.d_r = budget - worst_pair_delay;
  const double gap = 1.0 / r_min;
  if (out.d_r < gap)
    throw InfeasibleBudget(fmt::format("replication period {}s is shorter than 1/r_min = {}s", out.d_r, gap));
  out.tau_r = out.d_r - gap;
  out.p = static_cast<std::uint64_t>(std::floor(out.d_r * r_min * (1.0 + 1e-12)));
  return out;
}

std::uint64_t update_frame_bits(std::size_t headers) {
  // 14 bytes Ethernet + 4 bytes FCS around 26-byte headers, padded to 64 bytes.
  return std::max<std::uint64_t>(512, (18 + 26 * static_cast<std::uint64_t>(headers)) * 8);
}

std::int64_t tree_path_delay_ns(const Topology& topo, const SteinerTree& tree, NodeId from, NodeId to) {
  if (from == to) return 0;
  std::map<NodeId, std::vector<std::pair<NodeId, std::uint32_t>>> adj;
  for (const auto& e : tree) {
    adj[e.a].push_back({e.b, e.link});
    adj[e.b].push_back({e.a, e.link});
  }
  std::map<NodeId, std::int64_t> cost{{from, 0}};
  std::vector<NodeId> stack{from};
  const auto frame = update_frame_bits(1);
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (const auto& [u, link] : adj[v]) {
      if (cost.count(u)) continue;
      cost[u] = cost[v] + topo.links()[link].delay_ns + topo.serialization_ns(link, frame);
      stack.push_back(u);
    }
  }
  auto it = cost.find(to);
  if (it == cost.end()) throw DisconnectedTerminals("nodes not joined by the tree");
  return it->second;
}

ReplicationPlan plan_replication(const Topology& topo, const ReplicaPlacement& placement,
                                 const PrimitiveProgram& program, double r_min, TriggerMode mode) {
  ReplicationPlan plan;
  plan.r_min = r_min;
  const auto all = placement.all_nodes();
  if (all.size() > 1) plan.tree = steiner_tree(topo, all);
  const auto anc = trigger_ancestors(program);
  for (std::size_t i = 0; i < program.state_ids.size(); ++i) {
    const auto id = program.state_ids[i];
    const auto& ns = placement.nodes.at(id);
    if (ns.size() < 2) continue;
    std::int64_t wpd = 0;
    for (auto a : ns)
      for (auto b : ns) wpd = std::max(wpd, tree_path_delay_ns(topo, plan.tree, a, b));
    std::optional<StatePlan> best;
    for (const auto& act : program.actions) {
      if (act.kind != PrimitiveAction::Kind::Trigger) continue;
      const auto& states = anc[act.action_id];
      if (std::find(states.begin(), states.end(), i) == states.end()) continue;
      StatePlan sp;
      sp.inconsistency = act.inconsistency;
      sp.worst_pair_delay = static_cast<double>(wpd) * 1e-9;
      sp.period = solve_replication_period(act.inconsistency, sp.worst_pair_delay, r_min);
      sp.mode = mode;
      if (!best || sp.period.d_r < best->period.d_r) best = sp;
    }
    if (best) plan.states[id] = *best;
  }
  return plan;
}

std::size_t RuleTables::replication_entries() const {
  std::size_t n = 0;
  for (const auto& r : per_node) n += r.tree_ports.size();
  return n;
}

RuleTables install_rules(const ReplicaPlacement& placement, const ReplicationPlan& plan, const Topology& topo,
                         const ShortestPaths& paths) {
  (void)placement;
  RuleTables rules;
  rules.per_node.resize(topo.size());
  for (auto s : topo.switches()) {
    auto& r = rules.per_node[s];
    r.next_port.assign(topo.size(), -1);
    for (NodeId d = 0; d < topo.size(); ++d) {
      const auto kind = topo.node(d).kind;
      if (kind == NodeKind::Switch) {
        r.next_port[d] = paths.next_port[s][d];
      } else if (kind == NodeKind::Host) {
        const auto at = topo.attached_switch(d);
        r.next_port[d] = at == s ? topo.port_towards(s, d).value_or(-1) : paths.next_port[s][at];
      }
    }
  }
  for (const auto& [id, sp] : plan.states) {
    for (const auto& e : plan.tree) {
      for (auto [node, peer] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
        const auto& ps = topo.ports(node);
        for (std::size_t i = 0; i < ps.size(); ++i)
          if (ps[i].link == e.link) rules.per_node[node].tree_ports[id].push_back(static_cast<int>(i));
      }
    }
  }
  for (auto& r : rules.per_node)
    for (auto& [id, ports] : r.tree_ports) std::sort(ports.begin(), ports.end());
  return rules;
}

}  // namespace loader
