#include "loader/topology.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace loader {

NodeId Topology::add_node(std::string name, NodeKind kind) {
  if (find(name)) throw ValidationError(fmt::format("duplicate node {}", name));
  nodes_.push_back({std::move(name), kind});
  ports_.emplace_back();
  return static_cast<NodeId>(nodes_.size() - 1);
}

std::uint32_t Topology::add_link(NodeId a, NodeId b, std::int64_t delay_ns, std::uint64_t capacity_bps,
                                 bool uplink_from_a) {
  if (a >= nodes_.size() || b >= nodes_.size()) throw ValidationError("link endpoint out of range");
  if (a == b) throw ValidationError(fmt::format("self loop on {}", nodes_[a].name));
  if (delay_ns <= 0) throw ValidationError("link delay must be positive");
  if (capacity_bps == 0) throw ValidationError("link capacity must be positive");
  Link l{a, b, delay_ns, capacity_bps, PortClass::Internal, PortClass::Internal};
  if (nodes_[b].kind == NodeKind::Host) l.class_at_a = PortClass::External;
  if (nodes_[a].kind == NodeKind::Host) l.class_at_b = PortClass::External;
  if (uplink_from_a) {
    l.class_at_a = PortClass::Uplink;
    l.class_at_b = PortClass::Downlink;
  }
  const auto id = static_cast<std::uint32_t>(links_.size());
  links_.push_back(l);
  ports_[a].push_back({id, b, l.class_at_a});
  ports_[b].push_back({id, a, l.class_at_b});
  return id;
}

std::optional<NodeId> Topology::find(const std::string& name) const {
  for (NodeId i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].name == name) return i;
  return std::nullopt;
}

NodeId Topology::require(const std::string& name) const {
  if (auto id = find(name)) return *id;
  throw ValidationError(fmt::format("unknown node {}", name));
}

std::vector<NodeId> Topology::switches() const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].kind == NodeKind::Switch) out.push_back(i);
  return out;
}

std::vector<NodeId> Topology::hosts() const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].kind == NodeKind::Host) out.push_back(i);
  return out;
}

NodeId Topology::attached_switch(NodeId host) const {
  const auto& p = ports_.at(host);
  if (p.empty()) throw DisconnectedTopology(fmt::format("host {} has no link", nodes_[host].name));
  return p.front().peer;
}

bool Topology::has_hosts(NodeId sw) const {
  for (const auto& p : ports_.at(sw))
    if (nodes_[p.peer].kind == NodeKind::Host) return true;
  return false;
}

std::optional<int> Topology::port_towards(NodeId from, NodeId peer) const {
  const auto& ps = ports_.at(from);
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (ps[i].peer == peer) return static_cast<int>(i);
  return std::nullopt;
}

std::int64_t Topology::serialization_ns(std::uint32_t link, std::uint64_t bits) const {
  const auto cap = links_.at(link).capacity_bps;
  const auto num = static_cast<unsigned __int128>(bits) * 1'000'000'000ULL;
  return static_cast<std::int64_t>((num + cap - 1) / cap);
}

void Topology::check_connected() const {
  const auto sws = switches();
  if (sws.empty()) throw DisconnectedTopology("topology has no switches");
  for (auto h : hosts()) {
    const auto& ps = ports_[h];
    if (ps.size() != 1 || !is_switch(ps[0].peer))
      throw DisconnectedTopology(fmt::format("host {} must have exactly one link to a switch", nodes_[h].name));
  }
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<NodeId> stack{sws.front()};
  seen[sws.front()] = true;
  while (!stack.empty()) {
    const auto n = stack.back();
    stack.pop_back();
    for (const auto& p : ports_[n]) {
      if (!is_switch(p.peer) || seen[p.peer]) continue;
      seen[p.peer] = true;
      stack.push_back(p.peer);
    }
  }
  for (auto s : sws)
    if (!seen[s]) throw DisconnectedTopology(fmt::format("switch {} is unreachable", nodes_[s].name));
}

ShortestPaths shortest_paths(const Topology& topo) {
  const auto n = topo.size();
  ShortestPaths sp;
  sp.dist.assign(n, std::vector<std::int64_t>(n, kUnreachable));
  sp.next_port.assign(n, std::vector<int>(n, -1));
  const auto sws = topo.switches();
  for (auto s : sws) {
    sp.dist[s][s] = 0;
    for (const auto& p : topo.ports(s))
      if (topo.is_switch(p.peer))
        sp.dist[s][p.peer] = std::min(sp.dist[s][p.peer], topo.links()[p.link].delay_ns);
  }
  for (auto k : sws)
    for (auto i : sws) {
      if (sp.dist[i][k] == kUnreachable) continue;
      for (auto j : sws) {
        if (sp.dist[k][j] == kUnreachable) continue;
        const auto via = sp.dist[i][k] + sp.dist[k][j];
        if (via < sp.dist[i][j]) sp.dist[i][j] = via;
      }
    }
  for (auto s : sws)
    for (auto t : sws) {
      if (s == t || sp.dist[s][t] == kUnreachable) continue;
      int best = -1;
      NodeId best_peer = 0;
      const auto& ps = topo.ports(s);
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto peer = ps[i].peer;
        if (!topo.is_switch(peer) || sp.dist[peer][t] == kUnreachable) continue;
        if (topo.links()[ps[i].link].delay_ns + sp.dist[peer][t] != sp.dist[s][t]) continue;
        if (best < 0 || peer < best_peer) {
          best = static_cast<int>(i);
          best_peer = peer;
        }
      }
      sp.next_port[s][t] = best;
    }
  return sp;
}

std::vector<NodeId> ShortestPaths::path(const Topology& topo, NodeId from, NodeId to) const {
  if (dist.at(from).at(to) == kUnreachable) return {};
  std::vector<NodeId> out{from};
  while (out.back() != to) {
    const int p = next_port[out.back()][to];
    out.push_back(topo.ports(out.back())[static_cast<std::size_t>(p)].peer);
  }
  return out;
}

}  // namespace loader
