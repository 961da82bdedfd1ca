#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "loader/app_model.hpp"

namespace loader {

using NodeId = std::uint32_t;

enum class NodeKind { Switch, Host, Controller };

class DisconnectedTopology : public Error {
 public:
  using Error::Error;
};

struct Node {
  std::string name;
  NodeKind kind = NodeKind::Switch;
};

struct Link {
  NodeId a = 0;
  NodeId b = 0;
  std::int64_t delay_ns = 0;
  std::uint64_t capacity_bps = 0;
  PortClass class_at_a = PortClass::Internal;
  PortClass class_at_b = PortClass::Internal;
};

struct Port {
  std::uint32_t link = 0;
  NodeId peer = 0;
  PortClass port_class = PortClass::Internal;
};

/// Network graph. Node ids are dense in insertion order; ports are numbered
/// per node in link insertion order.
class Topology {
 public:
  NodeId add_node(std::string name, NodeKind kind);
  /// `uplink_from_a` tags the a-side port Uplink and the b-side Downlink.
  std::uint32_t add_link(NodeId a, NodeId b, std::int64_t delay_ns, std::uint64_t capacity_bps,
                         bool uplink_from_a = false);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<Port>& ports(NodeId id) const { return ports_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  std::optional<NodeId> find(const std::string& name) const;
  NodeId require(const std::string& name) const;
  bool is_switch(NodeId id) const { return nodes_.at(id).kind == NodeKind::Switch; }
  std::vector<NodeId> switches() const;
  std::vector<NodeId> hosts() const;

  /// Switch a host hangs off (its first port).
  NodeId attached_switch(NodeId host) const;
  bool has_hosts(NodeId sw) const;
  std::optional<int> port_towards(NodeId from, NodeId peer) const;

  /// Serialization time of `bits` on link `link`, rounded up to whole ns.
  std::int64_t serialization_ns(std::uint32_t link, std::uint64_t bits) const;

  /// Throws DisconnectedTopology unless the switch subgraph is connected and
  /// every host has exactly one link to a switch.
  void check_connected() const;

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<std::vector<Port>> ports_;
};

inline constexpr std::int64_t kUnreachable = std::numeric_limits<std::int64_t>::max();

/// All-pairs delay-shortest paths over the switch subgraph. Next hops pick
/// the lowest-id neighbour among equal-cost options.
struct ShortestPaths {
  std::vector<std::vector<std::int64_t>> dist;   // [from][to], switches only
  std::vector<std::vector<int>> next_port;       // port index at `from`, -1 if none

  std::vector<NodeId> path(const Topology& topo, NodeId from, NodeId to) const;
};

ShortestPaths shortest_paths(const Topology& topo);

}  // namespace loader
