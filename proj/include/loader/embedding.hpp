#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "loader/compiler.hpp"
#include "loader/topology.hpp"

namespace loader {

class DisconnectedTerminals : public Error {
 public:
  using Error::Error;
};
class InsufficientNodes : public Error {
 public:
  using Error::Error;
};
class InfeasibleBudget : public Error {
 public:
  using Error::Error;
};

/// Offered load per switch; switches absent from the map weigh 1.
using TrafficWeights = std::map<NodeId, double>;

/// Betweenness over delay-shortest paths between host-attached switches.
/// Each unordered pair (s, t) contributes w(s)*w(t), split evenly over its
/// shortest paths, to every switch on the path including both endpoints.
/// Indexed by node id; non-switches score 0.
std::vector<double> weighted_betweenness(const Topology& topo, const TrafficWeights& weights);
/// Serial reference for the OpenMP kernel above. Results are bit-identical.
std::vector<double> weighted_betweenness_serial(const Topology& topo, const TrafficWeights& weights);

struct EmbeddingConfig {
  std::uint32_t replicas = 1;
  TrafficWeights traffic_weights;
};

struct ReplicaPlacement {
  /// Top-C switches by centrality; position = replica id.
  std::vector<NodeId> ranked;
  /// N_i per state id, in replica-id order.
  std::map<StateId, std::vector<NodeId>> nodes;

  std::optional<std::uint32_t> replica_id(StateId state, NodeId node) const;
  /// Union of all N_i, ascending.
  std::vector<NodeId> all_nodes() const;
  bool hosts(NodeId node) const;
};

ReplicaPlacement place_replicas(const Topology& topo, const EmbeddingConfig& config,
                                const PrimitiveProgram& program);

struct TreeEdge {
  NodeId a = 0;   // a < b
  NodeId b = 0;
  std::uint32_t link = 0;
  bool operator==(const TreeEdge&) const = default;
  auto operator<=>(const TreeEdge&) const = default;
};
using SteinerTree = std::vector<TreeEdge>;

/// Metric-closure MST heuristic, sorted edge list. Ties go to lower ids.
SteinerTree steiner_tree(const Topology& topo, const std::vector<NodeId>& terminals);
std::int64_t tree_cost(const Topology& topo, const SteinerTree& tree);

enum class TriggerMode { None, TimePeriod, PacketPeriod };

struct ReplicationPeriod {
  double d_r = 0.0;       // seconds
  double tau_r = 0.0;     // seconds
  std::uint64_t p = 0;    // packets
};

/// Solves the inconsistency budget at equality. Throws InfeasibleBudget when
/// the budget does not cover the delay or when d_r < 1/r_min.
ReplicationPeriod solve_replication_period(const InconsistencySpec& spec, double worst_pair_delay,
                                           double r_min);

struct StatePlan {
  InconsistencySpec inconsistency;
  double worst_pair_delay = 0.0;
  ReplicationPeriod period;
  TriggerMode mode = TriggerMode::None;
};

struct ReplicationPlan {
  SteinerTree tree;
  double r_min = 0.0;
  std::map<StateId, StatePlan> states;   // replicated states only
};

/// Minimum update frame on the wire for k nested headers (bits).
std::uint64_t update_frame_bits(std::size_t headers);

/// Delay between two tree nodes along the tree: propagation plus
/// serialization of a one-header update frame per hop.
std::int64_t tree_path_delay_ns(const Topology& topo, const SteinerTree& tree, NodeId from, NodeId to);

ReplicationPlan plan_replication(const Topology& topo, const ReplicaPlacement& placement,
                                 const PrimitiveProgram& program, double r_min, TriggerMode mode);

struct SwitchRules {
  std::map<StateId, std::vector<int>> tree_ports;   // replication PortList
  std::vector<int> next_port;                       // by destination node id, -1 = none
};

struct RuleTables {
  std::vector<SwitchRules> per_node;
  std::size_t replication_entries() const;
};

RuleTables install_rules(const ReplicaPlacement& placement, const ReplicationPlan& plan, const Topology& topo,
                         const ShortestPaths& paths);

/// Trigger-ancestor states of each trigger action, by local state index.
std::vector<std::vector<std::size_t>> trigger_ancestors(const PrimitiveProgram& program);

}  // namespace loader
