#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "loader/embedding.hpp"
#include "loader/replication.hpp"

namespace loader {

class EventQueueCorruption : public Error {
 public:
  using Error::Error;
};

inline constexpr std::int64_t kNsPerSec = 1'000'000'000;
inline std::int64_t seconds_to_ns(double s) { return static_cast<std::int64_t>(s * 1e9 + (s >= 0 ? 0.5 : -0.5)); }

struct FlowSpec {
  std::string name;
  NodeId src = 0;
  NodeId dst = 0;
  double rate_pps = 0.0;
  std::uint32_t size_bits = 512;
  std::int64_t start_ns = 0;
  std::int64_t stop_ns = 0;
  bool syn = false;
};

/// Externally injected scalar state value (e.g. server CPU load).
struct LoadSample {
  std::int64_t t_ns = 0;
  std::string target;   // state target hint
  std::uint64_t value = 0;
};

/// Everything the simulator needs, resolved from an application and a
/// topology. Built by `deploy`.
struct Deployment {
  Topology topo;
  ShortestPaths paths;
  ApplicationSpec app;
  PrimitiveProgram program;
  ReplicaPlacement placement;
  ReplicationPlan plan;
  RuleTables rules;

  /// Decomposable apps keep one partial register per replica (see README).
  bool folded = false;
  /// Writer switch of each state (non-folded apps).
  std::map<StateId, NodeId> owner;
  /// Replica set shared by the waypoint rule, in replica-id order.
  std::vector<NodeId> replicas;
};

struct DeployOptions {
  EmbeddingConfig embedding;
  double r_min = 100.0;
  TriggerMode trigger_mode = TriggerMode::TimePeriod;
};

Deployment deploy(Topology topo, const ApplicationSpec& app, const DeployOptions& options);

struct SimConfig {
  std::int64_t t_end_ns = 10 * kNsPerSec;
  std::int64_t bin_ns = kNsPerSec;
  std::uint64_t seed = 1;
  std::int64_t controller_delay_ns = 10'000'000;
  std::uint32_t queue_limit = 100;
  bool replication_enabled = true;
  bool trace = false;
};

struct LinkSeries {
  std::uint32_t link = 0;
  NodeId from = 0;
  NodeId to = 0;
  std::uint64_t capacity_bps = 0;
  std::vector<std::uint64_t> data_bits;          // per bin, by transmit start
  std::vector<std::uint64_t> replication_bits;
};

struct Detection {
  std::int64_t t_ns = 0;
  NodeId node = 0;
  std::string trigger;
};

struct Notification {
  std::int64_t sent_ns = 0;
  std::int64_t received_ns = 0;
  NodeId node = 0;
  std::string message;
};

struct StalenessRecord {
  std::uint64_t updates_applied = 0;
  std::int64_t max_age_ns = 0;           // origin-time gap just before an update lands
  std::uint64_t max_write_lag = 0;       // origin writes not yet reflected
};

struct StateSample {
  std::int64_t t_ns = 0;
  NodeId node = 0;
  std::string name;
  std::uint64_t value = 0;
};

struct MetricsLog {
  std::int64_t t_end_ns = 0;
  std::int64_t bin_ns = 0;
  std::vector<LinkSeries> links;                       // two per link (both directions)
  std::vector<Detection> detections;
  std::map<std::pair<std::string, NodeId>, std::uint64_t> drops;   // (reason, node)
  std::vector<std::string> flow_names;
  std::vector<std::vector<std::uint64_t>> flow_delivered_bits;   // [flow][bin]
  std::vector<std::uint64_t> flow_sent_packets;
  std::vector<std::uint64_t> flow_delivered_packets;
  std::map<std::tuple<NodeId, NodeId, StateId>, StalenessRecord> staleness;   // (node, origin, state)
  std::vector<StateSample> states;
  std::vector<Notification> notifications;
  std::map<NodeId, std::vector<std::int64_t>> max_gap_ns;   // per switch, per bin
  std::map<NodeId, std::uint64_t> register_bits;            // replica switches
  std::uint64_t data_sent = 0;
  std::uint64_t data_delivered = 0;
  std::uint64_t data_dropped = 0;
  std::uint64_t data_in_flight = 0;
  std::uint64_t updates_emitted = 0;
  std::uint64_t updates_applied = 0;
  std::uint64_t directed_link_repeats = 0;     // update copies crossing a directed link twice
  std::uint64_t egress_digest = 0;             // order-free hash of data forwarding decisions
  std::string trace;

  std::size_t bins() const;
};

class Simulator {
 public:
  Simulator(const Deployment& deployment, std::vector<FlowSpec> flows, std::vector<LoadSample> loads,
            SimConfig config);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  /// Processes every event with time <= t_end.
  MetricsLog run_until(std::int64_t t_end_ns);

  /// Current global value of the reduction named `name` at `node`.
  std::optional<std::uint64_t> global_value(NodeId node, const std::string& name, std::int64_t t_ns);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper: build, run to config.t_end_ns, return the log.
MetricsLog simulate(const Deployment& deployment, const std::vector<FlowSpec>& flows,
                    const std::vector<LoadSample>& loads, const SimConfig& config);

}  // namespace loader
