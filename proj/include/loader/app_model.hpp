#pragma once

// Application model: states, reductions, triggers, activities and the
// element DAG built from them.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace loader {

/// Widest state value a switch register can hold (bits).
inline constexpr std::uint32_t kStateMaxWidth = 64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

enum class InconsistencyKind { None, TimeObsolescence, UpdateError };

/// Tolerated divergence between replicas, attached to a trigger.
struct InconsistencySpec {
  InconsistencyKind kind = InconsistencyKind::None;
  double epsilon_t = 0.0;          // seconds, TimeObsolescence only
  std::uint64_t epsilon_r = 0;     // writes, UpdateError only
  double max_write_rate = 0.0;     // writes/second, UpdateError only

  static InconsistencySpec none() { return {}; }
  static InconsistencySpec time_obsolescence(double seconds) {
    return {InconsistencyKind::TimeObsolescence, seconds, 0, 0.0};
  }
  static InconsistencySpec update_error(std::uint64_t writes, double max_rate) {
    return {InconsistencyKind::UpdateError, 0.0, writes, max_rate};
  }
  bool operator==(const InconsistencySpec&) const = default;
};

enum class PortClass { Any, External, Internal, Uplink, Downlink };
enum class FlagFilter { Any, SynOnly };

/// Which packets feed a state or are targeted by an activity.
/// External matches on the port a packet entered the network through;
/// Uplink/Downlink match on the egress port of the hosting switch.
struct ScopeFilter {
  PortClass port_class = PortClass::Any;
  std::optional<FlagFilter> l4_flag_filter;
  std::vector<std::string> dst_filter;     // empty = any destination
  std::optional<std::uint32_t> port;       // index among ports of port_class

  bool syn_only() const {
    return l4_flag_filter && *l4_flag_filter == FlagFilter::SynOnly;
  }
  bool operator==(const ScopeFilter&) const = default;
};

enum class Measure { Packets, Bits };

struct ValueKind {
  enum class Kind { Counter, RateEstimate, Scalar, ScalarArray };
  Kind kind = Kind::Counter;
  std::uint32_t length = 1;          // ScalarArray
  double delta = 0.1;                // RateEstimate sampling window (s)
  std::uint32_t window = 8;          // RateEstimate buffer length w

  static ValueKind counter() { return {Kind::Counter, 1, 0.1, 8}; }
  static ValueKind rate(double delta, std::uint32_t window) {
    return {Kind::RateEstimate, 1, delta, window};
  }
  static ValueKind scalar() { return {Kind::Scalar, 1, 0.1, 8}; }
  static ValueKind array(std::uint32_t n) { return {Kind::ScalarArray, n, 0.1, 8}; }
  bool operator==(const ValueKind&) const = default;
};

struct StateSpec {
  std::string name;
  ScopeFilter scope;
  ValueKind value_kind;
  Measure measure = Measure::Packets;
  std::uint32_t width_bits = 32;
  std::optional<std::string> target_hint;
  bool operator==(const StateSpec&) const = default;
};

enum class ReductionPrimitive { Sum, Mean, ArgMin, ArgMax, Max, MinMaxArgMin, Identity };

struct ReductionSpec {
  std::vector<std::string> inputs;
  ReductionPrimitive primitive = ReductionPrimitive::Sum;
  std::string output_name;
  bool operator==(const ReductionSpec&) const = default;
};

/// Closed set of probability formulas a Probabilistic trigger may carry.
struct DropFormula {
  /// p = max(0, (s - target) / s), clamped below 1.
  double excess_target = 0.0;
  double probability(double reduced) const;
  bool operator==(const DropFormula&) const = default;
};

struct Predicate {
  enum class Kind { GreaterThan, LessOrEqual, Probabilistic, Always };
  Kind kind = Kind::Always;
  double threshold = 0.0;
  std::optional<DropFormula> formula;

  static Predicate greater_than(double t) { return {Kind::GreaterThan, t, {}}; }
  static Predicate less_or_equal(double t) { return {Kind::LessOrEqual, t, {}}; }
  static Predicate probabilistic(DropFormula f) { return {Kind::Probabilistic, 0.0, f}; }
  static Predicate always() { return {Kind::Always, 0.0, {}}; }
  bool operator==(const Predicate&) const = default;
};

struct TriggerSpec {
  std::string name;
  std::string input;
  Predicate predicate;
  InconsistencySpec inconsistency;
  std::string activity;
  bool operator==(const TriggerSpec&) const = default;
};

/// Egress port value meaning "send to the controller".
inline constexpr std::int64_t kControllerPort = -1;

struct ActivityAction {
  enum class Kind { NotifyController, DropPacket, SetEgress, InsertFlowRule };
  Kind kind = Kind::NotifyController;
  std::string message;                  // NotifyController
  std::string source_state;             // SetEgress / InsertFlowRule: reduced state
  std::optional<std::int64_t> constant; // SetEgress: constant port

  static ActivityAction notify(std::string msg) { return {Kind::NotifyController, std::move(msg), {}, {}}; }
  static ActivityAction drop() { return {Kind::DropPacket, {}, {}, {}}; }
  static ActivityAction set_egress_from(std::string reduced) {
    return {Kind::SetEgress, {}, std::move(reduced), {}};
  }
  static ActivityAction set_egress_constant(std::int64_t port) { return {Kind::SetEgress, {}, {}, port}; }
  static ActivityAction insert_flow_rule(std::string reduced) {
    return {Kind::InsertFlowRule, {}, std::move(reduced), {}};
  }
  bool operator==(const ActivityAction&) const = default;
};

struct ActivitySpec {
  std::string name;
  ScopeFilter target_class;
  ActivityAction action;
  std::optional<std::uint32_t> sequential_group;
  bool operator==(const ActivitySpec&) const = default;
};

struct ApplicationSpec {
  std::string name;
  std::vector<StateSpec> states;
  std::vector<ReductionSpec> reductions;
  std::vector<TriggerSpec> triggers;
  std::vector<ActivitySpec> activities;
  bool operator==(const ApplicationSpec&) const = default;
};

struct Violation {
  std::string element;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<std::string> warnings;
  bool ok() const { return violations.empty(); }
  bool mentions(const std::string& needle) const;
};

ValidationReport validate_application(const ApplicationSpec& app);

struct DagNode {
  enum class Kind { State, Reduction, Trigger, Activity };
  Kind kind;
  std::string name;
  std::size_t index;   // into the matching vector of ElementDag::app
};

/// Element graph. `app` is the normalized application (identity reductions
/// inserted) that node indices refer to.
struct ElementDag {
  ApplicationSpec app;
  std::vector<DagNode> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::string> unused_states;

  std::vector<std::size_t> topological_order() const;
  std::size_t count(DagNode::Kind kind) const;
  std::size_t find(DagNode::Kind kind, const std::string& name) const;
  bool operator==(const ElementDag& other) const;
};

/// Throws ValidationError when the application does not validate.
ElementDag build_dag(const ApplicationSpec& app);

std::string to_string(ReductionPrimitive p);
std::string to_string(PortClass c);
const char* identity_prefix();

}  // namespace loader
