#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "loader/compiler.hpp"
#include "loader/estimator.hpp"
#include "loader/wire.hpp"

namespace loader {

class UnknownState : public Error {
 public:
  using Error::Error;
};

inline constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::min();

/// Traffic-triggered emission rule for one switch.
class UpdateTrigger {
 public:
  enum class Mode { None, TimePeriod, PacketPeriod };

  static UpdateTrigger none() { return UpdateTrigger(Mode::None, 0, 0); }
  static UpdateTrigger time_period(std::int64_t tau_ns) { return UpdateTrigger(Mode::TimePeriod, tau_ns, 0); }
  static UpdateTrigger packet_period(std::uint64_t p) { return UpdateTrigger(Mode::PacketPeriod, 0, p); }

  /// Called once per data packet; true when an update must go out now.
  bool on_packet(std::int64_t t_clk);

  Mode mode() const { return mode_; }
  std::int64_t tau_ns() const { return tau_ns_; }
  std::uint64_t period_packets() const { return p_; }
  std::int64_t t_prime() const { return t_prime_; }
  std::uint64_t pkt_count() const { return pkt_count_; }

 private:
  UpdateTrigger(Mode m, std::int64_t tau, std::uint64_t p) : mode_(m), tau_ns_(tau), p_(p) {}
  Mode mode_;
  std::int64_t tau_ns_;
  std::uint64_t p_;
  std::int64_t t_prime_ = kNever;
  std::uint64_t pkt_count_ = 0;
};

struct RemoteSlot {
  std::uint64_t value = 0;
  std::int64_t origin_ts = kNever;     // kNever until the first update lands
  std::uint64_t origin_writes = 0;
  std::uint32_t width_bits = 32;
};

struct ApplyResult {
  bool applied = false;
  std::int64_t previous_origin_ts = kNever;
  std::uint64_t previous_writes = 0;
};

/// Registers of one switch: local states it writes, per-origin copies of
/// states written elsewhere, and one global register per reduced value.
class ReplicaStore {
 public:
  explicit ReplicaStore(std::uint32_t self_id = 0) : self_(self_id) {}

  std::uint32_t self() const { return self_; }

  void declare_local(StateId id, const ValueKind& kind, std::uint32_t width_bits);
  void declare_remote(StateId id, std::uint32_t origin, std::uint32_t width_bits);
  void declare_global(std::uint32_t width_bits) { global_bits_ += width_bits; }

  bool has_local(StateId id) const { return locals_.count(id) != 0; }
  bool knows(StateId id) const;
  std::vector<StateId> local_ids() const;

  /// Counter/rate increment; counts as one write.
  void write_local(StateId id, std::int64_t t_now, std::uint64_t increment);
  /// Scalar overwrite; counts as one write.
  void set_local(StateId id, std::int64_t t_now, std::uint64_t value);
  std::uint64_t local_value(StateId id, std::int64_t t_now);
  std::uint64_t local_writes(StateId id) const;

  /// Last-writer-wins on origin timestamp; duplicates and reorders are no-ops.
  ApplyResult apply_update(const UpdateHeader& header, std::int64_t origin_ts, std::uint64_t origin_writes = 0);

  const RemoteSlot* remote(StateId id, std::uint32_t origin) const;
  const std::map<std::uint32_t, RemoteSlot>* remotes(StateId id) const;

  /// Local value combined with every remote slot of the same state (sum, or
  /// max when `use_max`). Missing slots contribute 0.
  std::uint64_t combined_value(StateId id, std::int64_t t_now, bool use_max = false);

  /// Replicated-state register memory: local + remote + global registers.
  std::uint64_t register_bits() const;

 private:
  struct Local {
    ValueKind kind;
    std::uint32_t width_bits = 32;
    std::optional<RateEstimatorWindow> estimator;
    std::uint64_t value = 0;
    std::uint64_t writes = 0;
  };

  std::uint32_t self_;
  std::map<StateId, Local> locals_;
  std::map<StateId, std::map<std::uint32_t, RemoteSlot>> remotes_;
  std::uint64_t global_bits_ = 0;
};

/// How one reduced value is read off a store.
struct GlobalBinding {
  ReductionPrimitive primitive = ReductionPrimitive::Sum;
  std::vector<StateId> inputs;
  /// inputs[0] holds per-origin partials of all `arity` original inputs.
  bool folded = false;
  std::uint32_t arity = 1;
};

std::uint64_t read_global(ReplicaStore& store, const GlobalBinding& binding, std::int64_t t_now);

struct UpdateMessage {
  std::vector<UpdateHeader> headers;
  std::int64_t origin_ts = 0;
  std::vector<std::uint64_t> origin_writes;   // parallel to headers
  std::uint64_t size_bits = 0;
};

/// Emits one update carrying every listed local state when the trigger fires.
std::optional<UpdateMessage> maybe_trigger_update(UpdateTrigger& trigger, std::int64_t t_clk,
                                                  const std::vector<StateId>& state_ids, ReplicaStore& store,
                                                  std::uint32_t replica_id);

/// Tree ports except the one the update came in on.
std::vector<int> flood_on_tree(const std::vector<int>& tree_ports, int ingress_port);

}  // namespace loader
