#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "loader/app_model.hpp"

namespace loader {

using StateId = std::uint32_t;

enum class Capability {
  Register,
  CircularBuffer,
  Counter,
  Sum,
  Mean,
  ArgMin,
  ArgMax,
  Max,
  MinMaxArgMin,
  GreaterThan,
  LessOrEqual,
  Probabilistic,
  Always,
  NotifyController,
  DropPacket,
  SetEgress,
  InsertFlowRule,
};

using CapabilitySet = std::set<Capability>;

/// Everything the simulated switches support.
CapabilitySet full_capabilities();
std::optional<Capability> capability_from_string(const std::string& s);

class UnsupportedPrimitive : public Error {
 public:
  UnsupportedPrimitive(std::string element, const std::string& what)
      : Error("unsupported primitive for " + element + ": " + what), element_(std::move(element)) {}
  const std::string& element() const { return element_; }

 private:
  std::string element_;
};

class RegistryExhausted : public Error {
 public:
  using Error::Error;
};

struct DataStructure {
  enum class Kind { Register, CircularBuffer, Counter };
  StateId state_id = 0;
  Kind kind = Kind::Register;
  std::uint32_t window = 0;       // CircularBuffer length
  std::uint32_t width_bits = 32;
  std::uint32_t length = 1;       // >1 for array registers
};

struct Operand {
  enum class Kind { State, Result };
  Kind kind = Kind::State;
  std::uint32_t id = 0;           // state id or producing action id
  bool operator==(const Operand&) const = default;
};

struct PrimitiveAction {
  enum class Kind { Reduce, Trigger, Act };
  std::uint32_t action_id = 0;
  Kind kind = Kind::Reduce;
  std::string element;            // source element name
  ReductionPrimitive reduce = ReductionPrimitive::Sum;
  Predicate predicate;
  InconsistencySpec inconsistency;
  ActivityAction act;
  ScopeFilter scope;
  std::vector<Operand> operands;
};

struct PrimitiveProgram {
  std::string app_name;
  /// One entry per application state, in declaration order. Before
  /// assign_state_ids these are the local indices 0..n-1.
  std::vector<StateId> state_ids;
  std::vector<std::string> state_names;
  std::vector<std::string> state_keys;    // name + scope, used for sharing
  std::vector<DataStructure> data_structures;
  std::vector<PrimitiveAction> actions;
  std::vector<std::vector<std::uint32_t>> colocation_groups;
  bool ids_assigned = false;

  const PrimitiveAction& action(std::uint32_t id) const { return actions.at(id); }
  std::size_t state_index(StateId id) const;
  std::optional<std::uint32_t> action_for(const std::string& element) const;
};

/// Controller-side id registry. Ids are handed out densely in request order;
/// a key seen before gets its original id back.
class StateIdRegistry {
 public:
  explicit StateIdRegistry(std::uint64_t first_id = 0) : next_(first_id) {}

  StateId assign(const std::string& key);
  std::optional<StateId> lookup(const std::string& key) const;
  std::uint64_t next_id() const { return next_; }
  std::size_t size() const { return ids_.size(); }

 private:
  std::uint64_t next_;
  std::map<std::string, StateId> ids_;
};

PrimitiveProgram compile(const ElementDag& dag, const CapabilitySet& capabilities);
PrimitiveProgram assign_state_ids(PrimitiveProgram program, StateIdRegistry& registry);

/// Canonical text form (fixed field order, decimal ids).
std::string to_text(const PrimitiveProgram& program);

std::string scope_key(const ScopeFilter& scope);

/// Reduction semantics shared by the compiled program and the switch
/// runtime. Ties resolve to the lowest index; Mean is sum >> log2(n).
std::uint64_t apply_reduction(ReductionPrimitive primitive, std::span<const std::uint64_t> values);

struct ActionOutcome {
  std::uint64_t value = 0;     // Reduce: result
  bool fired = false;          // Trigger/Act: deterministic outcome
  double probability = 0.0;    // Trigger/Act: firing probability
};

/// Evaluates every action in order. `state_values` is indexed like
/// program.state_ids; `prefilled` overrides Reduce results by action id.
std::vector<ActionOutcome> evaluate(const PrimitiveProgram& program,
                                    std::span<const std::uint64_t> state_values,
                                    const std::map<std::uint32_t, std::uint64_t>& prefilled = {});

}  // namespace loader
