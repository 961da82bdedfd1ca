#include "loader/compiler.hpp"

#include <algorithm>
#include <bit>
#include <limits>

#include <fmt/format.h>

namespace loader {

CapabilitySet full_capabilities() {
  return {Capability::Register,       Capability::CircularBuffer, Capability::Counter,
          Capability::Sum,            Capability::Mean,           Capability::ArgMin,
          Capability::ArgMax,         Capability::Max,            Capability::MinMaxArgMin,
          Capability::GreaterThan,    Capability::LessOrEqual,    Capability::Probabilistic,
          Capability::Always,         Capability::NotifyController, Capability::DropPacket,
          Capability::SetEgress,      Capability::InsertFlowRule};
}

std::optional<Capability> capability_from_string(const std::string& s) {
  static const std::map<std::string, Capability> names = {
      {"register", Capability::Register},
      {"circular_buffer", Capability::CircularBuffer},
      {"counter", Capability::Counter},
      {"sum", Capability::Sum},
      {"mean", Capability::Mean},
      {"argmin", Capability::ArgMin},
      {"argmax", Capability::ArgMax},
      {"max", Capability::Max},
      {"minmaxargmin", Capability::MinMaxArgMin},
      {"gt", Capability::GreaterThan},
      {"le", Capability::LessOrEqual},
      {"probabilistic", Capability::Probabilistic},
      {"always", Capability::Always},
      {"notify", Capability::NotifyController},
      {"drop", Capability::DropPacket},
      {"set_egress", Capability::SetEgress},
      {"insert_flow_rule", Capability::InsertFlowRule},
  };
  auto it = names.find(s);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

std::size_t PrimitiveProgram::state_index(StateId id) const {
  auto it = std::find(state_ids.begin(), state_ids.end(), id);
  if (it == state_ids.end()) throw Error(fmt::format("state id {} not in program {}", id, app_name));
  return static_cast<std::size_t>(it - state_ids.begin());
}

std::optional<std::uint32_t> PrimitiveProgram::action_for(const std::string& element) const {
  for (const auto& a : actions)
    if (a.element == element) return a.action_id;
  return std::nullopt;
}

StateId StateIdRegistry::assign(const std::string& key) {
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  if (next_ > std::numeric_limits<StateId>::max())
    throw RegistryExhausted("state id registry exhausted");
  const auto id = static_cast<StateId>(next_++);
  ids_.emplace(key, id);
  return id;
}

std::optional<StateId> StateIdRegistry::lookup(const std::string& key) const {
  auto it = ids_.find(key);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string scope_key(const ScopeFilter& scope) {
  std::string key = to_string(scope.port_class);
  key += scope.syn_only() ? "/syn" : "/any";
  if (scope.port) key += fmt::format("/port{}", *scope.port);
  if (!scope.dst_filter.empty()) {
    auto dsts = scope.dst_filter;
    std::sort(dsts.begin(), dsts.end());
    key += "/dst";
    for (const auto& d : dsts) key += ":" + d;
  }
  return key;
}

namespace {

Capability capability_for(ReductionPrimitive p) {
  switch (p) {
    case ReductionPrimitive::Sum: return Capability::Sum;
    case ReductionPrimitive::Mean: return Capability::Mean;
    case ReductionPrimitive::ArgMin: return Capability::ArgMin;
    case ReductionPrimitive::ArgMax: return Capability::ArgMax;
    case ReductionPrimitive::Max: return Capability::Max;
    case ReductionPrimitive::MinMaxArgMin: return Capability::MinMaxArgMin;
    case ReductionPrimitive::Identity: break;
  }
  return Capability::Register;
}

Capability capability_for(const Predicate& p) {
  switch (p.kind) {
    case Predicate::Kind::GreaterThan: return Capability::GreaterThan;
    case Predicate::Kind::LessOrEqual: return Capability::LessOrEqual;
    case Predicate::Kind::Probabilistic: return Capability::Probabilistic;
    case Predicate::Kind::Always: return Capability::Always;
  }
  return Capability::Always;
}

Capability capability_for(const ActivityAction& a) {
  switch (a.kind) {
    case ActivityAction::Kind::NotifyController: return Capability::NotifyController;
    case ActivityAction::Kind::DropPacket: return Capability::DropPacket;
    case ActivityAction::Kind::SetEgress: return Capability::SetEgress;
    case ActivityAction::Kind::InsertFlowRule: return Capability::InsertFlowRule;
  }
  return Capability::NotifyController;
}

void require(const CapabilitySet& caps, Capability c, const std::string& element, const std::string& what) {
  if (!caps.count(c)) throw UnsupportedPrimitive(element, what);
}

std::string predicate_text(const Predicate& p) {
  switch (p.kind) {
    case Predicate::Kind::GreaterThan: return fmt::format("gt({})", p.threshold);
    case Predicate::Kind::LessOrEqual: return fmt::format("le({})", p.threshold);
    case Predicate::Kind::Probabilistic:
      return fmt::format("probabilistic(excess_over={})", p.formula ? p.formula->excess_target : 0.0);
    case Predicate::Kind::Always: return "always";
  }
  return "?";
}

std::string inconsistency_text(const InconsistencySpec& inc) {
  switch (inc.kind) {
    case InconsistencyKind::None: return "none";
    case InconsistencyKind::TimeObsolescence: return fmt::format("time({})", inc.epsilon_t);
    case InconsistencyKind::UpdateError:
      return fmt::format("update({},{})", inc.epsilon_r, inc.max_write_rate);
  }
  return "?";
}

std::string act_text(const ActivityAction& a) {
  switch (a.kind) {
    case ActivityAction::Kind::NotifyController: return fmt::format("notify(\"{}\")", a.message);
    case ActivityAction::Kind::DropPacket: return "drop";
    case ActivityAction::Kind::SetEgress:
      if (a.constant) return fmt::format("set_egress({})", *a.constant);
      return "set_egress(result)";
    case ActivityAction::Kind::InsertFlowRule: return "insert_flow_rule(result)";
  }
  return "?";
}

std::string operand_text(const Operand& o) {
  return fmt::format("{}{}", o.kind == Operand::Kind::State ? "s" : "a", o.id);
}

}  // namespace

PrimitiveProgram compile(const ElementDag& dag, const CapabilitySet& capabilities) {
  if (capabilities.empty()) throw Error("capability set is empty");
  const auto& app = dag.app;
  PrimitiveProgram prog;
  prog.app_name = app.name;

  for (std::size_t i = 0; i < app.states.size(); ++i) {
    const auto& s = app.states[i];
    const auto id = static_cast<StateId>(i);
    prog.state_ids.push_back(id);
    prog.state_names.push_back(s.name);
    prog.state_keys.push_back(s.name + "|" + scope_key(s.scope));
    switch (s.value_kind.kind) {
      case ValueKind::Kind::RateEstimate:
        // Windowed estimator: w samples in a ring, plus the running register.
        require(capabilities, Capability::CircularBuffer, s.name, "circular buffer");
        require(capabilities, Capability::Register, s.name, "register");
        prog.data_structures.push_back(
            {id, DataStructure::Kind::CircularBuffer, s.value_kind.window, s.width_bits, 1});
        prog.data_structures.push_back({id, DataStructure::Kind::Register, 0, s.width_bits, 1});
        break;
      case ValueKind::Kind::Counter:
        require(capabilities, Capability::Counter, s.name, "counter");
        prog.data_structures.push_back({id, DataStructure::Kind::Counter, 0, s.width_bits, 1});
        break;
      case ValueKind::Kind::Scalar:
        require(capabilities, Capability::Register, s.name, "register");
        prog.data_structures.push_back({id, DataStructure::Kind::Register, 0, s.width_bits, 1});
        break;
      case ValueKind::Kind::ScalarArray:
        require(capabilities, Capability::Register, s.name, "register");
        prog.data_structures.push_back(
            {id, DataStructure::Kind::Register, 0, s.width_bits, s.value_kind.length});
        break;
    }
  }

  std::map<std::string, Operand> producer;
  for (std::size_t i = 0; i < app.states.size(); ++i)
    producer[app.states[i].name] = {Operand::Kind::State, static_cast<std::uint32_t>(i)};

  const auto order = dag.topological_order();
  for (auto n : order) {
    const auto& node = dag.nodes[n];
    if (node.kind != DagNode::Kind::Reduction) continue;
    const auto& r = app.reductions[node.index];
    if (r.primitive != ReductionPrimitive::Identity)
      require(capabilities, capability_for(r.primitive), r.output_name, to_string(r.primitive));
    if (r.primitive == ReductionPrimitive::Mean && !std::has_single_bit(r.inputs.size()))
      throw UnsupportedPrimitive(r.output_name, "mean over a non power-of-two input count needs division");
    PrimitiveAction a;
    a.action_id = static_cast<std::uint32_t>(prog.actions.size());
    a.kind = PrimitiveAction::Kind::Reduce;
    a.element = r.output_name;
    a.reduce = r.primitive;
    for (const auto& in : r.inputs) a.operands.push_back(producer.at(in));
    producer[r.output_name] = {Operand::Kind::Result, a.action_id};
    prog.actions.push_back(std::move(a));
  }

  std::map<std::string, std::uint32_t> trigger_action;
  for (const auto& t : app.triggers) {
    require(capabilities, capability_for(t.predicate), t.name, predicate_text(t.predicate));
    PrimitiveAction a;
    a.action_id = static_cast<std::uint32_t>(prog.actions.size());
    a.kind = PrimitiveAction::Kind::Trigger;
    a.element = t.name;
    a.predicate = t.predicate;
    a.inconsistency = t.inconsistency;
    a.operands.push_back(producer.at(t.input));
    trigger_action[t.name] = a.action_id;
    prog.actions.push_back(std::move(a));
  }

  std::map<std::uint32_t, std::vector<std::uint32_t>> groups;
  for (const auto& t : app.triggers) {
    const auto& act = *std::find_if(app.activities.begin(), app.activities.end(),
                                    [&](const ActivitySpec& x) { return x.name == t.activity; });
    require(capabilities, capability_for(act.action), act.name, act_text(act.action));
    PrimitiveAction a;
    a.action_id = static_cast<std::uint32_t>(prog.actions.size());
    a.kind = PrimitiveAction::Kind::Act;
    a.element = act.name;
    a.act = act.action;
    a.scope = act.target_class;
    a.operands.push_back({Operand::Kind::Result, trigger_action.at(t.name)});
    if (!act.action.source_state.empty()) a.operands.push_back(producer.at(act.action.source_state));
    if (act.sequential_group) groups[*act.sequential_group].push_back(a.action_id);
    prog.actions.push_back(std::move(a));
  }
  for (auto& [gid, members] : groups) prog.colocation_groups.push_back(members);
  return prog;
}

PrimitiveProgram assign_state_ids(PrimitiveProgram program, StateIdRegistry& registry) {
  if (program.ids_assigned) return program;
  std::vector<StateId> mapped;
  mapped.reserve(program.state_ids.size());
  for (const auto& key : program.state_keys) mapped.push_back(registry.assign(key));
  for (auto& ds : program.data_structures) ds.state_id = mapped.at(ds.state_id);
  for (auto& a : program.actions)
    for (auto& o : a.operands)
      if (o.kind == Operand::Kind::State) o.id = mapped.at(o.id);
  program.state_ids = std::move(mapped);
  program.ids_assigned = true;
  return program;
}

std::string to_text(const PrimitiveProgram& p) {
  std::string out = fmt::format("program {}\n", p.app_name);
  for (std::size_t i = 0; i < p.state_ids.size(); ++i)
    out += fmt::format("state {} {} key={}\n", p.state_ids[i], p.state_names[i], p.state_keys[i]);
  for (const auto& ds : p.data_structures) {
    switch (ds.kind) {
      case DataStructure::Kind::Register:
        out += fmt::format("ds {} register width={} length={}\n", ds.state_id, ds.width_bits, ds.length);
        break;
      case DataStructure::Kind::CircularBuffer:
        out += fmt::format("ds {} circular_buffer w={} width={}\n", ds.state_id, ds.window, ds.width_bits);
        break;
      case DataStructure::Kind::Counter:
        out += fmt::format("ds {} counter width={}\n", ds.state_id, ds.width_bits);
        break;
    }
  }
  for (const auto& a : p.actions) {
    std::string ops;
    for (const auto& o : a.operands) ops += (ops.empty() ? "" : ",") + operand_text(o);
    switch (a.kind) {
      case PrimitiveAction::Kind::Reduce:
        out += fmt::format("action {} reduce {} {} element={}\n", a.action_id, to_string(a.reduce), ops,
                           a.element);
        break;
      case PrimitiveAction::Kind::Trigger:
        out += fmt::format("action {} trigger {} {} inconsistency={} element={}\n", a.action_id,
                           predicate_text(a.predicate), ops, inconsistency_text(a.inconsistency), a.element);
        break;
      case PrimitiveAction::Kind::Act:
        out += fmt::format("action {} act {} {} scope={} element={}\n", a.action_id, act_text(a.act), ops,
                           scope_key(a.scope), a.element);
        break;
    }
  }
  for (const auto& g : p.colocation_groups) {
    std::string ids;
    for (auto id : g) ids += (ids.empty() ? "" : ",") + std::to_string(id);
    out += fmt::format("coloc {}\n", ids);
  }
  return out;
}

std::uint64_t apply_reduction(ReductionPrimitive primitive, std::span<const std::uint64_t> v) {
  if (v.empty()) return 0;
  switch (primitive) {
    case ReductionPrimitive::Identity:
      return v[0];
    case ReductionPrimitive::Sum: {
      std::uint64_t s = 0;
      for (auto x : v) s += x;
      return s;
    }
    case ReductionPrimitive::Mean: {
      std::uint64_t s = 0;
      for (auto x : v) s += x;
      if (std::has_single_bit(v.size())) return s >> std::countr_zero(v.size());
      return s / v.size();
    }
    case ReductionPrimitive::Max:
      return *std::max_element(v.begin(), v.end());
    case ReductionPrimitive::ArgMin:
      return static_cast<std::uint64_t>(std::min_element(v.begin(), v.end()) - v.begin());
    case ReductionPrimitive::ArgMax: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
      return best;
    }
    case ReductionPrimitive::MinMaxArgMin: {
      const std::size_t half = v.size() / 2;
      std::size_t best = 0;
      std::uint64_t best_val = std::numeric_limits<std::uint64_t>::max();
      for (std::size_t i = 0; i < half; ++i) {
        const auto m = std::max(v[i], v[half + i]);
        if (m < best_val) {
          best_val = m;
          best = i;
        }
      }
      return best;
    }
  }
  return 0;
}

std::vector<ActionOutcome> evaluate(const PrimitiveProgram& program,
                                    std::span<const std::uint64_t> state_values,
                                    const std::map<std::uint32_t, std::uint64_t>& prefilled) {
  if (state_values.size() != program.state_ids.size())
    throw Error("state vector length does not match program");
  std::vector<ActionOutcome> out(program.actions.size());
  auto operand_value = [&](const Operand& o) -> std::uint64_t {
    if (o.kind == Operand::Kind::State) return state_values[program.state_index(o.id)];
    return out.at(o.id).value;
  };
  std::vector<std::uint64_t> scratch;
  for (const auto& a : program.actions) {
    auto& res = out[a.action_id];
    switch (a.kind) {
      case PrimitiveAction::Kind::Reduce: {
        if (auto it = prefilled.find(a.action_id); it != prefilled.end()) {
          res.value = it->second;
          break;
        }
        scratch.clear();
        for (const auto& o : a.operands) scratch.push_back(operand_value(o));
        res.value = apply_reduction(a.reduce, scratch);
        break;
      }
      case PrimitiveAction::Kind::Trigger: {
        const auto input = static_cast<double>(operand_value(a.operands.at(0)));
        res.value = operand_value(a.operands.at(0));
        switch (a.predicate.kind) {
          case Predicate::Kind::GreaterThan: res.fired = input > a.predicate.threshold; break;
          case Predicate::Kind::LessOrEqual: res.fired = input <= a.predicate.threshold; break;
          case Predicate::Kind::Always: res.fired = true; break;
          case Predicate::Kind::Probabilistic:
            res.probability = a.predicate.formula ? a.predicate.formula->probability(input) : 0.0;
            break;
        }
        if (a.predicate.kind != Predicate::Kind::Probabilistic) res.probability = res.fired ? 1.0 : 0.0;
        break;
      }
      case PrimitiveAction::Kind::Act: {
        const auto& trig = out.at(a.operands.at(0).id);
        res.fired = trig.fired;
        res.probability = trig.probability;
        if (a.operands.size() > 1) res.value = operand_value(a.operands[1]);
        break;
      }
    }
  }
  return out;
}

}  // namespace loader
