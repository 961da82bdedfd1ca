#include "loader/app_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <set>

namespace loader {

double DropFormula::probability(double reduced) const {
  if (!(reduced > 0.0) || reduced <= excess_target) return 0.0;
  const double p = (reduced - excess_target) / reduced;
  return std::min(p, std::nextafter(1.0, 0.0));
}

bool ValidationReport::mentions(const std::string& needle) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) {
    return v.message.find(needle) != std::string::npos;
  });
}

const char* identity_prefix() { return "id:"; }

std::string to_string(ReductionPrimitive p) {
  switch (p) {
    case ReductionPrimitive::Sum: return "sum";
    case ReductionPrimitive::Mean: return "mean";
    case ReductionPrimitive::ArgMin: return "argmin";
    case ReductionPrimitive::ArgMax: return "argmax";
    case ReductionPrimitive::Max: return "max";
    case ReductionPrimitive::MinMaxArgMin: return "minmaxargmin";
    case ReductionPrimitive::Identity: return "identity";
  }
  return "?";
}

std::string to_string(PortClass c) {
  switch (c) {
    case PortClass::Any: return "any";
    case PortClass::External: return "external";
    case PortClass::Internal: return "internal";
    case PortClass::Uplink: return "uplink";
    case PortClass::Downlink: return "downlink";
  }
  return "?";
}

namespace {

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == ',' || c == '=';
  });
}

bool power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

void check_inconsistency(const InconsistencySpec& inc, const std::string& owner,
                         std::vector<Violation>& out) {
  switch (inc.kind) {
    case InconsistencyKind::None:
      break;
    case InconsistencyKind::TimeObsolescence:
      if (!(inc.epsilon_t > 0.0) || !std::isfinite(inc.epsilon_t))
        out.push_back({owner, "epsilon_t must be > 0"});
      break;
    case InconsistencyKind::UpdateError:
      if (inc.epsilon_r < 1) out.push_back({owner, "epsilon_r must be >= 1"});
      if (!(inc.max_write_rate > 0.0) || !std::isfinite(inc.max_write_rate))
        out.push_back({owner, "max_write_rate must be > 0"});
      break;
  }
}

// Reports every elementary cycle among reductions once, rotated so that the
// lexicographically smallest member comes first.
void find_reduction_cycles(const ApplicationSpec& app, std::vector<Violation>& out) {
  std::map<std::string, std::size_t> by_output;
  for (std::size_t i = 0; i < app.reductions.size(); ++i)
    by_output.emplace(app.reductions[i].output_name, i);

  std::set<std::vector<std::string>> seen;
  std::vector<int> color(app.reductions.size(), 0);
  std::vector<std::size_t> stack;

  std::function<void(std::size_t)> dfs = [&](std::size_t u) {
    color[u] = 1;
    stack.push_back(u);
    for (const auto& in : app.reductions[u].inputs) {
      auto it = by_output.find(in);
      if (it == by_output.end()) continue;
      const std::size_t v = it->second;
      if (color[v] == 1) {
        auto start = std::find(stack.begin(), stack.end(), v);
        std::vector<std::string> cyc;
        for (auto p = start; p != stack.end(); ++p) cyc.push_back(app.reductions[*p].output_name);
        auto smallest = std::min_element(cyc.begin(), cyc.end());
        std::rotate(cyc.begin(), smallest, cyc.end());
        if (!seen.insert(cyc).second) continue;
        std::string msg = "cycle ";
        if (cyc.size() == 2) {
          msg += cyc[0] + "↔" + cyc[1];
        } else {
          for (const auto& n : cyc) msg += n + "→";
          msg += cyc.front();
        }
        out.push_back({cyc.front(), msg});
      } else if (color[v] == 0) {
        dfs(v);
      }
    }
    stack.pop_back();
    color[u] = 2;
  };
  for (std::size_t i = 0; i < app.reductions.size(); ++i)
    if (color[i] == 0) dfs(i);
}

}  // namespace

ValidationReport validate_application(const ApplicationSpec& app) {
  ValidationReport report;
  auto& out = report.violations;

  if (!is_identifier(app.name)) out.push_back({"application", "invalid application name"});

  std::set<std::string> state_names;
  for (const auto& s : app.states) {
    if (!is_identifier(s.name)) out.push_back({s.name, "invalid state name"});
    if (!state_names.insert(s.name).second) out.push_back({s.name, "duplicate state " + s.name});
    if (s.width_bits == 0 || s.width_bits > kStateMaxWidth)
      out.push_back({s.name, "width_bits must be in 1.." + std::to_string(kStateMaxWidth)});
    if (s.value_kind.kind == ValueKind::Kind::ScalarArray && s.value_kind.length == 0)
      out.push_back({s.name, "array length must be positive"});
    if (s.value_kind.kind == ValueKind::Kind::RateEstimate) {
      if (!power_of_two(s.value_kind.window))
        out.push_back({s.name, "rate window must be a power of two"});
      if (!(s.value_kind.delta > 0.0)) out.push_back({s.name, "rate delta must be > 0"});
    }
  }

  std::set<std::string> outputs;
  for (const auto& r : app.reductions) {
    if (!is_identifier(r.output_name)) out.push_back({r.output_name, "invalid reduction output name"});
    if (state_names.count(r.output_name))
      out.push_back({r.output_name, "reduction output shadows state " + r.output_name});
    if (!outputs.insert(r.output_name).second)
      out.push_back({r.output_name, "duplicate reduction output " + r.output_name});
  }
  for (const auto& r : app.reductions) {
    if (r.inputs.empty()) out.push_back({r.output_name, "reduction has no inputs"});
    for (const auto& in : r.inputs)
      if (!state_names.count(in) && !outputs.count(in))
        out.push_back({r.output_name, "undeclared input " + in});
    if (r.primitive == ReductionPrimitive::MinMaxArgMin && r.inputs.size() % 2 != 0)
      out.push_back({r.output_name, "minmaxargmin needs an even number of inputs"});
    if (r.primitive == ReductionPrimitive::Identity && r.inputs.size() != 1)
      out.push_back({r.output_name, "identity takes exactly one input"});
  }
  find_reduction_cycles(app, out);

  std::set<std::string> activity_names;
  for (const auto& a : app.activities) {
    if (!is_identifier(a.name)) out.push_back({a.name, "invalid activity name"});
    if (!activity_names.insert(a.name).second) out.push_back({a.name, "duplicate activity " + a.name});
    const auto& act = a.action;
    if (act.kind == ActivityAction::Kind::SetEgress && act.source_state.empty() && !act.constant)
      out.push_back({a.name, "set-egress needs a source or a constant"});
    if (act.kind == ActivityAction::Kind::InsertFlowRule && act.source_state.empty())
      out.push_back({a.name, "insert-flow-rule needs a source"});
    if (!act.source_state.empty() && !state_names.count(act.source_state) &&
        !outputs.count(act.source_state))
      out.push_back({a.name, "undeclared input " + act.source_state});
  }

  std::set<std::string> trigger_names;
  for (const auto& t : app.triggers) {
    if (!is_identifier(t.name)) out.push_back({t.name, "invalid trigger name"});
    if (!trigger_names.insert(t.name).second) out.push_back({t.name, "duplicate trigger " + t.name});
    if (!state_names.count(t.input) && !outputs.count(t.input))
      out.push_back({t.name, "undeclared input " + t.input});
    if (!activity_names.count(t.activity))
      out.push_back({t.name, "undeclared activity " + t.activity});
    if (!std::isfinite(t.predicate.threshold)) out.push_back({t.name, "threshold must be finite"});
    if (t.predicate.kind == Predicate::Kind::Probabilistic && !t.predicate.formula)
      out.push_back({t.name, "probabilistic trigger needs a drop formula"});
    check_inconsistency(t.inconsistency, t.name, out);
  }

  // Unused states are legitimate (monitoring-only deployments).
  std::set<std::string> consumed;
  for (const auto& r : app.reductions) consumed.insert(r.inputs.begin(), r.inputs.end());
  for (const auto& t : app.triggers) consumed.insert(t.input);
  for (const auto& a : app.activities)
    if (!a.action.source_state.empty()) consumed.insert(a.action.source_state);
  for (const auto& s : app.states)
    if (!consumed.count(s.name)) report.warnings.push_back("unused state " + s.name);

  return report;
}

std::vector<std::size_t> ElementDag::topological_order() const {
  std::vector<std::size_t> indeg(nodes.size(), 0);
  std::vector<std::vector<std::size_t>> adj(nodes.size());
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    ++indeg[v];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (indeg[i] == 0) ready.push(i);
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const auto u = ready.top();
    ready.pop();
    order.push_back(u);
    for (auto v : adj[u])
      if (--indeg[v] == 0) ready.push(v);
  }
  if (order.size() != nodes.size()) throw Error("element graph has a cycle");
  return order;
}

std::size_t ElementDag::count(DagNode::Kind kind) const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [&](const DagNode& n) { return n.kind == kind; }));
}

std::size_t ElementDag::find(DagNode::Kind kind, const std::string& name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].kind == kind && nodes[i].name == name) return i;
  throw Error("no DAG node named " + name);
}

bool ElementDag::operator==(const ElementDag& other) const {
  if (nodes.size() != other.nodes.size() || edges != other.edges) return false;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].kind != other.nodes[i].kind || nodes[i].name != other.nodes[i].name ||
        nodes[i].index != other.nodes[i].index)
      return false;
  return app == other.app && unused_states == other.unused_states;
}

ElementDag build_dag(const ApplicationSpec& input) {
  const auto report = validate_application(input);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    throw ValidationError("application " + input.name + " is invalid: " + v.element + ": " + v.message);
  }

  ElementDag dag;
  dag.app = input;
  auto& app = dag.app;

  std::set<std::string> state_names;
  for (const auto& s : app.states) state_names.insert(s.name);

  // Every trigger (and every activity source) reads a reduction output.
  auto wrap = [&](std::string& name) {
    if (!state_names.count(name)) return;
    const std::string out = identity_prefix() + name;
    const bool exists = std::any_of(app.reductions.begin(), app.reductions.end(),
                                    [&](const ReductionSpec& r) { return r.output_name == out; });
    if (!exists) app.reductions.push_back({{name}, ReductionPrimitive::Identity, out});
    name = out;
  };
  for (auto& t : app.triggers) wrap(t.input);
  for (auto& a : app.activities)
    if (!a.action.source_state.empty()) wrap(a.action.source_state);

  std::map<std::string, std::size_t> producer;
  for (std::size_t i = 0; i < app.states.size(); ++i) {
    producer[app.states[i].name] = dag.nodes.size();
    dag.nodes.push_back({DagNode::Kind::State, app.states[i].name, i});
  }
  for (std::size_t i = 0; i < app.reductions.size(); ++i) {
    producer[app.reductions[i].output_name] = dag.nodes.size();
    dag.nodes.push_back({DagNode::Kind::Reduction, app.reductions[i].output_name, i});
  }
  std::map<std::string, std::size_t> trigger_node;
  for (std::size_t i = 0; i < app.triggers.size(); ++i) {
    trigger_node[app.triggers[i].name] = dag.nodes.size();
    dag.nodes.push_back({DagNode::Kind::Trigger, app.triggers[i].name, i});
  }
  std::map<std::string, std::size_t> activity_node;
  for (std::size_t i = 0; i < app.activities.size(); ++i) {
    activity_node[app.activities[i].name] = dag.nodes.size();
    dag.nodes.push_back({DagNode::Kind::Activity, app.activities[i].name, i});
  }

  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& r : app.reductions)
    for (const auto& in : r.inputs) edges.insert({producer.at(in), producer.at(r.output_name)});
  for (const auto& t : app.triggers) {
    edges.insert({producer.at(t.input), trigger_node.at(t.name)});
    edges.insert({trigger_node.at(t.name), activity_node.at(t.activity)});
  }
  for (const auto& a : app.activities)
    if (!a.action.source_state.empty())
      edges.insert({producer.at(a.action.source_state), activity_node.at(a.name)});
  dag.edges.assign(edges.begin(), edges.end());

  std::vector<std::size_t> outdeg(dag.nodes.size(), 0);
  for (auto [u, v] : dag.edges) ++outdeg[u];
  for (std::size_t i = 0; i < app.states.size(); ++i)
    if (outdeg[i] == 0) dag.unused_states.push_back(app.states[i].name);

  (void)dag.topological_order();
  return dag;
}

}  // namespace loader
