#include "loader/apps.hpp"

#include <cmath>

#include <fmt/format.h>

namespace loader {

namespace {

ScopeFilter external_syn() {
  ScopeFilter f;
  f.port_class = PortClass::External;
  f.l4_flag_filter = FlagFilter::SynOnly;
  return f;
}

ScopeFilter external_any() {
  ScopeFilter f;
  f.port_class = PortClass::External;
  return f;
}

ScopeFilter syn_any_port() {
  ScopeFilter f;
  f.l4_flag_filter = FlagFilter::SynOnly;
  return f;
}

std::string name_at(const std::vector<std::string>& names, std::size_t i, const char* fallback) {
  return i < names.size() ? names[i] : fmt::format("{}{}", fallback, i + 1);
}

}  // namespace

ApplicationSpec make_ddos_app(std::uint32_t n, double threshold_pps, double epsilon_t,
                              const std::vector<std::string>& edges, double delta, std::uint32_t window) {
  if (!(threshold_pps > 0)) throw ValidationError("DDoS threshold must be positive");
  ApplicationSpec app;
  app.name = "ddos";
  ReductionSpec r{{}, ReductionPrimitive::Sum, "syn_total"};
  for (std::uint32_t i = 0; i < n; ++i) {
    StateSpec s;
    s.name = fmt::format("syn_rate_{}", i);
    s.scope = external_syn();
    s.value_kind = ValueKind::rate(delta, window);
    s.measure = Measure::Packets;
    s.width_bits = 32;
    s.target_hint = name_at(edges, i, "SW");
    r.inputs.push_back(s.name);
    app.states.push_back(std::move(s));
  }
  app.reductions.push_back(std::move(r));
  app.activities.push_back({"notify", external_syn(), ActivityAction::notify("DDoS detected"), std::nullopt});
  app.triggers.push_back({"detect", "syn_total", Predicate::greater_than(threshold_pps),
                          InconsistencySpec::time_obsolescence(epsilon_t), "notify"});
  return app;
}

ApplicationSpec make_rate_limiter_app(std::uint32_t n, double rate_bps, std::uint64_t epsilon_r,
                                      double max_write_rate, const std::vector<std::string>& edges, double delta,
                                      std::uint32_t window) {
  if (!(rate_bps > 0)) throw ValidationError("rate limit must be positive");
  ApplicationSpec app;
  app.name = "ratelimit";
  ReductionSpec r{{}, ReductionPrimitive::Sum, "rate_total"};
  for (std::uint32_t i = 0; i < n; ++i) {
    StateSpec s;
    s.name = fmt::format("in_rate_{}", i);
    s.scope = external_any();
    s.value_kind = ValueKind::rate(delta, window);
    s.measure = Measure::Bits;
    s.width_bits = 32;
    s.target_hint = name_at(edges, i, "SW");
    r.inputs.push_back(s.name);
    app.states.push_back(std::move(s));
  }
  app.reductions.push_back(std::move(r));
  app.activities.push_back({"drop", external_any(), ActivityAction::drop(), std::nullopt});
  app.triggers.push_back({"limit", "rate_total", Predicate::probabilistic(DropFormula{rate_bps}),
                          InconsistencySpec::update_error(epsilon_r, max_write_rate), "drop"});
  return app;
}

ApplicationSpec make_link_lb_app(std::uint32_t p, std::uint64_t epsilon_r, double max_write_rate,
                                 const std::string& leaf, const std::vector<std::string>& spines, double delta,
                                 std::uint32_t window) {
  if (p == 0) throw ValidationError("link LB needs at least one spine");
  ApplicationSpec app;
  app.name = "linklb";
  ReductionSpec r{{}, ReductionPrimitive::MinMaxArgMin, "best_spine"};
  for (std::uint32_t i = 0; i < p; ++i) {
    StateSpec s;
    s.name = fmt::format("ul_load_{}", i);
    s.scope.port_class = PortClass::Uplink;
    s.scope.port = i;
    s.value_kind = ValueKind::rate(delta, window);
    s.measure = Measure::Bits;
    s.target_hint = leaf.empty() ? std::string("LEAF1") : leaf;
    r.inputs.push_back(s.name);
    app.states.push_back(std::move(s));
  }
  for (std::uint32_t i = 0; i < p; ++i) {
    StateSpec s;
    s.name = fmt::format("dl_load_{}", i);
    s.scope.port_class = PortClass::Downlink;
    s.scope.port = 0;
    s.value_kind = ValueKind::rate(delta, window);
    s.measure = Measure::Bits;
    s.target_hint = name_at(spines, i, "SPINE");
    r.inputs.push_back(s.name);
    app.states.push_back(std::move(s));
  }
  app.reductions.push_back(std::move(r));
  app.activities.push_back({"pin_flow", syn_any_port(), ActivityAction::insert_flow_rule("best_spine"), std::nullopt});
  app.triggers.push_back({"always", "best_spine", Predicate::always(),
                          InconsistencySpec::update_error(epsilon_r, max_write_rate), "pin_flow"});
  return app;
}

ApplicationSpec make_resource_lb_app(std::uint32_t n, double thr, std::uint64_t epsilon_r, double max_write_rate,
                                     const std::vector<std::string>& servers) {
  if (!(thr > 0.0 && thr < 1.0)) throw ValidationError("THR must lie in (0, 1)");
  ApplicationSpec app;
  app.name = "resourcelb";
  ReductionSpec r1{{}, ReductionPrimitive::ArgMin, "least_loaded"};
  ReductionSpec r2{{}, ReductionPrimitive::Mean, "mean_load"};
  for (std::uint32_t i = 0; i < n; ++i) {
    StateSpec s;
    s.name = fmt::format("cpu_load_{}", i);
    s.value_kind = ValueKind::scalar();
    s.measure = Measure::Packets;
    s.width_bits = 16;
    s.target_hint = name_at(servers, i, "SRV");
    r1.inputs.push_back(s.name);
    r2.inputs.push_back(s.name);
    app.states.push_back(std::move(s));
  }
  app.reductions.push_back(std::move(r1));
  app.reductions.push_back(std::move(r2));
  app.activities.push_back({"to_server", syn_any_port(), ActivityAction::set_egress_from("least_loaded"), std::nullopt});
  app.activities.push_back(
      {"to_controller", syn_any_port(), ActivityAction::set_egress_constant(kControllerPort), std::nullopt});
  const double scaled = std::round(thr * kLoadScale);
  const auto inc = InconsistencySpec::update_error(epsilon_r, max_write_rate);
  app.triggers.push_back({"under_thr", "mean_load", Predicate::less_or_equal(scaled), inc, "to_server"});
  app.triggers.push_back({"over_thr", "mean_load", Predicate::greater_than(scaled), inc, "to_controller"});
  return app;
}

double AppParams::get(const std::string& key, double fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

std::vector<std::string> AppParams::list(const std::string& key) const {
  auto it = names.find(key);
  return it == names.end() ? std::vector<std::string>{} : it->second;
}

std::vector<std::string> app_names() { return {"ddos", "linklb", "ratelimit", "resourcelb"}; }

namespace {

double need(const AppParams& p, const std::string& app, const std::string& key) {
  if (!p.has(key)) throw ValidationError(fmt::format("application {} needs parameter {}", app, key));
  return p.values.at(key);
}

std::uint32_t count_of(const AppParams& p, const std::string& key, std::size_t fallback) {
  return static_cast<std::uint32_t>(p.get(key, static_cast<double>(fallback)));
}

}  // namespace

ApplicationSpec make_app(const std::string& name, const AppParams& p) {
  const double delta = p.get("delta", 0.1);
  const auto window = static_cast<std::uint32_t>(p.get("window", 8));
  if (name == "ddos") {
    const auto edges = p.list("edges");
    return make_ddos_app(count_of(p, "n", edges.size()), need(p, name, "threshold"), need(p, name, "epsilon_t"),
                         edges, delta, window);
  }
  if (name == "ratelimit") {
    const auto edges = p.list("edges");
    return make_rate_limiter_app(count_of(p, "n", edges.size()), need(p, name, "rate"),
                                 static_cast<std::uint64_t>(need(p, name, "epsilon_r")),
                                 need(p, name, "max_write_rate"), edges, delta, window);
  }
  if (name == "linklb") {
    const auto spines = p.list("spines");
    const auto leaf = p.list("leaf");
    return make_link_lb_app(count_of(p, "p", spines.size()), static_cast<std::uint64_t>(p.get("epsilon_r", 10)),
                            p.get("max_write_rate", 1e4), leaf.empty() ? std::string() : leaf.front(), spines,
                            delta, window);
  }
  if (name == "resourcelb") {
    const auto servers = p.list("servers");
    return make_resource_lb_app(count_of(p, "n", servers.size()), need(p, name, "thr"),
                                static_cast<std::uint64_t>(p.get("epsilon_r", 15)), p.get("max_write_rate", 100.0),
                                servers);
  }
  throw ValidationError(fmt::format("unknown application {}", name));
}

}  // namespace loader
