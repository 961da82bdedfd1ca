#include "loader/scenario.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>

namespace loader {

SimConfig ScenarioConfig::sim_config() const {
  SimConfig c;
  c.t_end_ns = seconds_to_ns(t_end);
  c.bin_ns = seconds_to_ns(bin);
  c.seed = seed;
  c.controller_delay_ns = seconds_to_ns(controller_delay);
  c.queue_limit = queue_limit;
  c.trace = trace;
  return c;
}

DeployOptions ScenarioConfig::deploy_options(std::uint32_t replica_count) const {
  DeployOptions o;
  o.embedding.replicas = replica_count;
  o.embedding.traffic_weights = weights;
  o.r_min = r_min;
  o.trigger_mode = trigger_mode;
  return o;
}

double parse_quantity(const std::string& text) {
  static const std::vector<std::pair<std::string, double>> units = {
      {"Gbps", 1e9}, {"Mbps", 1e6}, {"kbps", 1e3}, {"bps", 1.0}, {"pps", 1.0},
      {"ms", 1e-3},  {"us", 1e-6},  {"ns", 1e-9},  {"s", 1.0},
  };
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw ParseError(fmt::format("not a number: '{}'", text));
  }
  const auto suffix = text.substr(pos);
  if (suffix.empty()) return value;
  for (const auto& [u, scale] : units)
    if (suffix == u) return value * scale;
  throw ParseError(fmt::format("unknown unit '{}' in '{}'", suffix, text));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Whitespace split; double quotes group words and are removed.
std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, any = false;
  for (char ch : s) {
    if (ch == '"') {
      quoted = !quoted;
      any = true;
    } else if (!quoted && std::isspace(static_cast<unsigned char>(ch))) {
      if (any) out.push_back(cur);
      cur.clear();
      any = false;
    } else {
      cur += ch;
      any = true;
    }
  }
  if (quoted) throw ParseError("unterminated quote");
  if (any) out.push_back(cur);
  return out;
}

struct Entry {
  int line;
  std::string key;
  std::string value;
};

/// Positional words plus key=value options.
struct Args {
  std::vector<std::string> words;
  std::map<std::string, std::string> opts;

  std::optional<std::string> opt(const std::string& k) const {
    auto it = opts.find(k);
    if (it == opts.end()) return std::nullopt;
    return it->second;
  }
};

Args split_args(const std::string& value) {
  Args a;
  for (const auto& t : tokens(value)) {
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      a.words.push_back(t);
    else
      a.opts[t.substr(0, eq)] = t.substr(eq + 1);
  }
  return a;
}

class Errors {
 public:
  explicit Errors(std::string source) : source_(std::move(source)) {}
  void add(int line, const std::string& msg) {
    items_.push_back(line > 0 ? fmt::format("{}:{}: {}", source_, line, msg) : fmt::format("{}: {}", source_, msg));
  }
  bool empty() const { return items_.empty(); }
  std::string text() const {
    std::string s;
    for (const auto& i : items_) s += (s.empty() ? "" : "\n") + i;
    return s;
  }

 private:
  std::string source_;
  std::vector<std::string> items_;
};

PortClass port_class_from(const std::string& s) {
  if (s == "external") return PortClass::External;
  if (s == "internal") return PortClass::Internal;
  if (s == "uplink") return PortClass::Uplink;
  if (s == "downlink") return PortClass::Downlink;
  if (s == "any") return PortClass::Any;
  throw ParseError(fmt::format("unknown port class '{}'", s));
}

ScopeFilter scope_from(const Args& a) {
  ScopeFilter f;
  if (auto v = a.opt("scope")) f.port_class = port_class_from(*v);
  if (auto v = a.opt("flags")) {
    if (*v == "syn")
      f.l4_flag_filter = FlagFilter::SynOnly;
    else if (*v == "any")
      f.l4_flag_filter = FlagFilter::Any;
    else
      throw ParseError(fmt::format("unknown flag filter '{}'", *v));
  }
  if (auto v = a.opt("port")) f.port = static_cast<std::uint32_t>(std::stoul(*v));
  if (auto v = a.opt("dst")) {
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) f.dst_filter.push_back(item);
  }
  return f;
}

ReductionPrimitive primitive_from(const std::string& s) {
  static const std::map<std::string, ReductionPrimitive> m = {
      {"sum", ReductionPrimitive::Sum},       {"mean", ReductionPrimitive::Mean},
      {"argmin", ReductionPrimitive::ArgMin}, {"argmax", ReductionPrimitive::ArgMax},
      {"max", ReductionPrimitive::Max},       {"minmaxargmin", ReductionPrimitive::MinMaxArgMin},
      {"identity", ReductionPrimitive::Identity},
  };
  auto it = m.find(s);
  if (it == m.end()) throw ParseError(fmt::format("unknown reduction '{}'", s));
  return it->second;
}

std::pair<std::string, std::string> split_colon(const std::string& s) {
  const auto c = s.find(':');
  if (c == std::string::npos) return {s, {}};
  return {s.substr(0, c), s.substr(c + 1)};
}

StateSpec parse_state(const std::string& value) {
  const auto a = split_args(value);
  if (a.words.size() != 1) throw ParseError("state needs exactly one name");
  StateSpec s;
  s.name = a.words[0];
  s.scope = scope_from(a);
  const auto kind = a.opt("kind").value_or("rate");
  const double delta = a.opt("delta") ? parse_quantity(*a.opt("delta")) : 0.1;
  const auto window = static_cast<std::uint32_t>(a.opt("window") ? std::stoul(*a.opt("window")) : 8);
  const auto [k, arg] = split_colon(kind);
  if (k == "rate")
    s.value_kind = ValueKind::rate(delta, window);
  else if (k == "counter")
    s.value_kind = ValueKind::counter();
  else if (k == "scalar")
    s.value_kind = ValueKind::scalar();
  else if (k == "array")
    s.value_kind = ValueKind::array(static_cast<std::uint32_t>(std::stoul(arg)));
  else
    throw ParseError(fmt::format("unknown state kind '{}'", kind));
  if (auto m = a.opt("measure")) {
    if (*m == "bits")
      s.measure = Measure::Bits;
    else if (*m != "packets")
      throw ParseError(fmt::format("unknown measure '{}'", *m));
  }
  if (auto w = a.opt("width")) s.width_bits = static_cast<std::uint32_t>(std::stoul(*w));
  if (auto t = a.opt("target")) s.target_hint = *t;
  return s;
}

ReductionSpec parse_reduction(const std::string& value) {
  const auto a = split_args(value);
  if (a.words.size() < 3) throw ParseError("reduction needs: OUTPUT PRIMITIVE INPUT...");
  ReductionSpec r;
  r.output_name = a.words[0];
  r.primitive = primitive_from(a.words[1]);
  r.inputs.assign(a.words.begin() + 2, a.words.end());
  return r;
}

TriggerSpec parse_trigger(const std::string& value) {
  const auto a = split_args(value);
  if (a.words.size() != 1) throw ParseError("trigger needs exactly one name");
  TriggerSpec t;
  t.name = a.words[0];
  t.input = a.opt("input").value_or("");
  t.activity = a.opt("activity").value_or("");
  const auto [pk, pv] = split_colon(a.opt("predicate").value_or("always"));
  if (pk == "gt")
    t.predicate = Predicate::greater_than(parse_quantity(pv));
  else if (pk == "le")
    t.predicate = Predicate::less_or_equal(parse_quantity(pv));
  else if (pk == "prob")
    t.predicate = Predicate::probabilistic(DropFormula{parse_quantity(pv)});
  else if (pk == "always")
    t.predicate = Predicate::always();
  else
    throw ParseError(fmt::format("unknown predicate '{}'", pk));
  const auto [ik, iv] = split_colon(a.opt("inconsistency").value_or("none"));
  if (ik == "none") {
    t.inconsistency = InconsistencySpec::none();
  } else if (ik == "time") {
    t.inconsistency = InconsistencySpec::time_obsolescence(parse_quantity(iv));
  } else if (ik == "update") {
    const auto [writes, rate] = split_colon(iv);
    t.inconsistency = InconsistencySpec::update_error(std::stoull(writes), parse_quantity(rate));
  } else {
    throw ParseError(fmt::format("unknown inconsistency '{}'", ik));
  }
  return t;
}

ActivitySpec parse_activity(const std::string& value) {
  const auto a = split_args(value);
  if (a.words.size() != 1) throw ParseError("activity needs exactly one name");
  ActivitySpec act;
  act.name = a.words[0];
  act.target_class = scope_from(a);
  const auto [k, v] = split_colon(a.opt("action").value_or(""));
  if (k == "notify")
    act.action = ActivityAction::notify(v);
  else if (k == "drop")
    act.action = ActivityAction::drop();
  else if (k == "set_egress" && v == "controller")
    act.action = ActivityAction::set_egress_constant(kControllerPort);
  else if (k == "set_egress" && !v.empty() && std::isdigit(static_cast<unsigned char>(v[0])))
    act.action = ActivityAction::set_egress_constant(std::stoll(v));
  else if (k == "set_egress")
    act.action = ActivityAction::set_egress_from(v);
  else if (k == "insert_flow_rule")
    act.action = ActivityAction::insert_flow_rule(v);
  else
    throw ParseError(fmt::format("unknown action '{}'", k));
  if (auto g = a.opt("group")) act.sequential_group = static_cast<std::uint32_t>(std::stoul(*g));
  return act;
}

const std::vector<std::string> kNameListKeys = {"edges", "servers", "spines", "leaf"};

}  // namespace

ScenarioConfig parse_scenario(const std::string& text, const std::string& source) {
  ScenarioConfig cfg;
  cfg.source = source;
  Errors perr(source);
  std::map<std::string, std::vector<Entry>> sections;
  {
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    static const std::vector<std::string> known = {"", "topology", "application", "embedding", "traffic", "loads"};
    while (std::getline(in, raw)) {
      ++line;
      std::string s;
      bool quoted = false;
      for (char ch : raw) {
        if (ch == '"') quoted = !quoted;
        if (ch == '#' && !quoted) break;
        s += ch;
      }
      s = trim(s);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') {
          perr.add(line, "malformed section header");
          continue;
        }
        section = trim(s.substr(1, s.size() - 2));
        if (std::find(known.begin(), known.end(), section) == known.end())
          perr.add(line, fmt::format("unknown section [{}]", section));
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        perr.add(line, "expected key = value");
        continue;
      }
      sections[section].push_back({line, trim(s.substr(0, eq)), trim(s.substr(eq + 1))});
    }
  }
  if (!perr.empty()) throw ParseError(perr.text());

  Errors verr(source);
  auto guard = [&](int line, auto&& fn) {
    try {
      fn();
    } catch (const ParseError& e) {
      perr.add(line, e.what());
    } catch (const std::invalid_argument&) {
      perr.add(line, "malformed number");
    } catch (const std::out_of_range&) {
      perr.add(line, "number out of range");
    } catch (const Error& e) {
      verr.add(line, e.what());
    }
  };

  bool have_seed = false;
  for (const auto& e : sections[""]) {
    guard(e.line, [&] {
      if (e.key == "format_version") {
        cfg.format_version = std::stoi(e.value);
        if (cfg.format_version != kScenarioFormatVersion)
          throw ValidationError(fmt::format("unsupported format_version {}", cfg.format_version));
      } else if (e.key == "seed") {
        cfg.seed = std::stoull(e.value);
        have_seed = true;
      } else if (e.key == "t_end") {
        cfg.t_end = parse_quantity(e.value);
      } else if (e.key == "bin") {
        cfg.bin = parse_quantity(e.value);
      } else if (e.key == "steady_fraction") {
        cfg.steady_fraction = parse_quantity(e.value);
      } else {
        throw ParseError(fmt::format("unknown key '{}'", e.key));
      }
    });
  }
  if (!have_seed) verr.add(0, "missing mandatory key 'seed'");
  if (!(cfg.t_end > 0)) verr.add(0, "t_end must be positive");
  if (!(cfg.bin > 0)) verr.add(0, "bin must be positive");
  if (!(cfg.steady_fraction > 0 && cfg.steady_fraction <= 1)) verr.add(0, "steady_fraction must lie in (0, 1]");

  // Topology: nodes first, links after every node is known.
  std::vector<const Entry*> links;
  for (const auto& e : sections["topology"]) {
    guard(e.line, [&] {
      if (e.key == "switch" || e.key == "host" || e.key == "controller") {
        const auto kind = e.key == "switch" ? NodeKind::Switch : e.key == "host" ? NodeKind::Host : NodeKind::Controller;
        const auto names = tokens(e.value);
        if (names.empty()) throw ParseError(fmt::format("{} needs a name", e.key));
        for (const auto& n : names) cfg.topo.add_node(n, kind);
      } else if (e.key == "link") {
        links.push_back(&e);
      } else if (e.key == "controller_delay") {
        cfg.controller_delay = parse_quantity(e.value);
      } else if (e.key == "queue_limit") {
        cfg.queue_limit = static_cast<std::uint32_t>(std::stoul(e.value));
        if (cfg.queue_limit == 0) throw ValidationError("queue_limit must be positive");
      } else {
        throw ParseError(fmt::format("unknown key '{}'", e.key));
      }
    });
  }
  for (const auto* e : links) {
    guard(e->line, [&] {
      const auto a = split_args(e->value);
      if (a.words.size() != 2) throw ParseError("link needs two endpoints");
      const auto delay = a.opt("delay");
      const auto cap = a.opt("capacity");
      if (!delay || !cap) throw ParseError("link needs delay= and capacity=");
      bool uplink = false;
      if (auto c = a.opt("class")) {
        if (*c == "uplink")
          uplink = true;
        else if (*c != "internal" && *c != "external")
          throw ParseError(fmt::format("unknown link class '{}'", *c));
      }
      cfg.topo.add_link(cfg.topo.require(a.words[0]), cfg.topo.require(a.words[1]), seconds_to_ns(parse_quantity(*delay)),
                        static_cast<std::uint64_t>(std::llround(parse_quantity(*cap))), uplink);
    });
  }
  if (!links.empty()) {
    try {
      cfg.topo.check_connected();
    } catch (const Error& e) {
      verr.add(0, e.what());
    }
  } else {
    verr.add(0, "topology has no links");
  }

  // Application.
  ApplicationSpec custom;
  int app_line = 0;
  for (const auto& e : sections["application"]) {
    guard(e.line, [&] {
      if (e.key == "app") {
        cfg.app_name = e.value;
        app_line = e.line;
      } else if (e.key == "state") {
        custom.states.push_back(parse_state(e.value));
      } else if (e.key == "reduction") {
        custom.reductions.push_back(parse_reduction(e.value));
      } else if (e.key == "trigger") {
        custom.triggers.push_back(parse_trigger(e.value));
      } else if (e.key == "activity") {
        custom.activities.push_back(parse_activity(e.value));
      } else if (e.key == "name") {
        custom.name = e.value;
      } else if (std::find(kNameListKeys.begin(), kNameListKeys.end(), e.key) != kNameListKeys.end()) {
        cfg.app_params.names[e.key] = tokens(e.value);
      } else {
        cfg.app_params.values[e.key] = parse_quantity(e.value);
      }
    });
  }
  if (cfg.app_name.empty()) {
    verr.add(0, "missing [application] app");
  } else {
    guard(app_line, [&] {
      if (cfg.app_name == "custom") {
        if (custom.name.empty()) custom.name = "custom";
        cfg.app = custom;
      } else {
        auto params = cfg.app_params;
        if ((cfg.app_name == "ddos" || cfg.app_name == "ratelimit") && !params.names.count("edges")) {
          std::vector<std::string> edges;
          for (auto s : cfg.topo.switches())
            if (cfg.topo.has_hosts(s)) edges.push_back(cfg.topo.node(s).name);
          params.names["edges"] = edges;
        }
        cfg.app = make_app(cfg.app_name, params);
      }
      const auto report = validate_application(cfg.app);
      for (const auto& v : report.violations) verr.add(app_line, fmt::format("{}: {}", v.element, v.message));
    });
  }

  // Embedding.
  for (const auto& e : sections["embedding"]) {
    guard(e.line, [&] {
      if (e.key == "replicas") {
        const auto c = std::stol(e.value);
        if (c < 1) throw ValidationError("replicas must be at least 1");
        cfg.replicas = static_cast<std::uint32_t>(c);
        const auto n = cfg.topo.switches().size();
        if (cfg.replicas > n) throw ValidationError(fmt::format("replicas C={} exceeds {} switches", cfg.replicas, n));
      } else if (e.key == "r_min") {
        cfg.r_min = parse_quantity(e.value);
        if (!(cfg.r_min > 0)) throw ValidationError("r_min must be positive");
      } else if (e.key == "trigger") {
        if (e.value == "time")
          cfg.trigger_mode = TriggerMode::TimePeriod;
        else if (e.value == "packet")
          cfg.trigger_mode = TriggerMode::PacketPeriod;
        else
          throw ParseError(fmt::format("unknown trigger mode '{}'", e.value));
      } else if (e.key == "weight") {
        const auto t = tokens(e.value);
        if (t.size() != 2) throw ParseError("weight needs NODE VALUE");
        const auto node = cfg.topo.require(t[0]);
        const double w = parse_quantity(t[1]);
        if (!(w >= 0)) throw ValidationError("weights must be non-negative");
        cfg.weights[node] = w;
      } else {
        throw ParseError(fmt::format("unknown key '{}'", e.key));
      }
    });
  }

  // Traffic.
  for (const auto& e : sections["traffic"]) {
    guard(e.line, [&] {
      if (e.key != "flow") throw ParseError(fmt::format("unknown key '{}'", e.key));
      const auto a = split_args(e.value);
      if (a.words.size() != 2) throw ParseError("flow needs SRC DST");
      FlowSpec f;
      f.src = cfg.topo.require(a.words[0]);
      f.dst = cfg.topo.require(a.words[1]);
      if (cfg.topo.node(f.src).kind != NodeKind::Host || cfg.topo.node(f.dst).kind != NodeKind::Host)
        throw ValidationError("flow endpoints must be hosts");
      f.size_bits = static_cast<std::uint32_t>(a.opt("size") ? std::stoul(*a.opt("size")) : 512);
      if (f.size_bits < 512) throw ValidationError("packet size must be at least 512 bits");
      const auto rate = a.opt("rate");
      if (!rate) throw ParseError("flow needs rate=");
      const double r = parse_quantity(*rate);
      f.rate_pps = rate->ends_with("pps") ? r : r / f.size_bits;
      if (!(f.rate_pps > 0)) throw ValidationError("flow rate must be positive");
      f.start_ns = seconds_to_ns(a.opt("start") ? parse_quantity(*a.opt("start")) : 0.0);
      f.stop_ns = seconds_to_ns(a.opt("stop") ? parse_quantity(*a.opt("stop")) : cfg.t_end);
      if (f.start_ns < 0 || f.stop_ns < f.start_ns) throw ValidationError("flow needs 0 <= start <= stop");
      if (auto fl = a.opt("flags")) {
        if (*fl == "syn")
          f.syn = true;
        else if (*fl != "none")
          throw ParseError(fmt::format("unknown flags '{}'", *fl));
      }
      f.name = a.opt("name").value_or(fmt::format("{}-{}-{}", a.words[0], a.words[1], cfg.flows.size()));
      cfg.flows.push_back(f);
    });
  }

  for (const auto& e : sections["loads"]) {
    guard(e.line, [&] {
      if (e.key != "load") throw ParseError(fmt::format("unknown key '{}'", e.key));
      const auto t = tokens(e.value);
      if (t.size() != 3) throw ParseError("load needs TARGET TIME VALUE");
      cfg.topo.require(t[0]);
      const double v = parse_quantity(t[2]);
      if (v < 0) throw ValidationError("load must be non-negative");
      cfg.loads.push_back({seconds_to_ns(parse_quantity(t[1])), t[0], static_cast<std::uint64_t>(std::llround(v * kLoadScale))});
    });
  }

  if (!perr.empty()) throw ParseError(perr.text());
  if (!verr.empty()) throw ValidationError(verr.text());
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open {}", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace loader
