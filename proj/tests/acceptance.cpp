// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

#include "loader/apps.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace loader {
namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

int failures = 0;

void report(int n, const std::string& title, const std::function<Verdict()>& check) {
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  if (!v.pass) ++failures;
  fmt::print("{} criterion {}: {}{}\n", v.pass ? "PASS" : "FAIL", n, title, v.detail.empty() ? "" : " [" + v.detail + "]");
  std::fflush(stdout);
}

ScenarioConfig scenario(const std::string& name) { return load_scenario(testing::scenario_path(name)); }

std::optional<std::int64_t> first_detection(const MetricsLog& log, NodeId node) {
  for (const auto& d : log.detections)
    if (d.node == node) return d.t_ns;
  return std::nullopt;
}

const StatePlan& tightest(const Deployment& dep) {
  const StatePlan* best = nullptr;
  for (const auto& [id, sp] : dep.plan.states)
    if (!best || sp.period.d_r < best->period.d_r) best = &sp;
  if (!best) throw Error("no replicated state");
  return *best;
}

// 1. Both replicas detect, within the replication slack of each other.
Verdict coherent_detection() {
  Verdict v;
  const auto cfg = scenario("fig7_ddos_c2");
  const auto start = std::chrono::steady_clock::now();
  const auto run = run_single(cfg, 2);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& topo = cfg.topo;
  const auto sw1 = topo.require("SW1"), sw3 = topo.require("SW3");
  const auto t1 = first_detection(run.log, sw1), t3 = first_detection(run.log, sw3);
  v.require(t1.has_value(), "SW1 never fired");
  v.require(t3.has_value(), "SW3 never fired");
  v.require(wall < 10.0, fmt::format("wall clock {:.2f}s", wall));
  if (!t1 || !t3) return v;
  v.require(*t1 >= 20 * kNsPerSec && *t3 >= 20 * kNsPerSec, "detection before the attack");
  const auto& plan = tightest(*run.deployment);
  // Slowest observed data inter-arrival at either replica in the detection bin.
  const auto bin = static_cast<std::size_t>(std::max(*t1, *t3) / run.log.bin_ns);
  const auto gap = std::max(run.log.max_gap_ns.at(sw1).at(bin), run.log.max_gap_ns.at(sw3).at(bin));
  const double bound = plan.period.d_r + plan.worst_pair_delay + static_cast<double>(gap) * 1e-9;
  const double spread = std::abs(static_cast<double>(*t1 - *t3)) * 1e-9;
  v.require(spread <= bound, fmt::format("spread {:.6f}s > bound {:.6f}s", spread, bound));
  v.detail += fmt::format("{}t_SW1={:.6f}s t_SW3={:.6f}s spread={:.6f}s bound={:.6f}s wall={:.2f}s",
                          v.detail.empty() ? "" : "; ", *t1 * 1e-9, *t3 * 1e-9, spread, bound, wall);
  return v;
}

std::vector<SummaryRow> fig7_rows() {
  static const std::vector<SummaryRow> rows = [] {
    const auto cfg = scenario("fig7_ddos_c2");
    return summarize(run_experiment(cfg, {1, 2, 4}), cfg.steady_fraction);
  }();
  return rows;
}

// 2. Data load drops 1.4-1.8x from C=1 to C=2 and a further 10-30% at C=4.
Verdict data_reduction() {
  Verdict v;
  const auto rows = fig7_rows();
  const double ratio = rows[0].mean_data_bps / rows[1].mean_data_bps;
  const double further = 1.0 - rows[2].mean_data_bps / rows[1].mean_data_bps;
  v.require(ratio >= 1.4 && ratio <= 1.8, fmt::format("C1/C2 ratio {:.3f}", ratio));
  v.require(further >= 0.10 && further <= 0.30, fmt::format("C4 reduction {:.3f}", further));
  v.detail += fmt::format("{}C1/C2={:.3f} (target 1.6), C4 vs C2=-{:.1f}% (target ~20%)", v.detail.empty() ? "" : "; ",
                          ratio, 100 * further);
  return v;
}

// 3. Replication share of all inter-switch bits.
Verdict replication_overhead() {
  Verdict v;
  const auto rows = fig7_rows();
  const double f1 = rows[0].replication_fraction, f2 = rows[1].replication_fraction, f4 = rows[2].replication_fraction;
  v.require(f1 == 0.0, fmt::format("C=1 fraction {:.4f}", f1));
  v.require(f2 >= 0.08 && f2 <= 0.18, fmt::format("C=2 fraction {:.4f}", f2));
  v.require(f4 >= 0.18 && f4 <= 0.30, fmt::format("C=4 fraction {:.4f}", f4));
  v.detail += fmt::format("{}C1={:.1f}% C2={:.1f}% C4={:.1f}%", v.detail.empty() ? "" : "; ", 100 * f1, 100 * f2,
                          100 * f4);
  return v;
}

// 4. Aggregate rate converges to 8 Mb/s without starving either flow.
Verdict rate_limiting() {
  Verdict v;
  const auto cfg = scenario("fig8_ratelimit");
  const auto run = run_single(cfg, cfg.replicas);
  double total = 0;
  std::string per_flow;
  for (std::size_t f = 0; f < run.log.flow_names.size(); ++f) {
    const double bps = flow_throughput_bps(run.log, f, cfg.steady_fraction);
    total += bps;
    per_flow += fmt::format(" {}={:.3f}Mb/s", run.log.flow_names[f], bps / 1e6);
    v.require(bps >= 2e6, fmt::format("{} starved", run.log.flow_names[f]));
  }
  v.require(std::abs(total - 8e6) <= 0.15 * 8e6, fmt::format("aggregate {:.3f}Mb/s", total / 1e6));
  v.detail += fmt::format("{}aggregate={:.3f}Mb/s{}", v.detail.empty() ? "" : "; ", total / 1e6, per_flow);
  return v;
}

// 5a. Solver output satisfies its inequality for random tuples.
void solver_tuples(Verdict& v) {
  testing::Gen g(5005);
  int solved = 0, violations = 0;
  for (int c = 0; c < 100; ++c) {
    const double delay = g.uniform(0, 5e-4);
    const double r_min = g.uniform(100, 1e5);
    const bool time = g.coin();
    const auto spec = time ? InconsistencySpec::time_obsolescence(g.uniform(1e-4, 2e-2))
                           : InconsistencySpec::update_error(g.range(1, 50), g.uniform(100, 2e4));
    try {
      const auto p = solve_replication_period(spec, delay, r_min);
      ++solved;
      const double lhs = time ? p.d_r + delay : (p.d_r + delay) * spec.max_write_rate;
      const double rhs = time ? spec.epsilon_t : static_cast<double>(spec.epsilon_r);
      if (lhs > rhs * (1 + 1e-12) || p.tau_r + 1.0 / r_min > p.d_r * (1 + 1e-12) ||
          static_cast<double>(p.p) / r_min > p.d_r * (1 + 1e-12))
        ++violations;
    } catch (const InfeasibleBudget&) {
    }
  }
  v.require(violations == 0, fmt::format("{} solver violations", violations));
  v.require(solved >= 50, fmt::format("only {} feasible tuples", solved));
  v.detail += fmt::format("{}solver: {} feasible tuples, {} violations", v.detail.empty() ? "" : "; ", solved, violations);
}

// 5b. Measured staleness stays within d_r + wpd + 1/r_min on runs where
// every replica sees at least r_min packets/s and no queue drops occur.
void measured_staleness(Verdict& v) {
  testing::Gen g(5006);
  int checked = 0, violations = 0, lag_violations = 0;
  for (int c = 0; c < 12; ++c) {
    const auto delay = static_cast<std::int64_t>(g.range(20, 400)) * 1000;
    auto topo = testing::ring_topology(delay, 100'000'000);
    const bool ddos = g.coin();
    const double r_min = g.uniform(200, 800);
    ApplicationSpec app;
    if (ddos)
      app = make_ddos_app(4, 1e12, 0.005 + 2.0 * static_cast<double>(delay) * 1e-9 + 2.0 / r_min,
                          {"SW1", "SW2", "SW3", "SW4"});
    else
    {
      // Transit packets write too: 12 flows at 1.2 r_min plus one phase burst
      // per flow stay under 20 r_min. The budget leaves d_r >= 3/r_min.
      const double max_rate = 20.0 * r_min;
      const auto eps = static_cast<std::uint64_t>(std::ceil(max_rate * (3.0 / r_min + 4.0 * static_cast<double>(delay) * 1e-9)));
      app = make_rate_limiter_app(4, 1e12, eps, max_rate, {"SW1", "SW2", "SW3", "SW4"});
    }
    DeployOptions opt;
    opt.embedding.replicas = static_cast<std::uint32_t>(g.range(2, 4));
    opt.r_min = r_min;
    opt.trigger_mode = g.coin() ? TriggerMode::TimePeriod : TriggerMode::PacketPeriod;
    const auto dep = deploy(topo, app, opt);
    std::vector<FlowSpec> flows;
    // Each flow alone exceeds r_min at its ingress switch; phases are staggered
    // so arrivals do not bunch.
    for (NodeId a = 0; a < 4; ++a)
      for (NodeId s = 8; s < 11; ++s)
        flows.push_back({fmt::format("f{}{}", a, s), 4 + a, s, 1.2 * r_min, 512,
                         static_cast<std::int64_t>(g.range(0, 1'000'000)), 5 * kNsPerSec, true});
    SimConfig sc;
    sc.t_end_ns = 5 * kNsPerSec;
    sc.seed = g.next();
    const auto log = simulate(dep, flows, {}, sc);
    std::int64_t worst_gap = 0;
    for (auto r : dep.replicas)
      for (auto gap : log.max_gap_ns.at(r)) worst_gap = std::max(worst_gap, gap);
    const bool saturated = log.data_dropped > 0;
    if (saturated || static_cast<double>(worst_gap) * 1e-9 > 1.0 / r_min) continue;
    ++checked;
    const auto& plan = tightest(dep);
    const double bound = plan.period.d_r + plan.worst_pair_delay + 1.0 / r_min;
    for (const auto& [key, rec] : log.staleness) {
      if (static_cast<double>(rec.max_age_ns) * 1e-9 > bound) ++violations;
      if (!ddos && rec.max_write_lag > app.triggers[0].inconsistency.epsilon_r) ++lag_violations;
    }
  }
  v.require(checked >= 6, fmt::format("only {} runs respected r_min", checked));
  v.require(violations == 0, fmt::format("{} staleness violations", violations));
  v.require(lag_violations == 0, fmt::format("{} write-lag violations", lag_violations));
  v.detail += fmt::format("; simulation: {} runs checked, {} staleness and {} write-lag violations", checked,
                          violations, lag_violations);
}

// 5c. The shipped rate-limiter scenario keeps its write lag within epsilon_r.
void shipped_write_lag(Verdict& v) {
  const auto cfg = scenario("fig8_ratelimit");
  const auto run = run_single(cfg, cfg.replicas);
  const auto eps = cfg.app.triggers.at(0).inconsistency.epsilon_r;
  std::uint64_t worst = 0;
  for (const auto& [key, rec] : run.log.staleness) worst = std::max(worst, rec.max_write_lag);
  v.require(worst <= eps, fmt::format("fig8 write lag {} > {}", worst, eps));
  v.detail += fmt::format("; fig8: write lag {} <= {}", worst, eps);
}

Verdict consistency_bounds() {
  Verdict v;
  solver_tuples(v);
  measured_staleness(v);
  shipped_write_lag(v);
  return v;
}

// 6. Wire round trips, exact lengths, golden vectors.
Verdict wire_format() {
  Verdict v;
  testing::Gen g(6006);
  int bad = 0;
  for (int c = 0; c < 1000; ++c) {
    const auto k = g.range(1, 8);
    std::vector<UpdateHeader> hs;
    for (std::uint64_t i = 0; i < k; ++i)
      hs.push_back({static_cast<std::uint32_t>(g.next()), static_cast<std::uint32_t>(g.next()),
                    static_cast<std::uint32_t>(g.next()), static_cast<std::uint32_t>(g.next()), g.next(), 0});
    auto inner = static_cast<std::uint16_t>(g.next());
    if (inner == kLoaderEthType) inner = kIpEthType;
    const auto bits = encode_update(hs, inner);
    const auto dec = decode_update(bits);
    bool ok = bits.bit_length == kUpdateHeaderBits * k && dec.headers.size() == k && dec.residual_type == inner;
    for (std::uint64_t i = 0; ok && i < k; ++i) {
      auto h = hs[i];
      h.l3_protocol_type = i + 1 < k ? kLoaderEthType : inner;
      ok = dec.headers[i] == h;
    }
    bad += !ok;
  }
  const std::vector<UpdateHeader> golden{{1, 2, 3, 4, 0x1122334455667788ull, 0}};
  const auto hex = to_hex(encode_update(golden, kIpEthType));
  v.require(hex == "0000000100000002000000030000000411223344556677880800", "golden vector changed: " + hex);
  v.require(bad == 0, fmt::format("{} round-trip failures", bad));
  v.detail += fmt::format("{}1000 stacks, {} failures", v.detail.empty() ? "" : "; ", bad);
  return v;
}

// 7. Heuristics against exhaustive oracles.
Verdict oracle_equivalence() {
  Verdict v;
  testing::Gen g(7007);
  int steiner_bad = 0, between_bad = 0, lb_bad = 0;
  for (int c = 0; c < 100; ++c) {
    const auto n = static_cast<std::uint32_t>(g.range(3, 8));
    const auto topo = testing::random_topology(g, n);
    auto sws = topo.switches();
    for (std::size_t i = sws.size() - 1; i > 0; --i) std::swap(sws[i], sws[g.range(0, i)]);
    const std::vector<NodeId> terms(sws.begin(), sws.begin() + static_cast<long>(g.range(2, std::min<std::uint64_t>(4, n))));
    const auto tree = steiner_tree(topo, terms);
    if (!testing::is_spanning_tree(tree, terms) || tree_cost(topo, tree) > 2 * testing::exhaustive_steiner(topo, terms))
      ++steiner_bad;
  }
  for (int c = 0; c < 100; ++c) {
    const auto topo = testing::random_topology(g, static_cast<std::uint32_t>(g.range(2, 6)));
    TrafficWeights w;
    for (auto s : topo.switches()) w[s] = static_cast<double>(g.range(1, 4));
    const auto fast = weighted_betweenness(topo, w);
    const auto oracle = testing::brute_betweenness(topo, w);
    for (auto s : topo.switches())
      if (std::abs(fast[s] - oracle[s]) > 1e-9 * std::max(1.0, oracle[s])) {
        ++between_bad;
        break;
      }
  }
  for (int c = 0; c < 1000; ++c) {
    const auto p = g.range(1, 8);
    std::vector<std::uint64_t> ul(p), dl(p);
    for (auto& x : ul) x = g.range(0, 1000);
    for (auto& x : dl) x = g.range(0, 1000);
    auto all = ul;
    all.insert(all.end(), dl.begin(), dl.end());
    lb_bad += apply_reduction(ReductionPrimitive::MinMaxArgMin, all) != testing::brute_argmin_of_max(ul, dl);
  }
  v.require(steiner_bad == 0, fmt::format("{} Steiner violations", steiner_bad));
  v.require(between_bad == 0, fmt::format("{} betweenness mismatches", between_bad));
  v.require(lb_bad == 0, fmt::format("{} link-LB mismatches", lb_bad));
  v.detail += fmt::format("{}steiner 100/100, betweenness 100/100, link-LB 1000/1000 checked", v.detail.empty() ? "" : "; ");
  return v;
}

// 8. A(C+1) bits of replicated-state registers per replica switch.
Verdict memory_accounting() {
  Verdict v;
  auto cfg = scenario("fig7_ddos_c2");
  cfg.t_end = 1;
  std::string seen;
  for (std::uint32_t c : {1u, 2u, 4u}) {
    const auto log = run_single(cfg, c).log;
    v.require(log.register_bits.size() == c, fmt::format("C={} reports {} switches", c, log.register_bits.size()));
    for (const auto& [node, bits] : log.register_bits)
      v.require(bits == 32u * (c + 1), fmt::format("C={} {}: {} bits", c, cfg.topo.node(node).name, bits));
    seen += fmt::format(" C={}:{}", c, log.register_bits.empty() ? 0 : log.register_bits.begin()->second);
  }
  v.detail += (v.detail.empty() ? "" : "; ") + std::string("bits") + seen;
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 9. Same seed, same bytes, for every shipped scenario.
Verdict determinism() {
  Verdict v;
  const auto base = std::filesystem::temp_directory_path() / "loader_acceptance_determinism";
  std::filesystem::remove_all(base);
  int scenarios = 0, files = 0;
  for (const auto& e : std::filesystem::directory_iterator(LOADER_SCENARIO_DIR)) {
    if (e.path().extension() != ".scn") continue;
    ++scenarios;
    const auto cfg = load_scenario(e.path().string());
    const auto stem = e.path().stem().string();
    for (const char* tag : {"a", "b"}) {
      const auto run = run_single(cfg, cfg.replicas);
      write_run(run, (base / stem / tag).string());
      write_text((base / stem / tag / "summary.csv").string(), summary_csv(summarize({run}, cfg.steady_fraction)));
    }
    for (const auto& f : std::filesystem::directory_iterator(base / stem / "a")) {
      ++files;
      v.require(slurp(f.path()) == slurp(base / stem / "b" / f.path().filename()),
                stem + "/" + f.path().filename().string() + " differs");
    }
  }
  std::filesystem::remove_all(base);
  v.require(scenarios >= 2, "no shipped scenarios found");
  v.detail += fmt::format("{}{} scenarios, {} files compared", v.detail.empty() ? "" : "; ", scenarios, files);
  return v;
}

}  // namespace
}  // namespace loader

int main() {
  using namespace loader;
  report(1, "coherent distributed detection on fig7_ddos_c2", coherent_detection);
  report(2, "data-traffic reduction with replication", data_reduction);
  report(3, "replication-overhead growth", replication_overhead);
  report(4, "distributed rate limiting converges to 8 Mb/s", rate_limiting);
  report(5, "consistency-bound enforcement", consistency_bounds);
  report(6, "wire-format conformance", wire_format);
  report(7, "oracle equivalence", oracle_equivalence);
  report(8, "memory accounting A(C+1)", memory_accounting);
  report(9, "determinism of shipped scenarios", determinism);
  return failures == 0 ? 0 : 1;
}
