#include "loader/experiment.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace loader {

ExperimentRun run_single(const ScenarioConfig& config, std::uint32_t replicas) {
  ExperimentRun run;
  run.replicas = replicas;
  auto dep = std::make_shared<Deployment>(deploy(config.topo, config.app, config.deploy_options(replicas)));
  run.deployment = dep;
  run.log = simulate(*dep, config.flows, config.loads, config.sim_config());
  return run;
}

namespace {
std::vector<std::uint32_t> sweep_or_default(const ScenarioConfig& config, const std::vector<std::uint32_t>& sweep) {
  return sweep.empty() ? std::vector<std::uint32_t>{config.replicas} : sweep;
}
}  // namespace

std::vector<ExperimentRun> run_experiment_serial(const ScenarioConfig& config, const std::vector<std::uint32_t>& sweep) {
  std::vector<ExperimentRun> out;
  for (auto c : sweep_or_default(config, sweep)) out.push_back(run_single(config, c));
  return out;
}

std::vector<ExperimentRun> run_experiment(const ScenarioConfig& config, const std::vector<std::uint32_t>& sweep) {
  const auto points = sweep_or_default(config, sweep);
  std::vector<ExperimentRun> out(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = run_single(config, points[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::pair<std::size_t, std::size_t> steady_window(const MetricsLog& log, double steady_fraction) {
  const auto bins = log.bins();
  const auto skip = static_cast<std::size_t>(static_cast<double>(bins) * (1.0 - steady_fraction) + 1e-9);
  return {std::min(skip, bins), bins};
}

double flow_throughput_bps(const MetricsLog& log, std::size_t flow, double steady_fraction) {
  const auto [lo, hi] = steady_window(log, steady_fraction);
  if (hi <= lo) return 0.0;
  std::uint64_t bits = 0;
  for (auto b = lo; b < hi; ++b) bits += log.flow_delivered_bits.at(flow)[b];
  return static_cast<double>(bits) / (static_cast<double>(hi - lo) * static_cast<double>(log.bin_ns) * 1e-9);
}

namespace {

struct RunMeta {
  std::uint32_t replicas = 0;
  std::string placement;
  double d_r = 0.0;
  double worst_pair_delay = 0.0;
  std::uint64_t register_bits = 0;
};

RunMeta meta_of(const ExperimentRun& run) {
  RunMeta m;
  m.replicas = run.replicas;
  const auto& dep = *run.deployment;
  for (auto n : dep.replicas) m.placement += (m.placement.empty() ? "" : "+") + dep.topo.node(n).name;
  bool first = true;
  for (const auto& [id, sp] : dep.plan.states) {
    if (first || sp.period.d_r < m.d_r) {
      m.d_r = sp.period.d_r;
      m.worst_pair_delay = sp.worst_pair_delay;
    }
    first = false;
  }
  for (const auto& [n, bits] : run.log.register_bits) m.register_bits = std::max(m.register_bits, bits);
  return m;
}

SummaryRow summarize_one(const MetricsLog& log, const std::vector<bool>& inter_switch, const RunMeta& meta,
                         double steady_fraction) {
  SummaryRow r;
  r.replicas = meta.replicas;
  r.placement = meta.placement;
  r.d_r = meta.d_r;
  r.worst_pair_delay = meta.worst_pair_delay;
  r.register_bits = meta.register_bits;
  const auto [lo, hi] = steady_window(log, steady_fraction);
  const double window_s = static_cast<double>(hi - lo) * static_cast<double>(log.bin_ns) * 1e-9;
  std::uint64_t data = 0, repl = 0;
  std::size_t counted = 0;
  double data_bps = 0, repl_bps = 0, data_util = 0, repl_util = 0;
  for (std::size_t i = 0; i < log.links.size(); ++i) {
    if (!inter_switch[i]) continue;
    const auto& l = log.links[i];
    std::uint64_t d = 0, p = 0;
    for (auto b = lo; b < hi; ++b) {
      d += l.data_bits[b];
      p += l.replication_bits[b];
    }
    data += d;
    repl += p;
    ++counted;
    if (window_s > 0) {
      data_bps += static_cast<double>(d) / window_s;
      repl_bps += static_cast<double>(p) / window_s;
      data_util += static_cast<double>(d) / window_s / static_cast<double>(l.capacity_bps);
      repl_util += static_cast<double>(p) / window_s / static_cast<double>(l.capacity_bps);
    }
  }
  if (counted > 0) {
    r.mean_data_bps = data_bps / static_cast<double>(counted);
    r.mean_replication_bps = repl_bps / static_cast<double>(counted);
    r.mean_data_util = data_util / static_cast<double>(counted);
    r.mean_replication_util = repl_util / static_cast<double>(counted);
  }
  r.replication_fraction = (data + repl) > 0 ? static_cast<double>(repl) / static_cast<double>(data + repl) : 0.0;
  r.detections = log.detections.size();
  std::map<NodeId, std::int64_t> first_by_node;
  for (const auto& d : log.detections)
    if (!first_by_node.count(d.node)) first_by_node[d.node] = d.t_ns;
  if (!first_by_node.empty()) {
    std::int64_t lo_t = first_by_node.begin()->second, hi_t = lo_t;
    for (const auto& [n, t] : first_by_node) {
      lo_t = std::min(lo_t, t);
      hi_t = std::max(hi_t, t);
    }
    r.first_detection = static_cast<double>(lo_t) * 1e-9;
    r.detection_spread = static_cast<double>(hi_t - lo_t) * 1e-9;
  }
  for (std::size_t f = 0; f < log.flow_delivered_bits.size(); ++f)
    r.aggregate_throughput_bps += flow_throughput_bps(log, f, steady_fraction);
  r.updates_emitted = log.updates_emitted;
  r.data_sent = log.data_sent;
  r.data_delivered = log.data_delivered;
  r.data_dropped = log.data_dropped;
  return r;
}

std::vector<bool> inter_switch_mask(const MetricsLog& log, const Topology& topo) {
  std::vector<bool> m;
  for (const auto& l : log.links) m.push_back(topo.is_switch(l.from) && topo.is_switch(l.to));
  return m;
}

void fill_ratios(std::vector<SummaryRow>& rows) {
  if (rows.empty()) return;
  const double base = rows.front().mean_data_bps;
  for (auto& r : rows) r.data_ratio_vs_first = r.mean_data_bps > 0 ? base / r.mean_data_bps : 0.0;
}

std::string seconds(std::int64_t ns) { return fmt::format("{:.9f}", static_cast<double>(ns) * 1e-9); }

std::string opt_seconds(const std::optional<double>& v) { return v ? fmt::format("{:.9f}", *v) : std::string(); }

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<ExperimentRun>& runs, double steady_fraction) {
  std::vector<SummaryRow> rows;
  for (const auto& run : runs)
    rows.push_back(summarize_one(run.log, inter_switch_mask(run.log, run.deployment->topo), meta_of(run), steady_fraction));
  fill_ratios(rows);
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string s =
      "replicas,placement,d_r_s,worst_pair_delay_s,mean_data_bps,mean_replication_bps,mean_data_util,"
      "mean_replication_util,replication_fraction,data_ratio_vs_first,detections,first_detection_s,"
      "detection_spread_s,aggregate_throughput_bps,register_bits,updates_emitted,data_sent,data_delivered,"
      "data_dropped\n";
  for (const auto& r : rows)
    s += fmt::format("{},{},{:.9f},{:.9f},{:.3f},{:.3f},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{},{:.3f},{},{},{},{},{}\n",
                     r.replicas, r.placement, r.d_r, r.worst_pair_delay, r.mean_data_bps, r.mean_replication_bps,
                     r.mean_data_util, r.mean_replication_util, r.replication_fraction, r.data_ratio_vs_first,
                     r.detections, opt_seconds(r.first_detection), opt_seconds(r.detection_spread),
                     r.aggregate_throughput_bps, r.register_bits, r.updates_emitted, r.data_sent, r.data_delivered,
                     r.data_dropped);
  return s;
}

std::string links_csv(const MetricsLog& log, const Topology& topo) {
  std::string s = "bin_start_s,link,from,to,inter_switch,capacity_bps,data_bits,replication_bits,total_bits\n";
  for (std::size_t b = 0; b < log.bins(); ++b)
    for (const auto& l : log.links)
      s += fmt::format("{},{},{},{},{},{},{},{},{}\n", seconds(static_cast<std::int64_t>(b) * log.bin_ns), l.link,
                       topo.node(l.from).name, topo.node(l.to).name,
                       topo.is_switch(l.from) && topo.is_switch(l.to) ? 1 : 0, l.capacity_bps, l.data_bits[b],
                       l.replication_bits[b], l.data_bits[b] + l.replication_bits[b]);
  return s;
}

std::string detections_csv(const MetricsLog& log, const Topology& topo) {
  std::string s = "time_s,node,trigger\n";
  for (const auto& d : log.detections) s += fmt::format("{},{},{}\n", seconds(d.t_ns), topo.node(d.node).name, d.trigger);
  return s;
}

std::string drops_csv(const MetricsLog& log, const Topology& topo) {
  std::string s = "reason,node,count\n";
  for (const auto& [key, count] : log.drops) s += fmt::format("{},{},{}\n", key.first, topo.node(key.second).name, count);
  return s;
}

std::string throughput_csv(const MetricsLog& log) {
  std::string s = "bin_start_s,flow,delivered_bits,throughput_bps\n";
  const double bin_s = static_cast<double>(log.bin_ns) * 1e-9;
  for (std::size_t b = 0; b < log.bins(); ++b)
    for (std::size_t f = 0; f < log.flow_names.size(); ++f)
      s += fmt::format("{},{},{},{:.3f}\n", seconds(static_cast<std::int64_t>(b) * log.bin_ns), log.flow_names[f],
                       log.flow_delivered_bits[f][b], static_cast<double>(log.flow_delivered_bits[f][b]) / bin_s);
  return s;
}

std::string staleness_csv(const MetricsLog& log, const Topology& topo) {
  std::string s = "node,origin,state_id,updates_applied,max_age_s,max_write_lag\n";
  for (const auto& [key, rec] : log.staleness) {
    const auto& [node, origin, state] = key;
    s += fmt::format("{},{},{},{},{},{}\n", topo.node(node).name, topo.node(origin).name, state, rec.updates_applied,
                     seconds(rec.max_age_ns), rec.max_write_lag);
  }
  return s;
}

std::string states_csv(const MetricsLog& log, const Topology& topo) {
  std::string s = "time_s,node,name,value\n";
  for (const auto& st : log.states) s += fmt::format("{},{},{},{}\n", seconds(st.t_ns), topo.node(st.node).name, st.name, st.value);
  return s;
}

std::string notifications_csv(const MetricsLog& log, const Topology& topo) {
  std::string s = "sent_s,received_s,node,message\n";
  for (const auto& n : log.notifications)
    s += fmt::format("{},{},{},\"{}\"\n", seconds(n.sent_ns), seconds(n.received_ns), topo.node(n.node).name, n.message);
  return s;
}

std::string plan_text(const Deployment& dep) {
  const auto& topo = dep.topo;
  std::string s = to_text(dep.program);
  std::string names;
  for (auto n : dep.replicas) names += (names.empty() ? "" : " ") + topo.node(n).name;
  s += fmt::format("replicas {}\n", names);
  s += fmt::format("folded {}\n", dep.folded ? 1 : 0);
  for (const auto& e : dep.plan.tree)
    s += fmt::format("tree {} {} link={}\n", topo.node(e.a).name, topo.node(e.b).name, e.link);
  for (const auto& [id, sp] : dep.plan.states)
    s += fmt::format("period state={} d_r_s={:.9f} worst_pair_delay_s={:.9f} tau_s={:.9f} p={} mode={}\n", id, sp.period.d_r,
                     sp.worst_pair_delay, sp.period.tau_r, sp.period.p,
                     sp.mode == TriggerMode::TimePeriod ? "time" : sp.mode == TriggerMode::PacketPeriod ? "packet" : "none");
  for (const auto& [id, owner] : dep.owner) s += fmt::format("owner state={} node={}\n", id, topo.node(owner).name);
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path));
  out << text;
}

void write_run(const ExperimentRun& run, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto& topo = run.deployment->topo;
  const auto& log = run.log;
  write_text(dir + "/links.csv", links_csv(log, topo));
  write_text(dir + "/detections.csv", detections_csv(log, topo));
  write_text(dir + "/drops.csv", drops_csv(log, topo));
  write_text(dir + "/throughput.csv", throughput_csv(log));
  write_text(dir + "/staleness.csv", staleness_csv(log, topo));
  write_text(dir + "/states.csv", states_csv(log, topo));
  write_text(dir + "/notifications.csv", notifications_csv(log, topo));
  write_text(dir + "/plan.txt", plan_text(*run.deployment));
  const auto m = meta_of(run);
  write_text(dir + "/run_info.csv",
             fmt::format("key,value\nreplicas,{}\nplacement,{}\nd_r_s,{:.9f}\nworst_pair_delay_s,{:.9f}\n"
                         "register_bits,{}\nupdates_emitted,{}\ndata_sent,{}\ndata_delivered,{}\ndata_dropped,{}\n"
                         "t_end_ns,{}\nbin_ns,{}\n",
                         m.replicas, m.placement, m.d_r, m.worst_pair_delay, m.register_bits, log.updates_emitted,
                         log.data_sent, log.data_delivered, log.data_dropped, log.t_end_ns, log.bin_ns));
  if (!log.trace.empty()) write_text(dir + "/trace.txt", log.trace);
}

namespace {

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot read {}", path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);   // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char ch : line) {
      if (ch == '"') {
        quoted = !quoted;
      } else if (ch == ',' && !quoted) {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += ch;
      }
    }
    cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::vector<SummaryRow> summarize_directory(const std::string& dir, double steady_fraction) {
  std::vector<std::string> run_dirs;
  if (std::filesystem::exists(dir + "/run_info.csv")) run_dirs.push_back(dir);
  if (run_dirs.empty()) {
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_directory() && std::filesystem::exists(e.path() / "run_info.csv")) run_dirs.push_back(e.path().string());
  }
  if (run_dirs.empty()) throw Error(fmt::format("no run directories under {}", dir));

  struct Loaded {
    RunMeta meta;
    MetricsLog log;
    std::vector<bool> inter;
  };
  std::vector<Loaded> loaded;
  for (const auto& rd : run_dirs) {
    Loaded L;
    std::map<std::string, std::string> info;
    for (const auto& row : read_csv(rd + "/run_info.csv"))
      if (row.size() >= 2) info[row[0]] = row[1];
    L.meta.replicas = static_cast<std::uint32_t>(std::stoul(info.at("replicas")));
    L.meta.placement = info.at("placement");
    L.meta.d_r = std::stod(info.at("d_r_s"));
    L.meta.worst_pair_delay = std::stod(info.at("worst_pair_delay_s"));
    L.meta.register_bits = std::stoull(info.at("register_bits"));
    L.log.updates_emitted = std::stoull(info.at("updates_emitted"));
    L.log.data_sent = std::stoull(info.at("data_sent"));
    L.log.data_delivered = std::stoull(info.at("data_delivered"));
    L.log.data_dropped = std::stoull(info.at("data_dropped"));
    L.log.t_end_ns = std::stoll(info.at("t_end_ns"));
    L.log.bin_ns = std::stoll(info.at("bin_ns"));
    const auto bins = L.log.bins();

    std::map<std::tuple<std::uint32_t, std::string, std::string>, std::size_t> link_index;
    for (const auto& row : read_csv(rd + "/links.csv")) {
      const auto key = std::make_tuple(static_cast<std::uint32_t>(std::stoul(row[1])), row[2], row[3]);
      auto it = link_index.find(key);
      if (it == link_index.end()) {
        it = link_index.emplace(key, L.log.links.size()).first;
        LinkSeries s;
        s.link = std::get<0>(key);
        s.capacity_bps = std::stoull(row[5]);
        s.data_bits.assign(bins, 0);
        s.replication_bits.assign(bins, 0);
        L.log.links.push_back(std::move(s));
        L.inter.push_back(row[4] == "1");
      }
      const auto b = static_cast<std::size_t>(std::stod(row[0]) * 1e9 / static_cast<double>(L.log.bin_ns) + 0.5);
      L.log.links[it->second].data_bits.at(b) = std::stoull(row[6]);
      L.log.links[it->second].replication_bits.at(b) = std::stoull(row[7]);
    }
    std::map<std::string, NodeId> node_ids;
    for (const auto& row : read_csv(rd + "/detections.csv")) {
      const auto id = node_ids.emplace(row[1], static_cast<NodeId>(node_ids.size())).first->second;
      L.log.detections.push_back({static_cast<std::int64_t>(std::stod(row[0]) * 1e9 + 0.5), id, row[2]});
    }
    std::map<std::string, std::size_t> flow_ids;
    for (const auto& row : read_csv(rd + "/throughput.csv")) {
      auto it = flow_ids.find(row[1]);
      if (it == flow_ids.end()) {
        it = flow_ids.emplace(row[1], L.log.flow_names.size()).first;
        L.log.flow_names.push_back(row[1]);
        L.log.flow_delivered_bits.emplace_back(bins, 0);
      }
      const auto b = static_cast<std::size_t>(std::stod(row[0]) * 1e9 / static_cast<double>(L.log.bin_ns) + 0.5);
      L.log.flow_delivered_bits[it->second].at(b) = std::stoull(row[2]);
    }
    loaded.push_back(std::move(L));
  }
  std::sort(loaded.begin(), loaded.end(), [](const Loaded& a, const Loaded& b) { return a.meta.replicas < b.meta.replicas; });
  std::vector<SummaryRow> rows;
  for (const auto& L : loaded) rows.push_back(summarize_one(L.log, L.inter, L.meta, steady_fraction));
  fill_ratios(rows);
  return rows;
}

}  // namespace loader
