#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "loader/scenario.hpp"

namespace loader {

struct ExperimentRun {
  std::uint32_t replicas = 0;
  std::shared_ptr<const Deployment> deployment;
  MetricsLog log;
};

/// One independent simulation per C (default: the scenario's C), same seed.
/// Sweep points run in parallel; results come back in sweep order.
std::vector<ExperimentRun> run_experiment(const ScenarioConfig& config, const std::vector<std::uint32_t>& sweep = {});
/// Serial reference of run_experiment.
std::vector<ExperimentRun> run_experiment_serial(const ScenarioConfig& config,
                                                 const std::vector<std::uint32_t>& sweep = {});

ExperimentRun run_single(const ScenarioConfig& config, std::uint32_t replicas);

struct SummaryRow {
  std::uint32_t replicas = 0;
  std::string placement;                 // replica names joined by '+'
  double d_r = 0.0;                      // s, tightest replicated state
  double worst_pair_delay = 0.0;         // s
  double mean_data_bps = 0.0;            // per inter-switch link direction
  double mean_replication_bps = 0.0;
  double mean_data_util = 0.0;           // fraction of capacity
  double mean_replication_util = 0.0;
  double replication_fraction = 0.0;     // replication / total bits
  double data_ratio_vs_first = 0.0;      // first row's mean data load / this row's
  std::size_t detections = 0;
  std::optional<double> first_detection; // s
  std::optional<double> detection_spread;// s, last minus first replica detection
  double aggregate_throughput_bps = 0.0; // delivered, all flows
  std::uint64_t register_bits = 0;       // max over replica switches
  std::uint64_t updates_emitted = 0;
  std::uint64_t data_sent = 0;
  std::uint64_t data_delivered = 0;
  std::uint64_t data_dropped = 0;
};

/// Steady-state window: the last `steady_fraction` of the bins.
std::pair<std::size_t, std::size_t> steady_window(const MetricsLog& log, double steady_fraction);

/// Delivered bits/s of one flow over the steady window.
double flow_throughput_bps(const MetricsLog& log, std::size_t flow, double steady_fraction);

std::vector<SummaryRow> summarize(const std::vector<ExperimentRun>& runs, double steady_fraction);

std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Writes links, detections, drops, throughput, staleness, states and
/// notifications CSVs plus plan.txt into `dir`.
void write_run(const ExperimentRun& run, const std::string& dir);
void write_text(const std::string& path, const std::string& text);

/// Rebuilds the summary from run directories written by write_run.
std::vector<SummaryRow> summarize_directory(const std::string& dir, double steady_fraction);

std::string links_csv(const MetricsLog& log, const Topology& topo);
std::string detections_csv(const MetricsLog& log, const Topology& topo);
std::string drops_csv(const MetricsLog& log, const Topology& topo);
std::string throughput_csv(const MetricsLog& log);
std::string staleness_csv(const MetricsLog& log, const Topology& topo);
std::string states_csv(const MetricsLog& log, const Topology& topo);
std::string notifications_csv(const MetricsLog& log, const Topology& topo);
std::string plan_text(const Deployment& dep);

}  // namespace loader
