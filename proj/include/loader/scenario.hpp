#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loader/apps.hpp"
#include "loader/sim.hpp"

namespace loader {

inline constexpr int kScenarioFormatVersion = 1;

/// Syntax errors. The message lists every offending line.
class ParseError : public Error {
 public:
  using Error::Error;
};

struct ScenarioConfig {
  std::string source;
  int format_version = kScenarioFormatVersion;
  std::uint64_t seed = 0;
  double t_end = 10.0;            // s
  double bin = 1.0;               // s
  double steady_fraction = 0.5;

  Topology topo;
  double controller_delay = 0.01; // s
  std::uint32_t queue_limit = 100;
  bool trace = false;

  std::string app_name;
  AppParams app_params;
  ApplicationSpec app;            // resolved

  std::uint32_t replicas = 1;
  TrafficWeights weights;
  double r_min = 100.0;           // packets/s
  TriggerMode trigger_mode = TriggerMode::TimePeriod;

  std::vector<FlowSpec> flows;
  std::vector<LoadSample> loads;

  SimConfig sim_config() const;
  DeployOptions deploy_options(std::uint32_t replica_count) const;
};

/// Number with an optional unit: s/ms/us/ns give seconds, pps gives 1/s,
/// bps/kbps/Mbps/Gbps give bits/s. Throws ParseError.
double parse_quantity(const std::string& text);

ScenarioConfig parse_scenario(const std::string& text, const std::string& source = "<memory>");
/// Throws ParseError or ValidationError, each naming the offending lines.
ScenarioConfig load_scenario(const std::string& path);

}  // namespace loader
