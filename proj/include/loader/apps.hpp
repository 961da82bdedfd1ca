#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "loader/app_model.hpp"

namespace loader {

/// CPU loads in [0, 1] are stored as integers in thousandths.
inline constexpr double kLoadScale = 1000.0;

/// One SYN-rate state per edge switch, summed and compared against R
/// (packets/s). `edges` names the target switch of each state.
ApplicationSpec make_ddos_app(std::uint32_t n, double threshold_pps, double epsilon_t,
                              const std::vector<std::string>& edges = {}, double delta = 0.1,
                              std::uint32_t window = 8);

/// Inbound bit-rate per edge, summed; drops with probability (s - R)/s.
ApplicationSpec make_rate_limiter_app(std::uint32_t n, double rate_bps, std::uint64_t epsilon_r,
                                      double max_write_rate, const std::vector<std::string>& edges = {},
                                      double delta = 0.1, std::uint32_t window = 8);

/// 2P link-load states: uplinks of `leaf` then downlinks of each spine
/// toward the destination leaf. New flows are pinned to the spine with the
/// least loaded uplink/downlink pair.
ApplicationSpec make_link_lb_app(std::uint32_t p, std::uint64_t epsilon_r = 10, double max_write_rate = 1e4,
                                 const std::string& leaf = {}, const std::vector<std::string>& spines = {},
                                 double delta = 0.1, std::uint32_t window = 8);

/// Injected CPU-load states per server; new flows go to the least loaded
/// server while the mean load stays within THR, else to the controller.
ApplicationSpec make_resource_lb_app(std::uint32_t n, double thr, std::uint64_t epsilon_r = 15,
                                     double max_write_rate = 100.0, const std::vector<std::string>& servers = {});

/// Numeric parameters in SI units plus node-name lists.
struct AppParams {
  std::map<std::string, double> values;
  std::map<std::string, std::vector<std::string>> names;

  double get(const std::string& key, double fallback) const;
  bool has(const std::string& key) const { return values.count(key) != 0; }
  std::vector<std::string> list(const std::string& key) const;
};

std::vector<std::string> app_names();
/// Throws ValidationError on an unknown name or a missing parameter.
ApplicationSpec make_app(const std::string& name, const AppParams& params);

}  // namespace loader
