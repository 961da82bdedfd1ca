#pragma once
// Independent reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "loader/embedding.hpp"

namespace loader::testing {

// Brute force: enumerate every simple path between each unordered pair of
// host-attached switches, keep the shortest ones, credit each node on them.
inline std::vector<double> brute_betweenness(const Topology& topo, const TrafficWeights& w) {
  auto weight = [&](NodeId n) { return w.count(n) ? w.at(n) : 1.0; };
  std::vector<double> score(topo.size(), 0.0);
  const auto sws = topo.switches();
  for (std::size_t i = 0; i < sws.size(); ++i)
    for (std::size_t j = i + 1; j < sws.size(); ++j) {
      const auto s = sws[i], t = sws[j];
      if (!topo.has_hosts(s) || !topo.has_hosts(t)) continue;
      std::vector<std::vector<NodeId>> paths;
      std::vector<std::int64_t> lengths;
      std::vector<NodeId> cur{s};
      std::vector<bool> seen(topo.size(), false);
      seen[s] = true;
      std::function<void(NodeId, std::int64_t)> dfs = [&](NodeId u, std::int64_t len) {
        if (u == t) {
          paths.push_back(cur);
          lengths.push_back(len);
          return;
        }
        for (const auto& p : topo.ports(u)) {
          if (!topo.is_switch(p.peer) || seen[p.peer]) continue;
          seen[p.peer] = true;
          cur.push_back(p.peer);
          dfs(p.peer, len + topo.links()[p.link].delay_ns);
          cur.pop_back();
          seen[p.peer] = false;
        }
      };
      dfs(s, 0);
      const auto best = *std::min_element(lengths.begin(), lengths.end());
      const double count = static_cast<double>(std::count(lengths.begin(), lengths.end(), best));
      for (std::size_t k = 0; k < paths.size(); ++k)
        if (lengths[k] == best)
          for (auto v : paths[k]) score[v] += weight(s) * weight(t) / count;
    }
  return score;
}

inline std::int64_t exhaustive_steiner(const Topology& topo, const std::vector<NodeId>& terminals) {
  const auto sws = topo.switches();
  std::int64_t best = kUnreachable;
  for (std::uint32_t mask = 0; mask < (1u << sws.size()); ++mask) {
    std::vector<bool> in(topo.size(), false);
    for (std::size_t i = 0; i < sws.size(); ++i) in[sws[i]] = (mask >> i) & 1;
    if (!std::all_of(terminals.begin(), terminals.end(), [&](NodeId t) { return in[t]; })) continue;
    std::vector<std::uint32_t> order(topo.links().size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](auto x, auto y) { return topo.links()[x].delay_ns < topo.links()[y].delay_ns; });
    std::vector<NodeId> parent(topo.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<NodeId(NodeId)> root = [&](NodeId x) { return parent[x] == x ? x : parent[x] = root(parent[x]); };
    std::int64_t cost = 0;
    std::size_t joined = 0;
    for (auto l : order) {
      const auto& L = topo.links()[l];
      if (!in[L.a] || !in[L.b]) continue;
      const auto ra = root(L.a), rb = root(L.b);
      if (ra == rb) continue;
      parent[ra] = rb;
      cost += L.delay_ns;
      ++joined;
    }
    const auto members = static_cast<std::size_t>(std::count(in.begin(), in.end(), true));
    if (joined + 1 == members) best = std::min(best, cost);
  }
  return best;
}

inline bool is_spanning_tree(const SteinerTree& tree, const std::vector<NodeId>& terminals) {
  std::set<NodeId> touched;
  for (const auto& e : tree) {
    touched.insert(e.a);
    touched.insert(e.b);
  }
  if (tree.empty()) return terminals.size() <= 1;
  if (tree.size() + 1 != touched.size()) return false;
  // |E| = |V| - 1 plus connectivity makes it a tree.
  std::map<NodeId, NodeId> parent;
  for (auto n : touched) parent[n] = n;
  std::function<NodeId(NodeId)> root = [&](NodeId x) { return parent[x] == x ? x : parent[x] = root(parent[x]); };
  for (const auto& e : tree) parent[root(e.a)] = root(e.b);
  const auto r = root(*touched.begin());
  for (auto n : touched)
    if (root(n) != r) return false;
  return std::all_of(terminals.begin(), terminals.end(), [&](NodeId t) { return touched.count(t); });
}

// Two passes: the smallest pairwise max, then the first spine reaching it.
inline std::uint64_t brute_argmin_of_max(const std::vector<std::uint64_t>& ul, const std::vector<std::uint64_t>& dl) {
  std::uint64_t lowest = UINT64_MAX;
  for (std::size_t i = 0; i < ul.size(); ++i) lowest = std::min(lowest, std::max(ul[i], dl[i]));
  for (std::size_t i = 0; i < ul.size(); ++i)
    if (std::max(ul[i], dl[i]) == lowest) return i;
  return 0;
}

}  // namespace loader::testing
