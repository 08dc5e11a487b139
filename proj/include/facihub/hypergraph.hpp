#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "facihub/error.hpp"
#include "facihub/forum_model.hpp"
#include "facihub/time.hpp"

namespace facihub {

enum class NodeType { U, P, C };

inline const char* to_string(NodeType t) {
  switch (t) {
    case NodeType::U: return "U";
    case NodeType::P: return "P";
    case NodeType::C: return "C";
  }
  return "?";
}

struct HypergraphNode {
  std::string node_id;
  NodeType node_type = NodeType::U;
  std::optional<Timestamp> created_at;  // P and C nodes only

  bool operator==(const HypergraphNode&) const = default;
};

struct Hyperedge {
  std::string record_id;
  std::vector<std::string> members;  // sorted, unique
};

/// Half-open UTC interval [start, end).
struct TimeWindow {
  Timestamp start{};
  Timestamp end{};

  bool contains(Timestamp t) const { return start <= t && t < end; }
};

struct Hypergraph {
  std::map<std::string, HypergraphNode> nodes;
  std::vector<Hyperedge> hyperedges;

  bool empty() const { return hyperedges.empty(); }
};

namespace detail {

inline void add_node(Hypergraph& h, const std::string& id, NodeType type,
                     const std::unordered_map<std::string, Timestamp>& created) {
  auto [it, inserted] = h.nodes.try_emplace(id, HypergraphNode{id, type, std::nullopt});
  if (!inserted && it->second.node_type != type)
    fail(ErrorCode::integrity, "id '" + id + "' is used as both " + to_string(it->second.node_type) +
                                   " and " + to_string(type) + " node");
  if (inserted && type != NodeType::U) {
    if (auto c = created.find(id); c != created.end()) it->second.created_at = c->second;
  }
}

}  // namespace detail

/// Hyperedge membership for one record. Roles that coincide (actor is also an
/// author) collapse to a single member.
inline std::vector<std::pair<std::string, NodeType>> hyperedge_members(const ActionRecord& r) {
  std::vector<std::pair<std::string, NodeType>> members{
      {r.actor_id, NodeType::U}, {r.post_id, NodeType::P}, {r.post_author_id, NodeType::U}};
  if (has_comment_fields(r.action_type)) {
    members.emplace_back(*r.comment_id, NodeType::C);
    members.emplace_back(*r.comment_author_id, NodeType::U);
  }
  if (has_reply_fields(r.action_type)) {
    members.emplace_back(*r.reply_id, NodeType::C);
    members.emplace_back(*r.reply_author_id, NodeType::U);
  }
  return members;
}

/// One hyperedge per record whose timestamp falls in `window`. Creation times
/// for P/C nodes are looked up across all of `records`, not only the window.
inline Hypergraph build_hypergraph(std::span<const ActionRecord> records, const TimeWindow& window) {
  std::unordered_map<std::string, Timestamp> created;
  for (const auto& r : records) {
    if (auto artifact = r.created_artifact()) {
      auto [it, inserted] = created.emplace(*artifact, r.timestamp);
      if (!inserted && r.timestamp < it->second) it->second = r.timestamp;
    }
  }

  Hypergraph h;
  for (const auto& r : records) {
    if (!window.contains(r.timestamp)) continue;
    Hyperedge edge{r.record_id, {}};
    for (const auto& [id, type] : hyperedge_members(r)) {
      detail::add_node(h, id, type, created);
      edge.members.push_back(id);
    }
    std::sort(edge.members.begin(), edge.members.end());
    edge.members.erase(std::unique(edge.members.begin(), edge.members.end()), edge.members.end());
    h.hyperedges.push_back(std::move(edge));
  }
  return h;
}

inline constexpr const char* kClosenessConvention =
    "component-restricted closeness (|C|-1)/sum(d); isolated nodes score 0; no component-size scaling";

struct CentralityTable {
  std::map<std::string, double> scores;
  int s = 1;

  double score(const std::string& id) const {
    auto it = scores.find(id);
    return it == scores.end() ? 0.0 : it->second;
  }
};

/// s-closeness: u and v are adjacent when they co-occur in at least `s`
/// hyperedges. Closeness is computed inside each connected component of that
/// graph.
inline CentralityTable s_closeness(const Hypergraph& h, int s = 1) {
  if (s < 1) fail(ErrorCode::argument, "s must be a positive integer, got " + std::to_string(s));

  std::vector<std::string> ids;
  ids.reserve(h.nodes.size());
  std::unordered_map<std::string, std::uint32_t> index;
  for (const auto& [id, node] : h.nodes) {
    index.emplace(id, static_cast<std::uint32_t>(ids.size()));
    ids.push_back(id);
  }
  const std::size_t n = ids.size();

  std::unordered_map<std::uint64_t, int> shared;
  for (const auto& edge : h.hyperedges) {
    for (std::size_t a = 0; a < edge.members.size(); ++a) {
      const std::uint64_t i = index.at(edge.members[a]);
      for (std::size_t b = a + 1; b < edge.members.size(); ++b) {
        const std::uint64_t j = index.at(edge.members[b]);
        const auto key = i < j ? (i << 32) | j : (j << 32) | i;
        ++shared[key];
      }
    }
  }

  std::vector<std::vector<std::uint32_t>> adjacency(n);
  for (const auto& [key, count] : shared) {
    if (count < s) continue;
    const auto i = static_cast<std::uint32_t>(key >> 32);
    const auto j = static_cast<std::uint32_t>(key & 0xffffffffu);
    adjacency[i].push_back(j);
    adjacency[j].push_back(i);
  }

  CentralityTable table;
  table.s = s;
  std::vector<int> dist(n, -1);
  std::vector<std::uint32_t> frontier;
  for (std::uint32_t v = 0; v < n; ++v) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[v] = 0;
    frontier.assign(1, v);
    std::uint64_t reached = 0;
    std::uint64_t total = 0;
    for (std::size_t head = 0; head < frontier.size(); ++head) {
      const auto u = frontier[head];
      for (auto w : adjacency[u]) {
        if (dist[w] >= 0) continue;
        dist[w] = dist[u] + 1;
        ++reached;
        total += static_cast<std::uint64_t>(dist[w]);
        frontier.push_back(w);
      }
    }
    table.scores.emplace(ids[v], reached == 0 ? 0.0 : static_cast<double>(reached) / static_cast<double>(total));
  }
  return table;
}

struct TargetSelection {
  std::vector<std::string> selected_posts;
  std::vector<std::string> selected_comments;
  double fraction = 0.05;
};

/// ceil(fraction * count). A small tolerance keeps products such as
/// 0.07 * 100 from rounding up to the next integer.
inline std::size_t top_fraction_count(double fraction, std::size_t count) {
  if (count == 0) return 0;
  const double raw = fraction * static_cast<double>(count);
  const auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(k, 1, count);
}

/// Ranks one node type by score (descending), then newer created_at, then
/// node id.
inline std::vector<std::string> rank_nodes(const CentralityTable& table,
                                           const std::map<std::string, HypergraphNode>& nodes,
                                           NodeType type) {
  std::vector<const HypergraphNode*> pool;
  for (const auto& [id, node] : nodes)
    if (node.node_type == type) pool.push_back(&node);
  std::sort(pool.begin(), pool.end(), [&](const HypergraphNode* a, const HypergraphNode* b) {
    const double sa = table.score(a->node_id), sb = table.score(b->node_id);
    if (sa != sb) return sa > sb;
    if (a->created_at != b->created_at) {
      if (!a->created_at) return false;
      if (!b->created_at) return true;
      return *a->created_at > *b->created_at;
    }
    return a->node_id < b->node_id;
  });
  std::vector<std::string> out;
  out.reserve(pool.size());
  for (const auto* node : pool) out.push_back(node->node_id);
  return out;
}

inline TargetSelection select_top_targets(const CentralityTable& table,
                                          const std::map<std::string, HypergraphNode>& nodes,
                                          double fraction = 0.05) {
  if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorCode::argument, "fraction must be in (0, 1]");
  TargetSelection sel;
  sel.fraction = fraction;
  auto posts = rank_nodes(table, nodes, NodeType::P);
  auto comments = rank_nodes(table, nodes, NodeType::C);
  posts.resize(top_fraction_count(fraction, posts.size()));
  comments.resize(top_fraction_count(fraction, comments.size()));
  sel.selected_posts = std::move(posts);
  sel.selected_comments = std::move(comments);
  return sel;
}

/// Writes one line per node: a leading metadata line, then
/// {node_id, node_type, score} in node-id order.
inline void export_centrality(std::ostream& out, const Hypergraph& h, const CentralityTable& table) {
  out << Json{{"meta",
               {{"s", table.s},
                {"convention", kClosenessConvention},
                {"nodes", h.nodes.size()},
                {"hyperedges", h.hyperedges.size()}}}}
             .dump()
      << '\n';
  for (const auto& [id, node] : h.nodes)
    out << Json{{"node_id", id}, {"node_type", to_string(node.node_type)}, {"score", table.score(id)}}.dump()
        << '\n';
}

inline void export_hyperedges(std::ostream& out, const Hypergraph& h) {
  for (const auto& e : h.hyperedges) out << Json{{"record_id", e.record_id}, {"members", e.members}}.dump() << '\n';
}

}  // namespace facihub
