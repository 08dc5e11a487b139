#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "facihub/error.hpp"
#include "facihub/forum_model.hpp"
#include "facihub/hypergraph.hpp"
#include "facihub/time.hpp"

namespace facihub {

enum class Condition { with_pca, without_pca };

inline const char* to_string(Condition c) { return c == Condition::with_pca ? "with_pca" : "without_pca"; }

inline std::optional<Condition> parse_condition(std::string_view s) {
  if (s == "with_pca") return Condition::with_pca;
  if (s == "without_pca") return Condition::without_pca;
  return std::nullopt;
}

/// Which condition odd 1-based sequence positions receive.
enum class ParityMapping { odd_with_pca, odd_without_pca };

inline const char* to_string(ParityMapping p) {
  return p == ParityMapping::odd_with_pca ? "odd_with_pca" : "odd_without_pca";
}

inline std::optional<ParityMapping> parse_parity_mapping(std::string_view s) {
  if (s == "odd_with_pca") return ParityMapping::odd_with_pca;
  if (s == "odd_without_pca") return ParityMapping::odd_without_pca;
  return std::nullopt;
}

inline Condition condition_for_index(std::size_t sequence_index, ParityMapping parity) {
  const bool odd = sequence_index % 2 == 1;
  const bool with = parity == ParityMapping::odd_with_pca ? odd : !odd;
  return with ? Condition::with_pca : Condition::without_pca;
}

struct ConditionAssignment {
  std::string post_id;
  Condition condition = Condition::with_pca;
  std::size_t sequence_index = 0;

  bool operator==(const ConditionAssignment&) const = default;
};

inline Json to_json(const ConditionAssignment& a) {
  return {{"post_id", a.post_id}, {"condition", to_string(a.condition)}, {"sequence_index", a.sequence_index}};
}

struct FocalPost {
  std::string post_id;
  Timestamp timestamp{};
};

/// Sorts by timestamp (post id breaks ties) and labels by sequence parity,
/// numbering from `first_index`.
inline std::vector<ConditionAssignment> assign_conditions(std::vector<FocalPost> posts,
                                                          ParityMapping parity = ParityMapping::odd_with_pca,
                                                          std::size_t first_index = 1) {
  std::sort(posts.begin(), posts.end(), [](const FocalPost& a, const FocalPost& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.post_id < b.post_id;
  });
  std::vector<ConditionAssignment> out;
  out.reserve(posts.size());
  std::size_t index = first_index;
  for (const auto& p : posts) {
    out.push_back({p.post_id, condition_for_index(index, parity), index});
    ++index;
  }
  return out;
}

/// Persistent post -> condition map. A post is assigned exactly once; the
/// sequence continues across batches.
class ConditionRegistry {
 public:
  ConditionRegistry() = default;

  explicit ConditionRegistry(std::string path) : path_(std::move(path)) {
    std::ifstream in(*path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const Json j = Json::parse(line);
      ConditionAssignment a{j.at("post_id").get<std::string>(),
                            parse_condition(j.at("condition").get<std::string>()).value(),
                            j.at("sequence_index").get<std::size_t>()};
      remember(a);
    }
  }

  std::optional<Condition> condition_of(const std::string& post_id) const {
    auto it = by_post_.find(post_id);
    if (it == by_post_.end()) return std::nullopt;
    return it->second.condition;
  }

  const std::map<std::string, ConditionAssignment>& assignments() const { return by_post_; }

  struct Result {
    std::vector<ConditionAssignment> batch;  // every requested post, in sequence order
    std::vector<ConditionAssignment> delta;  // newly assigned in this call
  };

  Result assign(const std::vector<FocalPost>& posts, ParityMapping parity) {
    std::vector<FocalPost> fresh;
    std::set<std::string> requested;
    for (const auto& p : posts) {
      if (!requested.insert(p.post_id).second) continue;
      if (!by_post_.count(p.post_id)) fresh.push_back(p);
    }
    Result result;
    result.delta = assign_conditions(std::move(fresh), parity, next_index_);
    if (path_ && !result.delta.empty()) {
      std::ofstream out(*path_, std::ios::app);
      if (!out) fail(ErrorCode::io, "cannot write assignments to '" + *path_ + "'");
      for (const auto& a : result.delta) out << to_json(a).dump() << '\n';
    }
    for (const auto& a : result.delta) remember(a);
    for (const auto& id : requested) result.batch.push_back(by_post_.at(id));
    std::sort(result.batch.begin(), result.batch.end(),
              [](const auto& a, const auto& b) { return a.sequence_index < b.sequence_index; });
    return result;
  }

 private:
  void remember(const ConditionAssignment& a) {
    by_post_[a.post_id] = a;
    next_index_ = std::max(next_index_, a.sequence_index + 1);
  }

  std::optional<std::string> path_;
  std::map<std::string, ConditionAssignment> by_post_;
  std::size_t next_index_ = 1;
};

enum class Trigger { network, learner_reply };

inline const char* to_string(Trigger t) { return t == Trigger::network ? "network" : "learner_reply"; }

inline std::optional<Trigger> parse_trigger(std::string_view s) {
  if (s == "network") return Trigger::network;
  if (s == "learner_reply") return Trigger::learner_reply;
  return std::nullopt;
}

struct InterventionTarget {
  std::string target_id;
  Trigger trigger = Trigger::network;
  std::string root_post_id;
  Timestamp selected_at{};
  std::optional<double> centrality;

  bool operator==(const InterventionTarget&) const = default;
};

inline Json to_json(const InterventionTarget& t) {
  Json j{{"target_id", t.target_id},
         {"trigger", to_string(t.trigger)},
         {"root_post_id", t.root_post_id},
         {"selected_at", format_timestamp(t.selected_at)}};
  j["centrality"] = t.centrality ? Json(*t.centrality) : Json(nullptr);
  return j;
}

inline InterventionTarget intervention_target_from_json(const Json& j) {
  InterventionTarget t;
  t.target_id = j.at("target_id").get<std::string>();
  t.trigger = parse_trigger(j.at("trigger").get<std::string>()).value();
  t.root_post_id = j.at("root_post_id").get<std::string>();
  t.selected_at = require_timestamp(j.at("selected_at").get<std::string>());
  if (j.contains("centrality") && !j.at("centrality").is_null()) t.centrality = j.at("centrality").get<double>();
  return t;
}

struct TargetingConfig {
  int window_hours = 48;
  double fraction = 0.05;
  int s = 1;
  ParityMapping parity = ParityMapping::odd_with_pca;
  std::string pca_user_id = "pca";
};

struct FilteredTarget {
  std::string target_id;
  std::string root_post_id;
  std::string reason;
};

struct RunManifest {
  Timestamp as_of{};
  TimeWindow window;
  std::optional<Timestamp> previous_as_of;
  std::size_t network_candidates = 0;
  std::size_t learner_reply_candidates = 0;
  std::size_t merged = 0;
  std::vector<ConditionAssignment> assignment_delta;
  std::map<std::string, double> focal_centrality;  // newly assigned posts, this run's window
  std::vector<FilteredTarget> filtered_out;
  std::vector<InterventionTarget> targets;
  ParityMapping parity = ParityMapping::odd_with_pca;

  std::size_t count(Trigger t) const {
    return static_cast<std::size_t>(
        std::count_if(targets.begin(), targets.end(), [t](const auto& x) { return x.trigger == t; }));
  }
};

inline Json to_json(const RunManifest& m) {
  Json delta = Json::array();
  for (const auto& a : m.assignment_delta) delta.push_back(to_json(a));
  Json filtered = Json::array();
  for (const auto& f : m.filtered_out)
    filtered.push_back({{"target_id", f.target_id}, {"root_post_id", f.root_post_id}, {"reason", f.reason}});
  Json targets = Json::array();
  for (const auto& t : m.targets) targets.push_back(to_json(t));
  return {{"as_of", format_timestamp(m.as_of)},
          {"window", {{"start", format_timestamp(m.window.start)}, {"end", format_timestamp(m.window.end)}}},
          {"previous_as_of", m.previous_as_of ? Json(format_timestamp(*m.previous_as_of)) : Json(nullptr)},
          {"counts",
           {{"network_candidates", m.network_candidates},
            {"learner_reply_candidates", m.learner_reply_candidates},
            {"merged", m.merged},
            {"emitted_network", m.count(Trigger::network)},
            {"emitted_learner_reply", m.count(Trigger::learner_reply)},
            {"filtered_out", m.filtered_out.size()}}},
          {"parity_mapping", to_string(m.parity)},
          {"centrality_convention", kClosenessConvention},
          {"assignment_delta", delta},
          {"focal_centrality", m.focal_centrality},
          {"filtered", filtered},
          {"targets", targets}};
}

/// Replies by learners addressed to agent-authored artifacts, created in
/// [since, as_of). Agent artifacts only enter the store on publication.
inline std::vector<const ActionRecord*> learner_replies_to_agent(const StoreSnapshot& store,
                                                                 const std::string& pca_user_id,
                                                                 std::optional<Timestamp> since,
                                                                 Timestamp as_of) {
  std::vector<const ActionRecord*> out;
  for (const auto& r : store.records()) {
    if (r.action_type != ActionType::replied || r.actor_id == pca_user_id) continue;
    if (r.timestamp >= as_of || (since && r.timestamp < *since)) continue;
    if (store.parent_author_of_reply(r) == pca_user_id) out.push_back(&r);
  }
  std::sort(out.begin(), out.end(), [](const ActionRecord* a, const ActionRecord* b) {
    return a->timestamp != b->timestamp ? a->timestamp < b->timestamp : a->record_id < b->record_id;
  });
  return out;
}

/// One targeting pass: network triggers over the trailing window, learner
/// replies to the agent since the previous run, merge, assign conditions to
/// new focal posts, keep only with-PCA threads.
inline RunManifest run_daily_targeting(const StoreSnapshot& store, ConditionRegistry& registry,
                                       Timestamp as_of, std::optional<Timestamp> previous_as_of,
                                       const TargetingConfig& config) {
  if (config.window_hours <= 0) fail(ErrorCode::argument, "window_hours must be positive");
  RunManifest manifest;
  manifest.as_of = as_of;
  manifest.previous_as_of = previous_as_of;
  manifest.parity = config.parity;
  manifest.window = {as_of - std::chrono::hours{config.window_hours}, as_of};

  const Hypergraph graph = build_hypergraph(store.records(), manifest.window);
  const CentralityTable table = s_closeness(graph, config.s);
  const TargetSelection selection = select_top_targets(table, graph.nodes, config.fraction);

  std::vector<InterventionTarget> merged;
  std::map<std::string, std::size_t> position;
  auto add = [&](InterventionTarget t) {
    auto [it, inserted] = position.emplace(t.target_id, merged.size());
    if (inserted) {
      merged.push_back(std::move(t));
    } else if (t.trigger == Trigger::learner_reply) {
      merged[it->second].trigger = Trigger::learner_reply;
    }
  };
  for (const auto* list : {&selection.selected_posts, &selection.selected_comments}) {
    for (const auto& id : *list) {
      ++manifest.network_candidates;
      add({id, Trigger::network, store.root_post_of(id).value_or(id), as_of, table.score(id)});
    }
  }
  for (const ActionRecord* reply : learner_replies_to_agent(store, config.pca_user_id, previous_as_of, as_of)) {
    ++manifest.learner_reply_candidates;
    add({*reply->reply_id, Trigger::learner_reply, reply->post_id, as_of, std::nullopt});
  }
  manifest.merged = merged.size();

  std::vector<InterventionTarget> resolvable;
  std::vector<FocalPost> focal;
  std::unordered_set<std::string> focal_seen;
  for (auto& t : merged) {
    try {
      resolve_thread(store, t.target_id);
    } catch (const Error& e) {
      manifest.filtered_out.push_back({t.target_id, t.root_post_id, std::string("unresolvable: ") + e.what()});
      continue;
    }
    if (focal_seen.insert(t.root_post_id).second)
      focal.push_back({t.root_post_id, store.find_artifact(t.root_post_id)->timestamp});
    resolvable.push_back(std::move(t));
  }

  manifest.assignment_delta = registry.assign(focal, config.parity).delta;
  for (const auto& a : manifest.assignment_delta) manifest.focal_centrality[a.post_id] = table.score(a.post_id);
  for (auto& t : resolvable) {
    if (registry.condition_of(t.root_post_id) == Condition::with_pca) {
      manifest.targets.push_back(std::move(t));
    } else {
      manifest.filtered_out.push_back({t.target_id, t.root_post_id, "root post assigned without_pca"});
    }
  }
  return manifest;
}

}  // namespace facihub
