#pragma once

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "facihub/agent_roles.hpp"
#include "facihub/error.hpp"
#include "facihub/forum_model.hpp"
#include "facihub/time.hpp"

namespace facihub {

enum class Decision { accept, reject };

inline const char* to_string(Decision d) { return d == Decision::accept ? "accept" : "reject"; }

inline std::optional<Decision> parse_decision(std::string_view s) {
  if (s == "accept") return Decision::accept;
  if (s == "reject") return Decision::reject;
  return std::nullopt;
}

/// The three moderation dimensions every decision must rate.
enum class Dimension { role_task_alignment, interactional_appropriateness, factual_plausibility };

inline constexpr std::array<Dimension, 3> kAllDimensions{
    Dimension::role_task_alignment, Dimension::interactional_appropriateness, Dimension::factual_plausibility};

inline const char* to_string(Dimension d) {
  switch (d) {
    case Dimension::role_task_alignment: return "role_task_alignment";
    case Dimension::interactional_appropriateness: return "interactional_appropriateness";
    case Dimension::factual_plausibility: return "factual_plausibility";
  }
  return "?";
}

inline std::optional<Dimension> parse_dimension(std::string_view s) {
  for (Dimension d : kAllDimensions)
    if (s == to_string(d)) return d;
  return std::nullopt;
}

enum class Flag { pass, fail };

inline const char* to_string(Flag f) { return f == Flag::pass ? "pass" : "fail"; }

struct DecisionPayload {
  Decision decision = Decision::accept;
  std::map<Dimension, Flag> dimension_flags;
  std::optional<std::string> note;
  std::string reviewer_id;
  std::optional<std::string> framework_version;
};

struct ReviewRecord {
  std::string candidate_id;
  Decision decision = Decision::accept;
  std::map<Dimension, Flag> dimension_flags;
  std::optional<std::string> note;
  std::string reviewer_id;
  Timestamp decided_at{};
  std::optional<std::string> framework_version;

  bool operator==(const ReviewRecord&) const = default;
};

inline Json to_json(const ReviewRecord& r) {
  Json flags = Json::object();
  for (const auto& [d, f] : r.dimension_flags) flags[to_string(d)] = to_string(f);
  return {{"candidate_id", r.candidate_id},
          {"decision", to_string(r.decision)},
          {"dimension_flags", flags},
          {"note", r.note ? Json(*r.note) : Json(nullptr)},
          {"reviewer_id", r.reviewer_id},
          {"decided_at", format_timestamp(r.decided_at)},
          {"framework_version", r.framework_version ? Json(*r.framework_version) : Json(nullptr)}};
}

/// Parses a decision payload ({decision, dimension_flags, note?, reviewer_id,
/// framework_version?}), collecting every field problem before throwing.
inline DecisionPayload parse_decision_payload(const Json& j) {
  std::vector<FieldError> errors;
  DecisionPayload p;
  if (!j.is_object()) throw ValidationError("decision payload must be an object", {{"", "not an object"}});
  if (!j.contains("decision") || !j["decision"].is_string() || !parse_decision(j["decision"].get<std::string>()))
    errors.push_back({"decision", "must be \"accept\" or \"reject\""});
  else
    p.decision = *parse_decision(j["decision"].get<std::string>());
  if (!j.contains("reviewer_id") || !j["reviewer_id"].is_string() || j["reviewer_id"].get<std::string>().empty())
    errors.push_back({"reviewer_id", "required non-empty string"});
  else
    p.reviewer_id = j["reviewer_id"].get<std::string>();
  if (!j.contains("dimension_flags") || !j["dimension_flags"].is_object()) {
    errors.push_back({"dimension_flags", "required object"});
  } else {
    for (const auto& [key, value] : j["dimension_flags"].items()) {
      const auto dim = parse_dimension(key);
      if (!dim) {
        errors.push_back({"dimension_flags." + key, "unknown dimension"});
        continue;
      }
      if (!value.is_string() || (value != "pass" && value != "fail")) {
        errors.push_back({"dimension_flags." + key, "must be \"pass\" or \"fail\""});
        continue;
      }
      p.dimension_flags[*dim] = value == "pass" ? Flag::pass : Flag::fail;
    }
  }
  if (j.contains("note") && !j["note"].is_null()) {
    if (!j["note"].is_string())
      errors.push_back({"note", "must be a string"});
    else
      p.note = j["note"].get<std::string>();
  }
  if (j.contains("framework_version") && !j["framework_version"].is_null()) {
    if (!j["framework_version"].is_string())
      errors.push_back({"framework_version", "must be a string"});
    else
      p.framework_version = j["framework_version"].get<std::string>();
  }
  if (!errors.empty()) throw ValidationError("malformed decision payload", std::move(errors));
  return p;
}

inline ReviewRecord review_from_json(const Json& j) {
  const DecisionPayload p = parse_decision_payload(j);
  return {j.at("candidate_id").get<std::string>(), p.decision, p.dimension_flags, p.note, p.reviewer_id,
          require_timestamp(j.at("decided_at").get<std::string>()), p.framework_version};
}

/// A second decision on an already-decided candidate. Carries the record that
/// won.
class DecisionConflict : public Error {
 public:
  explicit DecisionConflict(ReviewRecord winner)
      : Error(ErrorCode::conflict, "candidate '" + winner.candidate_id + "' was already decided"),
        winner_(std::move(winner)) {}

  const ReviewRecord& winner() const noexcept { return winner_; }

 private:
  ReviewRecord winner_;
};

struct PublicationEvent {
  std::string candidate_id;
  std::string target_id;
  Timestamp published_at{};
  std::string record_id;  // synthetic ActionRecord appended to the store

  bool operator==(const PublicationEvent&) const = default;
};

inline Json to_json(const PublicationEvent& e) {
  return {{"candidate_id", e.candidate_id},
          {"target_id", e.target_id},
          {"published_at", format_timestamp(e.published_at)},
          {"record_id", e.record_id}};
}

struct DailyAcceptance {
  Date date{};
  std::size_t generated = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::optional<double> acceptance_rate;
  std::map<Role, double> role_composition;
};

struct AcceptanceMetrics {
  std::vector<DailyAcceptance> days;
  std::size_t generated = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::optional<double> acceptance_rate;
  std::map<Role, double> role_composition;
};

inline std::string format_ratio(std::optional<double> v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

/// Tab-separated: date, generated, accepted, rejected, rate, one column per
/// role. A final "total" row summarizes the range.
inline void write_metrics_tsv(std::ostream& out, const AcceptanceMetrics& m) {
  out << "date\tgenerated\taccepted\trejected\tacceptance_rate";
  for (Role r : kAllRoles) out << '\t' << to_string(r);
  out << '\n';
  auto row = [&out](const std::string& label, std::size_t g, std::size_t a, std::size_t r,
                    std::optional<double> rate, const std::map<Role, double>& comp) {
    out << label << '\t' << g << '\t' << a << '\t' << r << '\t' << format_ratio(rate);
    for (Role role : kAllRoles) {
      auto it = comp.find(role);
      out << '\t' << (g == 0 ? std::string("NA") : format_ratio(it == comp.end() ? 0.0 : it->second));
    }
    out << '\n';
  };
  for (const auto& d : m.days)
    row(format_date(d.date), d.generated, d.accepted, d.rejected, d.acceptance_rate, d.role_composition);
  row("total", m.generated, m.accepted, m.rejected, m.acceptance_rate, m.role_composition);
}

inline Json to_json(const AcceptanceMetrics& m) {
  auto comp = [](const std::map<Role, double>& c) {
    Json j = Json::object();
    for (const auto& [r, v] : c) j[to_string(r)] = v;
    return j;
  };
  Json days = Json::array();
  for (const auto& d : m.days)
    days.push_back({{"date", format_date(d.date)},
                    {"generated", d.generated},
                    {"accepted", d.accepted},
                    {"rejected", d.rejected},
                    {"acceptance_rate", d.acceptance_rate ? Json(*d.acceptance_rate) : Json(nullptr)},
                    {"role_composition", comp(d.role_composition)}});
  return {{"days", days},
          {"generated", m.generated},
          {"accepted", m.accepted},
          {"rejected", m.rejected},
          {"acceptance_rate", m.acceptance_rate ? Json(*m.acceptance_rate) : Json(nullptr)},
          {"role_composition", comp(m.role_composition)}};
}

/// Agent reply as it will appear in the forum log: a comment on a post
/// target, a reply to a comment or reply target.
inline ActionRecord synthesize_publication_record(const StoreSnapshot& store, const CandidateResponse& c,
                                                  const std::string& pca_user_id, Timestamp published_at) {
  const ActionRecord* target = store.find_artifact(c.target_id);
  if (!target) fail(ErrorCode::integrity, "published target '" + c.target_id + "' is not in the store");
  ActionRecord r;
  r.record_id = "pub-" + c.candidate_id;
  r.timestamp = published_at;
  r.actor_id = pca_user_id;
  r.post_id = target->post_id;
  r.post_author_id = target->post_author_id;
  r.text = c.text;
  const std::string own_id = "pca-" + c.candidate_id;
  switch (target->action_type) {
    case ActionType::posted:
      r.action_type = ActionType::commented;
      r.comment_id = own_id;
      r.comment_author_id = pca_user_id;
      break;
    case ActionType::commented:
      r.action_type = ActionType::replied;
      r.comment_id = target->comment_id;
      r.comment_author_id = target->comment_author_id;
      r.reply_id = own_id;
      r.reply_author_id = pca_user_id;
      break;
    default:
      r.action_type = ActionType::replied;
      r.comment_id = target->comment_id;
      r.comment_author_id = target->comment_author_id;
      r.reply_id = own_id;
      r.reply_author_id = pca_user_id;
      r.parent_reply_id = target->reply_id;
      break;
  }
  return r;
}

/// Moderation queue and decision ledger. Every candidate is decided at most
/// once; only accepted candidates are ever published.
class ReviewBoard {
 public:
  struct QueueEntry {
    CandidateResponse candidate;
    ThreadContext context;
  };

  ReviewBoard() = default;

  /// File-backed board: candidates, reviews and publications are appended to
  /// NDJSON files under `dir` and replayed here.
  explicit ReviewBoard(const std::string& dir) : dir_(dir) {
    for_each_line(dir + "/candidates.ndjson", [this](const Json& j) {
      CandidateResponse c = candidate_from_json(j);
      ThreadContext ctx;
      if (j.contains("context")) ctx = context_from_json(j.at("context"));
      std::string id = c.candidate_id;
      order_.push_back(id);
      pending_.push_back(id);
      entries_.emplace(std::move(id), QueueEntry{std::move(c), std::move(ctx)});
    });
    for_each_line(dir + "/reviews.ndjson", [this](const Json& j) {
      ReviewRecord r = review_from_json(j);
      apply_review(r);
    });
    for_each_line(dir + "/publications.ndjson", [this](const Json& j) {
      PublicationEvent e{j.at("candidate_id").get<std::string>(), j.at("target_id").get<std::string>(),
                         require_timestamp(j.at("published_at").get<std::string>()),
                         j.at("record_id").get<std::string>()};
      published_.emplace(e.candidate_id, e);
      publications_.push_back(e);
    });
  }

  /// Adds a pending candidate to the back of the queue; returns its 1-based
  /// position.
  std::size_t enqueue(const CandidateResponse& c, const ThreadContext& ctx) {
    std::lock_guard lock(mutex_);
    if (c.status != CandidateStatus::pending)
      fail(ErrorCode::argument, "only pending candidates can be enqueued");
    if (entries_.count(c.candidate_id)) fail(ErrorCode::conflict, "candidate '" + c.candidate_id + "' already enqueued");
    if (dir_) {
      Json j = to_json(c);
      j["context"] = to_json(ctx);
      append_line(*dir_ + "/candidates.ndjson", j);
    }
    entries_.emplace(c.candidate_id, QueueEntry{c, ctx});
    order_.push_back(c.candidate_id);
    pending_.push_back(c.candidate_id);
    return pending_.size();
  }

  std::vector<QueueEntry> queue() const {
    std::lock_guard lock(mutex_);
    std::vector<QueueEntry> out;
    for (const auto& id : pending_) out.push_back(entries_.at(id));
    return out;
  }

  std::size_t pending_count() const {
    std::lock_guard lock(mutex_);
    return pending_.size();
  }

  std::optional<QueueEntry> find(const std::string& candidate_id) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(candidate_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<ReviewRecord> review_of(const std::string& candidate_id) const {
    std::lock_guard lock(mutex_);
    auto it = reviews_.find(candidate_id);
    if (it == reviews_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<PublicationEvent> publication_of(const std::string& candidate_id) const {
    std::lock_guard lock(mutex_);
    auto it = published_.find(candidate_id);
    if (it == published_.end()) return std::nullopt;
    return it->second;
  }

  /// Every candidate ever enqueued, in enqueue order.
  std::vector<CandidateResponse> candidates() const {
    std::lock_guard lock(mutex_);
    std::vector<CandidateResponse> out;
    for (const auto& id : order_) out.push_back(entries_.at(id).candidate);
    return out;
  }

  std::vector<PublicationEvent> publications() const {
    std::lock_guard lock(mutex_);
    return publications_;
  }

  bool has_candidate_for(const std::string& target_id) const {
    std::lock_guard lock(mutex_);
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& kv) { return kv.second.candidate.target_id == target_id; });
  }

  /// Records a decision. The first decision on a candidate wins; later ones
  /// get DecisionConflict with the winning record.
  ReviewRecord decide(const std::string& candidate_id, const DecisionPayload& payload, Timestamp decided_at) {
    validate_payload(payload);
    std::lock_guard lock(mutex_);
    if (!entries_.count(candidate_id)) fail(ErrorCode::not_found, "unknown candidate '" + candidate_id + "'");
    if (auto it = reviews_.find(candidate_id); it != reviews_.end()) throw DecisionConflict(it->second);
    ReviewRecord record{candidate_id,       payload.decision, payload.dimension_flags, payload.note,
                        payload.reviewer_id, decided_at,      payload.framework_version};
    if (dir_) append_line(*dir_ + "/reviews.ndjson", to_json(record));
    apply_review(record);
    return record;
  }

  /// Publishes every accepted, unpublished candidate decided at or after
  /// `since`, appending the agent's reply to the forum store.
  std::vector<PublicationEvent> publish_accepted(Timestamp since, Timestamp published_at, ForumStore& store,
                                                 const std::string& pca_user_id) {
    std::lock_guard lock(mutex_);
    const auto snapshot = store.snapshot();
    std::vector<PublicationEvent> events;
    std::vector<ActionRecord> records;
    for (const auto& id : order_) {
      const auto review = reviews_.find(id);
      if (review == reviews_.end() || review->second.decision != Decision::accept) continue;
      if (published_.count(id) || review->second.decided_at < since) continue;
      const CandidateResponse& c = entries_.at(id).candidate;
      ActionRecord rec = synthesize_publication_record(*snapshot, c, pca_user_id, published_at);
      events.push_back({c.candidate_id, c.target_id, published_at, rec.record_id});
      records.push_back(std::move(rec));
    }
    if (events.empty()) return events;
    store.append(records);
    for (const auto& e : events) {
      if (dir_) append_line(*dir_ + "/publications.ndjson", to_json(e));
      published_.emplace(e.candidate_id, e);
      publications_.push_back(e);
    }
    return events;
  }

  /// Daily generated/accepted/rejected counts by candidate generation date
  /// over [from, to] inclusive.
  AcceptanceMetrics acceptance_metrics(Date from, Date to) const {
    std::lock_guard lock(mutex_);
    std::map<Date, DailyAcceptance> days;
    std::map<Date, std::map<Role, std::size_t>> role_counts;
    AcceptanceMetrics m;
    std::map<Role, std::size_t> total_roles;
    for (const auto& id : order_) {
      const CandidateResponse& c = entries_.at(id).candidate;
      const Date day = date_of(c.generated_at);
      if (day < from || day > to) continue;
      auto& row = days[day];
      row.date = day;
      ++row.generated;
      ++m.generated;
      ++role_counts[day][c.role];
      ++total_roles[c.role];
      if (auto r = reviews_.find(id); r != reviews_.end()) {
        if (r->second.decision == Decision::accept) {
          ++row.accepted;
          ++m.accepted;
        } else {
          ++row.rejected;
          ++m.rejected;
        }
      }
    }
    auto ratios = [](const std::map<Role, std::size_t>& counts, std::size_t total) {
      std::map<Role, double> out;
      for (Role r : kAllRoles) {
        auto it = counts.find(r);
        out[r] = static_cast<double>(it == counts.end() ? 0 : it->second) / static_cast<double>(total);
      }
      return out;
    };
    for (Date d = from; d <= to; d += std::chrono::days{1}) {
      DailyAcceptance row;
      if (auto it = days.find(d); it != days.end()) row = it->second;
      row.date = d;
      if (row.accepted + row.rejected > 0)
        row.acceptance_rate = static_cast<double>(row.accepted) / static_cast<double>(row.accepted + row.rejected);
      if (row.generated > 0) row.role_composition = ratios(role_counts[d], row.generated);
      m.days.push_back(std::move(row));
    }
    if (m.accepted + m.rejected > 0)
      m.acceptance_rate = static_cast<double>(m.accepted) / static_cast<double>(m.accepted + m.rejected);
    if (m.generated > 0) m.role_composition = ratios(total_roles, m.generated);
    return m;
  }

  /// Pending candidates generated more than `horizon` before `now`. They are
  /// only reported, never decided automatically.
  std::vector<std::string> stale_pending(Timestamp now, std::chrono::seconds horizon) const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& id : pending_)
      if (now - entries_.at(id).candidate.generated_at > horizon) out.push_back(id);
    return out;
  }

  static void validate_payload(const DecisionPayload& p) {
    std::vector<FieldError> errors;
    for (Dimension d : kAllDimensions)
      if (!p.dimension_flags.count(d))
        errors.push_back({std::string("dimension_flags.") + to_string(d), "required"});
    if (p.reviewer_id.empty()) errors.push_back({"reviewer_id", "required"});
    if (!errors.empty()) throw ValidationError("incomplete moderation checklist", std::move(errors));
    const bool any_fail = std::any_of(p.dimension_flags.begin(), p.dimension_flags.end(),
                                      [](const auto& kv) { return kv.second == Flag::fail; });
    if (p.decision == Decision::accept && any_fail) {
      for (const auto& [d, f] : p.dimension_flags)
        if (f == Flag::fail) errors.push_back({std::string("dimension_flags.") + to_string(d), "fails; cannot accept"});
      throw ValidationError("accept requires every dimension to pass", std::move(errors));
    }
    if (p.decision == Decision::reject && !any_fail)
      throw ValidationError("reject requires at least one failing dimension",
                            {{"dimension_flags", "no dimension marked fail"}});
  }

 private:
  static ThreadContext context_from_json(const Json& j) {
    ThreadContext ctx;
    const Json& post = j.at("post");
    ctx.post = {post.at("post_id").get<std::string>(), post.at("title").get<std::string>(),
                post.at("content").get<std::string>(), post.at("author_id").get<std::string>()};
    for (const auto& item : j.at("comment_chain"))
      ctx.comment_chain.push_back({item.at("id").get<std::string>(), item.at("author_id").get<std::string>(),
                                   item.at("text").get<std::string>()});
    const std::string kind = j.at("target_kind").get<std::string>();
    ctx.target_kind = kind == "post" ? TargetKind::post : kind == "comment" ? TargetKind::comment : TargetKind::reply;
    return ctx;
  }

  template <typename F>
  static void for_each_line(const std::string& path, F&& f) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) f(Json::parse(line));
  }

  static void append_line(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::app);
    out << j.dump() << '\n';
    out.flush();
    if (!out) fail(ErrorCode::io, "cannot append to '" + path + "'");
  }

  void apply_review(const ReviewRecord& r) {
    if (reviews_.count(r.candidate_id)) return;
    reviews_.emplace(r.candidate_id, r);
    auto it = entries_.find(r.candidate_id);
    if (it != entries_.end())
      it->second.candidate.status = r.decision == Decision::accept ? CandidateStatus::accepted : CandidateStatus::rejected;
    pending_.erase(std::remove(pending_.begin(), pending_.end(), r.candidate_id), pending_.end());
  }

  std::optional<std::string> dir_;
  mutable std::mutex mutex_;
  std::map<std::string, QueueEntry> entries_;
  std::vector<std::string> order_;
  std::deque<std::string> pending_;
  std::map<std::string, ReviewRecord> reviews_;
  std::map<std::string, PublicationEvent> published_;
  std::vector<PublicationEvent> publications_;
};

}  // namespace facihub
