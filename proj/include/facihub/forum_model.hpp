#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "facihub/error.hpp"
#include "facihub/time.hpp"

namespace facihub {

using Json = nlohmann::json;

enum class ActionType { posted, commented, replied, liked_comment, liked_reply };

inline const char* to_string(ActionType t) {
  switch (t) {
    case ActionType::posted: return "posted";
    case ActionType::commented: return "commented";
    case ActionType::replied: return "replied";
    case ActionType::liked_comment: return "liked_comment";
    case ActionType::liked_reply: return "liked_reply";
  }
  return "?";
}

inline std::optional<ActionType> parse_action_type(std::string_view s) {
  if (s == "posted") return ActionType::posted;
  if (s == "commented") return ActionType::commented;
  if (s == "replied") return ActionType::replied;
  if (s == "liked_comment") return ActionType::liked_comment;
  if (s == "liked_reply") return ActionType::liked_reply;
  return std::nullopt;
}

inline bool has_comment_fields(ActionType t) { return t != ActionType::posted; }
inline bool has_reply_fields(ActionType t) {
  return t == ActionType::replied || t == ActionType::liked_reply;
}
inline bool has_text(ActionType t) {
  return t == ActionType::posted || t == ActionType::commented || t == ActionType::replied;
}
inline bool is_like(ActionType t) {
  return t == ActionType::liked_comment || t == ActionType::liked_reply;
}

/// One behavioral log event. `title` is only meaningful on `posted` records
/// and is optional in the log.
struct ActionRecord {
  std::string record_id;
  Timestamp timestamp{};
  std::string actor_id;
  ActionType action_type = ActionType::posted;
  std::string post_id;
  std::string post_author_id;
  std::optional<std::string> comment_id;
  std::optional<std::string> comment_author_id;
  std::optional<std::string> reply_id;
  std::optional<std::string> reply_author_id;
  std::optional<std::string> text;
  std::optional<std::string> parent_reply_id;
  std::optional<std::string> title;

  /// Id of the artifact this record creates, if any.
  std::optional<std::string> created_artifact() const {
    switch (action_type) {
      case ActionType::posted: return post_id;
      case ActionType::commented: return comment_id;
      case ActionType::replied: return reply_id;
      default: return std::nullopt;
    }
  }

  bool operator==(const ActionRecord&) const = default;
};

inline Json to_json(const ActionRecord& r) {
  Json j;
  j["record_id"] = r.record_id;
  j["timestamp"] = format_timestamp(r.timestamp);
  j["actor_id"] = r.actor_id;
  j["action_type"] = to_string(r.action_type);
  j["post_id"] = r.post_id;
  j["post_author_id"] = r.post_author_id;
  auto put = [&j](const char* key, const std::optional<std::string>& v) {
    if (v) j[key] = *v;
  };
  put("comment_id", r.comment_id);
  put("comment_author_id", r.comment_author_id);
  put("reply_id", r.reply_id);
  put("reply_author_id", r.reply_author_id);
  put("text", r.text);
  put("parent_reply_id", r.parent_reply_id);
  put("title", r.title);
  return j;
}

/// Parses and schema-checks one record. Returns the rejection reason on
/// failure. Store-level checks (duplicates, dangling likes) happen in
/// ForumStore.
inline std::variant<ActionRecord, std::string> parse_record(const Json& j) {
  if (!j.is_object()) return std::string("record is not an object");
  auto required = [&j](const char* key, std::string& out) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::string("missing field '") + key + "'";
    if (!it->is_string()) return std::string("field '") + key + "' is not a string";
    out = it->get<std::string>();
    if (out.empty()) return std::string("field '") + key + "' is empty";
    return std::nullopt;
  };
  auto optional = [&j](const char* key, std::optional<std::string>& out) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) return std::string("field '") + key + "' is not a string";
    out = it->get<std::string>();
    return std::nullopt;
  };

  ActionRecord r;
  std::string ts, type;
  for (auto [key, out] : {std::pair<const char*, std::string*>{"record_id", &r.record_id},
                          {"timestamp", &ts},
                          {"actor_id", &r.actor_id},
                          {"action_type", &type},
                          {"post_id", &r.post_id},
                          {"post_author_id", &r.post_author_id}}) {
    if (auto err = required(key, *out)) return *err;
  }
  const auto parsed_type = parse_action_type(type);
  if (!parsed_type) return "unknown action_type '" + type + "'";
  r.action_type = *parsed_type;
  const auto parsed_ts = parse_timestamp(ts);
  if (!parsed_ts) return "unparsable timestamp '" + ts + "'";
  r.timestamp = *parsed_ts;

  for (auto [key, out] : {std::pair<const char*, std::optional<std::string>*>{"comment_id", &r.comment_id},
                          {"comment_author_id", &r.comment_author_id},
                          {"reply_id", &r.reply_id},
                          {"reply_author_id", &r.reply_author_id},
                          {"text", &r.text},
                          {"parent_reply_id", &r.parent_reply_id},
                          {"title", &r.title}}) {
    if (auto err = optional(key, *out)) return *err;
  }

  const ActionType t = r.action_type;
  const bool comment_present = r.comment_id && r.comment_author_id && !r.comment_id->empty() &&
                               !r.comment_author_id->empty();
  if (has_comment_fields(t) && !comment_present) return std::string("missing comment fields");
  if (!has_comment_fields(t) && (r.comment_id || r.comment_author_id))
    return std::string("unexpected comment fields");
  const bool reply_present =
      r.reply_id && r.reply_author_id && !r.reply_id->empty() && !r.reply_author_id->empty();
  if (has_reply_fields(t) && !reply_present) return std::string("missing reply fields");
  if (!has_reply_fields(t) && (r.reply_id || r.reply_author_id))
    return std::string("unexpected reply fields");
  if (has_text(t) && !r.text) return std::string("missing text");
  if (!has_text(t) && r.text) return std::string("unexpected text");
  if (r.parent_reply_id && t != ActionType::replied)
    return std::string("parent_reply_id is only valid on replied records");
  if (r.parent_reply_id && r.parent_reply_id == r.reply_id)
    return std::string("reply cannot be its own parent");
  if (r.title && t != ActionType::posted) return std::string("title is only valid on posted records");
  if (t == ActionType::posted && r.actor_id != r.post_author_id)
    return std::string("posted record actor must be the post author");
  if (t == ActionType::commented && r.actor_id != *r.comment_author_id)
    return std::string("commented record actor must be the comment author");
  if (t == ActionType::replied && r.actor_id != *r.reply_author_id)
    return std::string("replied record actor must be the reply author");
  return r;
}

struct IngestRejection {
  std::size_t line_number = 0;
  std::string reason;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t duplicates_dropped = 0;
  std::vector<IngestRejection> rejected;

  std::size_t total() const { return accepted + duplicates_dropped + rejected.size(); }
};

inline Json to_json(const IngestReport& r) {
  Json rejected = Json::array();
  for (const auto& x : r.rejected) rejected.push_back({{"line_number", x.line_number}, {"reason", x.reason}});
  return {{"accepted", r.accepted}, {"duplicates_dropped", r.duplicates_dropped}, {"rejected", rejected}};
}

enum class TargetKind { post, comment, reply };

inline const char* to_string(TargetKind k) {
  switch (k) {
    case TargetKind::post: return "post";
    case TargetKind::comment: return "comment";
    case TargetKind::reply: return "reply";
  }
  return "?";
}

struct ThreadPost {
  std::string post_id;
  std::string title;
  std::string content;
  std::string author_id;
};

struct ThreadItem {
  std::string id;
  std::string author_id;
  std::string text;
};

/// A target plus everything above it: the root post and the comment chain from
/// the top-level comment down to the target (inclusive).
struct ThreadContext {
  ThreadPost post;
  std::vector<ThreadItem> comment_chain;
  TargetKind target_kind = TargetKind::post;

  const std::string& target_id() const {
    return comment_chain.empty() ? post.post_id : comment_chain.back().id;
  }
};

inline Json to_json(const ThreadContext& ctx) {
  Json chain = Json::array();
  for (const auto& item : ctx.comment_chain)
    chain.push_back({{"id", item.id}, {"author_id", item.author_id}, {"text", item.text}});
  return {{"post",
           {{"post_id", ctx.post.post_id},
            {"title", ctx.post.title},
            {"content", ctx.post.content},
            {"author_id", ctx.post.author_id}}},
          {"comment_chain", chain},
          {"target_kind", to_string(ctx.target_kind)}};
}

/// Immutable view of the store at one point in time.
class StoreSnapshot {
 public:
  StoreSnapshot() = default;

  const std::vector<ActionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  bool contains_record(const std::string& record_id) const { return by_record_.count(record_id) > 0; }

  const ActionRecord* find_record(const std::string& record_id) const {
    auto it = by_record_.find(record_id);
    return it == by_record_.end() ? nullptr : &records_[it->second];
  }

  /// The record that created a post, comment or reply.
  const ActionRecord* find_artifact(const std::string& artifact_id) const {
    auto it = by_artifact_.find(artifact_id);
    return it == by_artifact_.end() ? nullptr : &records_[it->second];
  }

  std::optional<TargetKind> kind_of(const std::string& artifact_id) const {
    const ActionRecord* r = find_artifact(artifact_id);
    if (!r) return std::nullopt;
    switch (r->action_type) {
      case ActionType::posted: return TargetKind::post;
      case ActionType::commented: return TargetKind::comment;
      default: return TargetKind::reply;
    }
  }

  /// Root post of any known artifact.
  std::optional<std::string> root_post_of(const std::string& artifact_id) const {
    const ActionRecord* r = find_artifact(artifact_id);
    if (!r) return std::nullopt;
    return r->post_id;
  }

  /// Author of the artifact a reply is addressed to: the parent reply when
  /// present, else the comment it sits under.
  std::optional<std::string> parent_author_of_reply(const ActionRecord& reply) const {
    if (reply.parent_reply_id) {
      const ActionRecord* parent = find_artifact(*reply.parent_reply_id);
      if (!parent) return std::nullopt;
      return parent->reply_author_id;
    }
    return reply.comment_author_id;
  }

  StoreSnapshot with_appended(const std::vector<ActionRecord>& batch) const {
    StoreSnapshot next = *this;
    for (const auto& r : batch) next.add(r);
    return next;
  }

 private:
  void add(const ActionRecord& r) {
    const std::size_t idx = records_.size();
    records_.push_back(r);
    by_record_.emplace(r.record_id, idx);
    if (auto artifact = r.created_artifact()) by_artifact_.emplace(*artifact, idx);
  }

  std::vector<ActionRecord> records_;
  std::unordered_map<std::string, std::size_t> by_record_;
  std::unordered_map<std::string, std::size_t> by_artifact_;
};

/// Append-only store of ActionRecords with a single writer. Readers take
/// snapshots that never change underneath them. When constructed with a path,
/// accepted records are appended to that file as NDJSON and replayed on open.
class ForumStore {
 public:
  ForumStore() : snapshot_(std::make_shared<const StoreSnapshot>()) {}

  explicit ForumStore(std::string log_path) : ForumStore() {
    log_path_ = std::move(log_path);
    std::ifstream in(*log_path_);
    if (!in) return;
    std::vector<ActionRecord> replay;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
      ++line_number;
      if (line.empty()) continue;
      Json j = Json::parse(line, nullptr, false);
      if (j.is_discarded())
        fail(ErrorCode::integrity, *log_path_ + ":" + std::to_string(line_number) + ": corrupt store line");
      auto parsed = parse_record(j);
      if (auto* reason = std::get_if<std::string>(&parsed))
        fail(ErrorCode::integrity, *log_path_ + ":" + std::to_string(line_number) + ": " + *reason);
      auto& rec = std::get<ActionRecord>(parsed);
      if (seen.insert(rec.record_id).second) replay.push_back(std::move(rec));
    }
    snapshot_ = std::make_shared<const StoreSnapshot>(StoreSnapshot{}.with_appended(replay));
  }

  ForumStore(const ForumStore&) = delete;
  ForumStore& operator=(const ForumStore&) = delete;

  std::shared_ptr<const StoreSnapshot> snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
  }

  /// Ingests line-delimited JSON records. The whole source is read before
  /// anything is appended, so a read failure leaves the store untouched.
  IngestReport ingest(std::istream& source) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(source, line)) lines.push_back(line);
    if (source.bad()) fail(ErrorCode::io, "log source became unreadable; nothing ingested");

    std::lock_guard writer(writer_mutex_);
    const auto base = snapshot();
    IngestReport report;
    std::vector<ActionRecord> batch;
    std::unordered_set<std::string> batch_ids;
    std::unordered_set<std::string> batch_artifacts;

    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::size_t line_number = i + 1;
      std::string_view text = lines[i];
      while (!text.empty() && (text.back() == '\r' || text.back() == ' ')) text.remove_suffix(1);
      if (text.empty()) continue;
      Json j = Json::parse(text, nullptr, false);
      if (j.is_discarded()) {
        report.rejected.push_back({line_number, "invalid JSON"});
        continue;
      }
      auto parsed = parse_record(j);
      if (auto* reason = std::get_if<std::string>(&parsed)) {
        report.rejected.push_back({line_number, *reason});
        continue;
      }
      auto& rec = std::get<ActionRecord>(parsed);
      if (base->contains_record(rec.record_id) || batch_ids.count(rec.record_id)) {
        ++report.duplicates_dropped;
        continue;
      }
      auto known = [&](const std::string& id) {
        return base->find_artifact(id) != nullptr || batch_artifacts.count(id) > 0;
      };
      if (auto artifact = rec.created_artifact(); artifact && known(*artifact)) {
        report.rejected.push_back({line_number, "artifact '" + *artifact + "' already exists"});
        continue;
      }
      if (rec.action_type == ActionType::liked_comment && !known(*rec.comment_id)) {
        report.rejected.push_back({line_number, "dangling like target '" + *rec.comment_id + "'"});
        continue;
      }
      if (rec.action_type == ActionType::liked_reply && !known(*rec.reply_id)) {
        report.rejected.push_back({line_number, "dangling like target '" + *rec.reply_id + "'"});
        continue;
      }
      batch_ids.insert(rec.record_id);
      if (auto artifact = rec.created_artifact()) batch_artifacts.insert(*artifact);
      batch.push_back(std::move(rec));
    }
    report.accepted = batch.size();
    commit(*base, batch);
    return report;
  }

  IngestReport ingest_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open log source '" + path + "'");
    return ingest(in);
  }

  /// Appends engine-authored records (e.g. published agent replies). All
  /// records must be novel; throws conflict otherwise.
  void append(const std::vector<ActionRecord>& records) {
    std::lock_guard writer(writer_mutex_);
    const auto base = snapshot();
    std::unordered_set<std::string> ids;
    for (const auto& r : records) {
      if (base->contains_record(r.record_id) || !ids.insert(r.record_id).second)
        fail(ErrorCode::conflict, "record '" + r.record_id + "' already exists");
    }
    commit(*base, records);
  }

 private:
  void commit(const StoreSnapshot& base, const std::vector<ActionRecord>& batch) {
    if (batch.empty()) return;
    if (log_path_) {
      std::ofstream out(*log_path_, std::ios::app);
      if (!out) fail(ErrorCode::io, "cannot open store file '" + *log_path_ + "'");
      for (const auto& r : batch) out << to_json(r).dump() << '\n';
      out.flush();
      if (!out) fail(ErrorCode::io, "write to store file '" + *log_path_ + "' failed");
    }
    auto next = std::make_shared<const StoreSnapshot>(base.with_appended(batch));
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(next);
  }

  std::optional<std::string> log_path_;
  mutable std::mutex snapshot_mutex_;
  std::mutex writer_mutex_;
  std::shared_ptr<const StoreSnapshot> snapshot_;
};

/// Resolves a post, comment or reply to its thread context.
inline ThreadContext resolve_thread(const StoreSnapshot& store, const std::string& target_id) {
  const ActionRecord* target = store.find_artifact(target_id);
  if (!target) fail(ErrorCode::not_found, "unknown target '" + target_id + "'");

  ThreadContext ctx;
  std::vector<ThreadItem> reversed;
  const ActionRecord* cursor = target;
  std::unordered_set<std::string> visited;
  while (cursor->action_type == ActionType::replied) {
    if (!visited.insert(*cursor->reply_id).second)
      fail(ErrorCode::integrity, "reply cycle at '" + *cursor->reply_id + "'");
    reversed.push_back({*cursor->reply_id, *cursor->reply_author_id, cursor->text.value_or("")});
    const std::string& parent_id = cursor->parent_reply_id ? *cursor->parent_reply_id : *cursor->comment_id;
    const ActionRecord* parent = store.find_artifact(parent_id);
    if (!parent) fail(ErrorCode::integrity, "missing ancestor '" + parent_id + "' of '" + target_id + "'");
    if (cursor->parent_reply_id && parent->action_type != ActionType::replied)
      fail(ErrorCode::integrity, "parent '" + parent_id + "' of '" + *cursor->reply_id + "' is not a reply");
    if (!cursor->parent_reply_id && parent->action_type != ActionType::commented)
      fail(ErrorCode::integrity, "parent '" + parent_id + "' of '" + *cursor->reply_id + "' is not a comment");
    cursor = parent;
  }
  if (cursor->action_type == ActionType::commented)
    reversed.push_back({*cursor->comment_id, *cursor->comment_author_id, cursor->text.value_or("")});

  const ActionRecord* post = store.find_artifact(target->post_id);
  if (!post || post->action_type != ActionType::posted)
    fail(ErrorCode::integrity, "missing ancestor '" + target->post_id + "' of '" + target_id + "'");
  ctx.post = {post->post_id, post->title.value_or(""), post->text.value_or(""), post->post_author_id};
  ctx.comment_chain.assign(reversed.rbegin(), reversed.rend());
  ctx.target_kind = target->action_type == ActionType::posted      ? TargetKind::post
                    : target->action_type == ActionType::commented ? TargetKind::comment
                                                                   : TargetKind::reply;
  return ctx;
}

}  // namespace facihub
