#pragma once

// Record builders and a scratch directory shared by the test binaries.

#include <atomic>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "facihub/forum_model.hpp"

namespace facihub::testing {

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("facihub-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline Timestamp at(const char* iso) { return require_timestamp(iso); }

inline ActionRecord post(std::string id, std::string author, Timestamp t, std::string text = "post body",
                         std::string title = "title") {
  ActionRecord r;
  r.record_id = "rec-" + id;
  r.timestamp = t;
  r.actor_id = author;
  r.action_type = ActionType::posted;
  r.post_id = id;
  r.post_author_id = std::move(author);
  r.text = std::move(text);
  r.title = std::move(title);
  return r;
}

inline ActionRecord comment(std::string id, std::string author, const ActionRecord& parent_post, Timestamp t,
                            std::string text = "comment body") {
  ActionRecord r;
  r.record_id = "rec-" + id;
  r.timestamp = t;
  r.actor_id = author;
  r.action_type = ActionType::commented;
  r.post_id = parent_post.post_id;
  r.post_author_id = parent_post.post_author_id;
  r.comment_id = std::move(id);
  r.comment_author_id = std::move(author);
  r.text = std::move(text);
  return r;
}

/// Reply to a comment, or to another reply when `parent_reply` is given.
inline ActionRecord reply(std::string id, std::string author, const ActionRecord& parent_comment, Timestamp t,
                          const ActionRecord* parent_reply = nullptr, std::string text = "reply body") {
  ActionRecord r;
  r.record_id = "rec-" + id;
  r.timestamp = t;
  r.actor_id = author;
  r.action_type = ActionType::replied;
  r.post_id = parent_comment.post_id;
  r.post_author_id = parent_comment.post_author_id;
  r.comment_id = parent_comment.comment_id;
  r.comment_author_id = parent_comment.comment_author_id;
  r.reply_id = std::move(id);
  r.reply_author_id = std::move(author);
  if (parent_reply) r.parent_reply_id = parent_reply->reply_id;
  r.text = std::move(text);
  return r;
}

inline ActionRecord like_comment(std::string record_id, std::string actor, const ActionRecord& c, Timestamp t) {
  ActionRecord r;
  r.record_id = std::move(record_id);
  r.timestamp = t;
  r.actor_id = std::move(actor);
  r.action_type = ActionType::liked_comment;
  r.post_id = c.post_id;
  r.post_author_id = c.post_author_id;
  r.comment_id = c.comment_id;
  r.comment_author_id = c.comment_author_id;
  return r;
}

inline ActionRecord like_reply(std::string record_id, std::string actor, const ActionRecord& rep, Timestamp t) {
  ActionRecord r = like_comment(std::move(record_id), std::move(actor), rep, t);
  r.action_type = ActionType::liked_reply;
  r.reply_id = rep.reply_id;
  r.reply_author_id = rep.reply_author_id;
  return r;
}

inline std::string to_ndjson(const std::vector<ActionRecord>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

inline IngestReport ingest_records(ForumStore& store, const std::vector<ActionRecord>& records) {
  std::istringstream in(to_ndjson(records));
  return store.ingest(in);
}

}  // namespace facihub::testing
