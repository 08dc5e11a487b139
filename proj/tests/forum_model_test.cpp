#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "facihub/forum_model.hpp"
#include "support.hpp"

using namespace facihub;
using namespace facihub::testing;

namespace {

IngestReport ingest_text(ForumStore& store, const std::string& text) {
  std::istringstream in(text);
  return store.ingest(in);
}

std::string fixture(const std::string& name) { return std::string(FACIHUB_FIXTURES) + "/" + name; }

}  // namespace

TEST(Time, ParsesZoneOffsetsToUtc) {
  EXPECT_EQ(require_timestamp("2025-12-01T08:00:00+08:00"), require_timestamp("2025-12-01T00:00:00Z"));
  EXPECT_EQ(format_timestamp(require_timestamp("2025-12-01T00:00:00.750Z")), "2025-12-01T00:00:00Z");
  EXPECT_FALSE(parse_timestamp("2025-12-01 00:00:00"));
  EXPECT_FALSE(parse_timestamp("2025-13-01T00:00:00Z"));
  EXPECT_FALSE(parse_timestamp("2025-12-01T00:00:00"));  // zone is mandatory
}

TEST(Time, IsoWeekAtYearBoundary) {
  EXPECT_EQ(iso_week(at("2024-12-30T12:00:00Z")), "2025-W01");
  EXPECT_EQ(iso_week(at("2021-01-03T12:00:00Z")), "2020-W53");
  EXPECT_EQ(iso_week(at("2025-11-30T23:59:59Z")), "2025-W48");
}

TEST(Ingest, ThreeValidRecords) {
  const auto p1 = post("p1", "u1", at("2025-11-29T08:00:00Z"));
  const auto c1 = comment("c1", "u2", p1, at("2025-11-29T09:00:00Z"));
  const auto r1 = reply("r1", "u3", c1, at("2025-11-29T10:00:00Z"));
  ForumStore store;
  const auto report = ingest_records(store, {p1, c1, r1});
  EXPECT_EQ(report.accepted, 3u);
  EXPECT_EQ(report.duplicates_dropped, 0u);
  EXPECT_TRUE(report.rejected.empty());
  EXPECT_EQ(store.snapshot()->size(), 3u);
}

TEST(Ingest, DuplicateRecordIsDropped) {
  const auto p1 = post("p1", "u1", at("2025-11-29T08:00:00Z"));
  ForumStore store;
  const auto report = ingest_records(store, {p1, p1});
  EXPECT_EQ(report.accepted, 1u);
  EXPECT_EQ(report.duplicates_dropped, 1u);
  EXPECT_TRUE(report.rejected.empty());
}

TEST(Ingest, CommentWithoutCommentFieldsIsRejected) {
  ForumStore store;
  const auto report = ingest_text(
      store,
      R"({"record_id":"x","timestamp":"2025-11-29T08:00:00Z","actor_id":"u2","action_type":"commented","post_id":"p1","post_author_id":"u1","text":"hi"})"
      "\n");
  ASSERT_EQ(report.rejected.size(), 1u);
  EXPECT_EQ(report.rejected[0].line_number, 1u);
  EXPECT_EQ(report.rejected[0].reason, "missing comment fields");
  EXPECT_EQ(store.snapshot()->size(), 0u);
}

TEST(Ingest, SchemaViolationsAreReportedPerLine) {
  ForumStore store;
  const std::string good =
      R"({"record_id":"a","timestamp":"2025-11-29T08:00:00Z","actor_id":"u1","action_type":"posted","post_id":"p1","post_author_id":"u1","text":"x"})";
  const auto report = ingest_text(
      store,
      good + "\n"
             "not json\n"
             R"({"record_id":"b","timestamp":"yesterday","actor_id":"u1","action_type":"posted","post_id":"p2","post_author_id":"u1","text":"x"})"
             "\n"
             R"({"record_id":"c","timestamp":"2025-11-29T08:00:00Z","actor_id":"u1","action_type":"shared","post_id":"p2","post_author_id":"u1"})"
             "\n"
             R"({"record_id":"d","timestamp":"2025-11-29T08:00:00Z","actor_id":"u9","action_type":"liked_comment","post_id":"p1","post_author_id":"u1","comment_id":"c404","comment_author_id":"u2"})"
             "\n"
             R"({"record_id":"e","timestamp":"2025-11-29T08:00:00Z","actor_id":"u9","action_type":"liked_comment","post_id":"p1","post_author_id":"u1","comment_id":"c1","comment_author_id":"u2","text":"no"})"
             "\n");
  EXPECT_EQ(report.accepted, 1u);
  ASSERT_EQ(report.rejected.size(), 5u);
  EXPECT_EQ(report.rejected[0].line_number, 2u);
  EXPECT_EQ(report.rejected[0].reason, "invalid JSON");
  EXPECT_EQ(report.rejected[1].reason, "unparsable timestamp 'yesterday'");
  EXPECT_EQ(report.rejected[2].reason, "unknown action_type 'shared'");
  EXPECT_EQ(report.rejected[3].reason, "dangling like target 'c404'");
  EXPECT_EQ(report.rejected[4].reason, "unexpected text");
  EXPECT_EQ(report.accepted + report.duplicates_dropped + report.rejected.size(), 6u);
}

TEST(Ingest, ReplyFieldsFollowActionType) {
  auto p1 = post("p1", "u1", at("2025-11-29T08:00:00Z"));
  auto c1 = comment("c1", "u2", p1, at("2025-11-29T09:00:00Z"));
  auto bad_reply = reply("r1", "u3", c1, at("2025-11-29T10:00:00Z"));
  bad_reply.reply_author_id.reset();
  auto bad_comment = comment("c2", "u2", p1, at("2025-11-29T09:00:00Z"));
  bad_comment.reply_id = "zz";
  auto titled = comment("c3", "u2", p1, at("2025-11-29T09:00:00Z"));
  titled.title = "no";
  auto impostor = comment("c4", "u2", p1, at("2025-11-29T09:00:00Z"));
  impostor.actor_id = "u5";

  ForumStore store;
  const auto report = ingest_records(store, {p1, c1, bad_reply, bad_comment, titled, impostor});
  ASSERT_EQ(report.rejected.size(), 4u);
  EXPECT_EQ(report.rejected[0].reason, "missing reply fields");
  EXPECT_EQ(report.rejected[1].reason, "unexpected reply fields");
  EXPECT_EQ(report.rejected[2].reason, "title is only valid on posted records");
  EXPECT_EQ(report.rejected[3].reason, "commented record actor must be the comment author");
}

TEST(Ingest, ArtifactIdsAreUnique) {
  const auto p1 = post("p1", "u1", at("2025-11-29T08:00:00Z"));
  auto again = post("p1", "u1", at("2025-11-29T09:00:00Z"));
  again.record_id = "other";
  ForumStore store;
  const auto report = ingest_records(store, {p1, again});
  ASSERT_EQ(report.rejected.size(), 1u);
  EXPECT_EQ(report.rejected[0].reason, "artifact 'p1' already exists");
}

TEST(Ingest, IdempotentAcrossRepeatedFiles) {
  ForumStore once, twice;
  once.ingest_file(fixture("logs.ndjson"));
  twice.ingest_file(fixture("logs.ndjson"));
  const auto second = twice.ingest_file(fixture("logs.ndjson"));
  EXPECT_EQ(second.accepted, 0u);
  EXPECT_EQ(second.duplicates_dropped, 20u);
  ASSERT_EQ(once.snapshot()->size(), twice.snapshot()->size());
  for (std::size_t i = 0; i < once.snapshot()->size(); ++i)
    EXPECT_EQ(to_json(once.snapshot()->records()[i]), to_json(twice.snapshot()->records()[i]));
}

TEST(Ingest, SampleFixtureCoversEveryActionType) {
  ForumStore store;
  const auto report = store.ingest_file(fixture("logs.ndjson"));
  EXPECT_EQ(report.accepted, 20u);
  EXPECT_TRUE(report.rejected.empty());
  std::set<ActionType> seen;
  const auto snap = store.snapshot();
  for (const auto& r : snap->records()) seen.insert(r.action_type);
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Ingest, MissingFileIsAnIoError) {
  ForumStore store;
  try {
    store.ingest_file("/nonexistent/log.ndjson");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
}

TEST(Store, IterationOrderIsArrivalOrderAndSurvivesReplay) {
  ScratchDir dir("store");
  const auto p2 = post("p2", "u1", at("2025-11-29T12:00:00Z"));
  const auto p1 = post("p1", "u1", at("2025-11-29T08:00:00Z"));
  const auto c1 = comment("c1", "u2", p1, at("2025-11-29T09:00:00Z"));
  {
    ForumStore store(dir.file("records.ndjson"));
    ingest_records(store, {p2, p1});
    ingest_records(store, {c1});
  }
  ForumStore replayed(dir.file("records.ndjson"));
  const auto& records = replayed.snapshot()->records();
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[0].record_id, "rec-p2");
  EXPECT_EQ(records[1].record_id, "rec-p1");
  EXPECT_EQ(records[2].record_id, "rec-c1");
  EXPECT_EQ(to_json(records[2]), to_json(c1));
}

TEST(Store, SnapshotsAreStableWhileWriting) {
  ForumStore store;
  ingest_records(store, {post("p1", "u1", at("2025-11-29T08:00:00Z"))});
  const auto before = store.snapshot();
  ingest_records(store, {post("p2", "u1", at("2025-11-29T09:00:00Z"))});
  EXPECT_EQ(before->size(), 1u);
  EXPECT_EQ(store.snapshot()->size(), 2u);
}

TEST(Store, CorruptReplayIsAnIntegrityError) {
  ScratchDir dir("corrupt");
  std::ofstream(dir.file("records.ndjson")) << "{broken\n";
  try {
    ForumStore store(dir.file("records.ndjson"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::integrity);
  }
}

class ThreadTest : public ::testing::Test {
 protected:
  void SetUp() override {
    p1 = post("p1", "u1", at("2025-11-29T08:00:00Z"), "body of p1", "Title of p1");
    c1 = comment("c1", "u2", p1, at("2025-11-29T09:00:00Z"), "first comment");
    r1 = reply("r1", "u3", c1, at("2025-11-29T10:00:00Z"), nullptr, "first reply");
    r2 = reply("r2", "u2", c1, at("2025-11-29T11:00:00Z"), &r1, "nested reply");
    ingest_records(store, {p1, c1, r1, r2});
  }

  ForumStore store;
  ActionRecord p1, c1, r1, r2;
};

TEST_F(ThreadTest, ReplyUnderComment) {
  const auto ctx = resolve_thread(*store.snapshot(), "r1");
  EXPECT_EQ(ctx.post.post_id, "p1");
  EXPECT_EQ(ctx.post.title, "Title of p1");
  EXPECT_EQ(ctx.post.content, "body of p1");
  ASSERT_EQ(ctx.comment_chain.size(), 2u);
  EXPECT_EQ(ctx.comment_chain[0].id, "c1");
  EXPECT_EQ(ctx.comment_chain[1].id, "r1");
  EXPECT_EQ(ctx.target_kind, TargetKind::reply);
}

TEST_F(ThreadTest, PostHasEmptyChain) {
  const auto ctx = resolve_thread(*store.snapshot(), "p1");
  EXPECT_EQ(ctx.post.post_id, "p1");
  EXPECT_TRUE(ctx.comment_chain.empty());
  EXPECT_EQ(ctx.target_kind, TargetKind::post);
}

TEST_F(ThreadTest, ChainLengthEqualsDepth) {
  const auto snap = store.snapshot();
  EXPECT_EQ(resolve_thread(*snap, "p1").comment_chain.size(), 0u);
  EXPECT_EQ(resolve_thread(*snap, "c1").comment_chain.size(), 1u);
  EXPECT_EQ(resolve_thread(*snap, "r1").comment_chain.size(), 2u);
  const auto deep = resolve_thread(*snap, "r2");
  ASSERT_EQ(deep.comment_chain.size(), 3u);
  EXPECT_EQ(deep.comment_chain[0].id, "c1");
  EXPECT_EQ(deep.comment_chain[1].id, "r1");
  EXPECT_EQ(deep.comment_chain[2].id, "r2");
  EXPECT_EQ(deep.comment_chain[2].text, "nested reply");
}

TEST_F(ThreadTest, Deterministic) {
  const auto snap = store.snapshot();
  EXPECT_EQ(to_json(resolve_thread(*snap, "r2")), to_json(resolve_thread(*snap, "r2")));
}

TEST_F(ThreadTest, UnknownTargetIsNotFound) {
  try {
    resolve_thread(*store.snapshot(), "nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_found);
  }
}

TEST(Thread, CommentWithAbsentPostIsIntegrityError) {
  const auto ghost = post("p9", "u1", at("2025-11-29T08:00:00Z"));
  const auto c = comment("c9", "u2", ghost, at("2025-11-29T09:00:00Z"));
  ForumStore store;
  ingest_records(store, {c});
  try {
    resolve_thread(*store.snapshot(), "c9");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::integrity);
    EXPECT_NE(std::string(e.what()).find("'p9'"), std::string::npos);
  }
}

TEST(Thread, ReplyWithAbsentParentNamesTheMissingAncestor) {
  const auto p1 = post("p1", "u1", at("2025-11-29T08:00:00Z"));
  const auto ghost = comment("c404", "u2", p1, at("2025-11-29T09:00:00Z"));
  const auto r = reply("r1", "u3", ghost, at("2025-11-29T10:00:00Z"));
  ForumStore store;
  ingest_records(store, {p1, r});
  try {
    resolve_thread(*store.snapshot(), "r1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::integrity);
    EXPECT_NE(std::string(e.what()).find("'c404'"), std::string::npos);
  }
}
