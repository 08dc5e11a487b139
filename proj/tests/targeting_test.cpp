#include <gtest/gtest.h>

#include "facihub/targeting.hpp"
#include "support.hpp"

using namespace facihub;
using namespace facihub::testing;

TEST(Assignment, AlternatesByTimestampOrder) {
  const auto a = assign_conditions({{"p3", at("2025-11-29T12:00:00Z")},
                                    {"p1", at("2025-11-29T08:00:00Z")},
                                    {"p2", at("2025-11-29T10:00:00Z")}});
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0], (ConditionAssignment{"p1", Condition::with_pca, 1}));
  EXPECT_EQ(a[1], (ConditionAssignment{"p2", Condition::without_pca, 2}));
  EXPECT_EQ(a[2], (ConditionAssignment{"p3", Condition::with_pca, 3}));
}

TEST(Assignment, SinglePostIsWith) {
  const auto a = assign_conditions({{"p1", at("2025-11-29T08:00:00Z")}});
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].condition, Condition::with_pca);
}

TEST(Assignment, TimestampTiesBreakById) {
  const auto t = at("2025-11-29T08:00:00Z");
  const auto a = assign_conditions({{"pb", t}, {"pa", t}});
  EXPECT_EQ(a[0].post_id, "pa");
  EXPECT_EQ(a[1].post_id, "pb");
}

TEST(Assignment, ParityMappingCanBeSwapped) {
  const auto a = assign_conditions({{"p1", at("2025-11-29T08:00:00Z")}, {"p2", at("2025-11-29T09:00:00Z")}},
                                   ParityMapping::odd_without_pca);
  EXPECT_EQ(a[0].condition, Condition::without_pca);
  EXPECT_EQ(a[1].condition, Condition::with_pca);
}

TEST(Registry, SameBatchTwiceIsStable) {
  ConditionRegistry reg;
  const std::vector<FocalPost> batch{{"p1", at("2025-11-29T08:00:00Z")}, {"p2", at("2025-11-29T09:00:00Z")}};
  const auto first = reg.assign(batch, ParityMapping::odd_with_pca);
  const auto second = reg.assign(batch, ParityMapping::odd_with_pca);
  EXPECT_EQ(first.batch, second.batch);
  EXPECT_EQ(first.delta.size(), 2u);
  EXPECT_TRUE(second.delta.empty());
}

TEST(Registry, SequenceContinuesAndPostsKeepTheirCondition) {
  ScratchDir dir("registry");
  {
    ConditionRegistry reg(dir.file("assignments.ndjson"));
    reg.assign({{"p1", at("2025-11-29T08:00:00Z")}}, ParityMapping::odd_with_pca);
  }
  ConditionRegistry reg(dir.file("assignments.ndjson"));
  // p0 is older than p1 but arrives later: it takes the next sequence slot.
  const auto r = reg.assign({{"p0", at("2025-11-28T08:00:00Z")}, {"p1", at("2025-11-29T08:00:00Z")}},
                            ParityMapping::odd_with_pca);
  ASSERT_EQ(r.delta.size(), 1u);
  EXPECT_EQ(r.delta[0], (ConditionAssignment{"p0", Condition::without_pca, 2}));
  EXPECT_EQ(reg.condition_of("p1"), Condition::with_pca);
  EXPECT_EQ(r.batch.front().post_id, "p1");
}

class DailyTargeting : public ::testing::Test {
 protected:
  void SetUp() override {
    p1 = post("p1", "u1", at("2025-11-29T08:00:00Z"));
    p2 = post("p2", "u2", at("2025-11-29T09:00:00Z"));
    c1 = comment("c1", "u3", p1, at("2025-11-29T10:00:00Z"));
    c2 = comment("c2", "u4", p2, at("2025-11-29T11:00:00Z"));
    ingest_records(store, {p1, p2, c1, c2});
    config.fraction = 1.0;
  }

  RunManifest run(Timestamp as_of, std::optional<Timestamp> previous = std::nullopt) {
    return run_daily_targeting(*store.snapshot(), registry, as_of, previous, config);
  }

  ForumStore store;
  ConditionRegistry registry;
  TargetingConfig config;
  ActionRecord p1, p2, c1, c2;
};

TEST_F(DailyTargeting, WithoutThreadsAreFilteredNotEmitted) {
  const auto m = run(at("2025-11-30T00:00:00Z"));
  ASSERT_EQ(m.assignment_delta.size(), 2u);
  EXPECT_EQ(registry.condition_of("p1"), Condition::with_pca);
  EXPECT_EQ(registry.condition_of("p2"), Condition::without_pca);
  std::set<std::string> emitted;
  for (const auto& t : m.targets) {
    EXPECT_EQ(registry.condition_of(t.root_post_id), Condition::with_pca);
    EXPECT_EQ(t.trigger, Trigger::network);
    EXPECT_EQ(resolve_thread(*store.snapshot(), t.target_id).post.post_id, t.root_post_id);
    emitted.insert(t.target_id);
  }
  EXPECT_EQ(emitted, (std::set<std::string>{"p1", "c1"}));
  EXPECT_EQ(m.filtered_out.size(), 2u);
  EXPECT_EQ(m.focal_centrality.size(), 2u);
}

TEST_F(DailyTargeting, RerunWithoutIngestionIsIdempotent) {
  const auto first = run(at("2025-11-30T00:00:00Z"));
  const auto second = run(at("2025-11-30T00:00:00Z"));
  EXPECT_EQ(first.targets, second.targets);
  EXPECT_TRUE(second.assignment_delta.empty());
}

TEST_F(DailyTargeting, EmptyWindowAndNoRepliesGivesNoTargets) {
  const auto m = run(at("2025-12-10T00:00:00Z"));
  EXPECT_TRUE(m.targets.empty());
  EXPECT_EQ(m.network_candidates, 0u);
  EXPECT_EQ(m.learner_reply_candidates, 0u);
}

TEST_F(DailyTargeting, LearnerReplyToAgentBecomesTarget) {
  run(at("2025-11-30T00:00:00Z"));  // p1 -> with_pca
  auto pca = reply("pca-1", "pca", c1, at("2025-11-30T02:00:00Z"), nullptr, "agent reply");
  auto learner = reply("y1", "u3", c1, at("2025-12-02T09:00:00Z"), &pca, "thanks!");
  ingest_records(store, {pca, learner});

  // Window well after the activity so only the reply trigger can fire.
  config.window_hours = 1;
  const auto m = run(at("2025-12-03T00:00:00Z"), at("2025-12-02T00:00:00Z"));
  ASSERT_EQ(m.targets.size(), 1u);
  EXPECT_EQ(m.targets[0].target_id, "y1");
  EXPECT_EQ(m.targets[0].trigger, Trigger::learner_reply);
  EXPECT_EQ(m.targets[0].root_post_id, "p1");
  EXPECT_FALSE(m.targets[0].centrality);

  // A later run no longer sees it as new.
  const auto later = run(at("2025-12-04T00:00:00Z"), at("2025-12-03T00:00:00Z"));
  EXPECT_TRUE(later.targets.empty());
}

TEST_F(DailyTargeting, FirstRunTreatsWholeStoreAsNew) {
  auto pca = reply("pca-1", "pca", c1, at("2025-11-20T02:00:00Z"));
  auto learner = reply("y1", "u3", c1, at("2025-11-21T09:00:00Z"), &pca);
  ingest_records(store, {pca, learner});
  config.window_hours = 1;
  const auto m = run(at("2025-12-03T00:00:00Z"));
  EXPECT_EQ(m.learner_reply_candidates, 1u);
}

TEST_F(DailyTargeting, BothTriggersDedupeToLearnerReply) {
  auto pca = reply("pca-1", "pca", c1, at("2025-11-29T12:00:00Z"));
  auto learner = reply("y1", "u3", c1, at("2025-11-29T13:00:00Z"), &pca);
  ingest_records(store, {pca, learner});
  const auto m = run(at("2025-11-30T00:00:00Z"));
  EXPECT_EQ(m.network_candidates + m.learner_reply_candidates, m.merged + 1);
  const auto it = std::find_if(m.targets.begin(), m.targets.end(), [](const auto& t) { return t.target_id == "y1"; });
  ASSERT_NE(it, m.targets.end());
  EXPECT_EQ(it->trigger, Trigger::learner_reply);
  EXPECT_EQ(std::count_if(m.targets.begin(), m.targets.end(), [](const auto& t) { return t.target_id == "y1"; }), 1);
}

TEST_F(DailyTargeting, ManifestRecordsParity) {
  config.parity = ParityMapping::odd_without_pca;
  const auto m = run(at("2025-11-30T00:00:00Z"));
  EXPECT_EQ(to_json(m)["parity_mapping"], "odd_without_pca");
  EXPECT_EQ(registry.condition_of("p1"), Condition::without_pca);
  for (const auto& t : m.targets) EXPECT_EQ(t.root_post_id, "p2");
}
