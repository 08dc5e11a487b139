#include <random>

#include <gtest/gtest.h>

#include "facihub/presence.hpp"
#include "support.hpp"

using namespace facihub;
using namespace facihub::testing;

namespace {

CodedUnit unit(Indicator i, Salience s, std::string record = "r1") { return {std::move(record), i, s, "c1"}; }

double at_ind(const IndicatorVector& v, Indicator i) { return v[static_cast<std::size_t>(i)]; }

void expect_identities(const PresenceIndexVector& p) {
  EXPECT_EQ(p[PresenceIndex::SP_total], p[PresenceIndex::SP_AF] + p[PresenceIndex::SP_OC] + p[PresenceIndex::SP_NC]);
  EXPECT_EQ(p[PresenceIndex::CP_total], p[PresenceIndex::CP_PT] + p[PresenceIndex::CP_EX] + p[PresenceIndex::CP_IN] +
                                            p[PresenceIndex::CP_RC]);
}

}  // namespace

TEST(ScoreRecord, PrimaryAndSecondaryValues) {
  const std::vector<CodedUnit> units{unit(Indicator::OC1, Salience::primary), unit(Indicator::OC2, Salience::secondary)};
  const auto v = score_record(units);
  EXPECT_EQ(at_ind(v, Indicator::OC1), 1.0);
  EXPECT_EQ(at_ind(v, Indicator::OC2), 0.5);
  double sum = 0;
  for (double x : v) sum += x;
  EXPECT_EQ(sum, 1.5);
}

TEST(ScoreRecord, EmptyAndMaxRule) {
  EXPECT_EQ(score_record({}), IndicatorVector{});
  const std::vector<CodedUnit> dup{unit(Indicator::AF1, Salience::secondary), unit(Indicator::AF1, Salience::primary)};
  EXPECT_EQ(at_ind(score_record(dup), Indicator::AF1), 1.0);
}

TEST(ScoreRecord, MixedRecordsRejected) {
  const std::vector<CodedUnit> units{unit(Indicator::AF1, Salience::primary, "r1"),
                                     unit(Indicator::AF2, Salience::primary, "r2")};
  EXPECT_THROW(score_record(units), Error);
}

TEST(ScoreRecord, OrderInsensitive) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<CodedUnit> units;
    const int n = static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i)
      units.push_back(unit(kAllIndicators[rng() % kIndicatorCount], rng() % 2 ? Salience::primary : Salience::secondary));
    const auto expected = score_record(units);
    std::shuffle(units.begin(), units.end(), rng);
    EXPECT_EQ(score_record(units), expected);
  }
}

TEST(CodedUnits, UnknownIndicatorIsValidationError) {
  std::istringstream in(R"({"record_id":"r1","indicator":"XX1","salience":"primary"})");
  try {
    read_coded_units(in);
    FAIL();
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.fields().size(), 1u);
    EXPECT_EQ(e.fields()[0].field, "indicator");
  }
  std::istringstream ok(R"({"record_id":"r1","indicator":"OC-2","salience":"secondary","coder_id":"h1"})");
  EXPECT_EQ(read_coded_units(ok)[0], (CodedUnit{"r1", Indicator::OC2, Salience::secondary, "h1"}));
}

TEST(Aggregate, CategorySums) {
  IndicatorVector v{};
  v[static_cast<std::size_t>(Indicator::AF1)] = 1.0;
  v[static_cast<std::size_t>(Indicator::AF2)] = 0.5;
  const auto p = aggregate_indices(v);
  EXPECT_EQ(p[PresenceIndex::SP_AF], 1.5);
  EXPECT_EQ(p[PresenceIndex::SP_total], 1.5);
  EXPECT_EQ(p[PresenceIndex::CP_total], 0.0);
}

TEST(Aggregate, AllPrimaryAndZero) {
  IndicatorVector all;
  all.fill(1.0);
  const auto p = aggregate_indices(all);
  EXPECT_EQ(p[PresenceIndex::SP_total], 6.0);
  EXPECT_EQ(p[PresenceIndex::CP_total], 8.0);
  EXPECT_EQ(aggregate_indices(IndicatorVector{}), PresenceIndexVector{});
}

TEST(Aggregate, IdentitiesHoldOnRandomRecords) {
  std::mt19937 rng(11);
  const double levels[] = {0.0, 0.5, 1.0};
  for (int trial = 0; trial < 500; ++trial) {
    IndicatorVector v;
    for (double& x : v) x = levels[rng() % 3];
    const auto p = aggregate_indices(v);
    expect_identities(p);
    for (PresenceIndex idx : detail::kCategoryIndices) {
      EXPECT_GE(p[idx], 0.0);
      EXPECT_LE(p[idx], 2.0);
    }
  }
}

TEST(LearnerMeans, ArithmeticMeanPerCondition) {
  PresenceIndexVector one, zero;
  one[PresenceIndex::SP_AF] = 1.0;
  detail::fill_totals(one);
  const std::vector<LearnerScore> rows{{"u1", Condition::with_pca, one},
                                       {"u1", Condition::with_pca, zero},
                                       {"u2", Condition::without_pca, one}};
  const auto m = learner_level_means(rows);
  EXPECT_EQ(m.at({"u1", Condition::with_pca})[PresenceIndex::SP_total], 0.5);
  EXPECT_EQ(m.at({"u2", Condition::without_pca}), one);
  EXPECT_FALSE(m.count({"u2", Condition::with_pca}));
}

TEST(LearnerMeans, IdentitiesHoldExactly) {
  std::mt19937 rng(3);
  std::vector<LearnerScore> rows;
  for (int i = 0; i < 300; ++i) {
    IndicatorVector v;
    for (double& x : v) x = (rng() % 3) * 0.5;
    rows.push_back({"u" + std::to_string(rng() % 7), rng() % 2 ? Condition::with_pca : Condition::without_pca,
                    aggregate_indices(v)});
  }
  for (const auto& [key, mean] : learner_level_means(rows)) expect_identities(mean);
}

class Modes : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto t = [](int h) { return at("2025-11-29T00:00:00Z") + std::chrono::hours{h}; };
    p1 = post("p1", "u1", t(1));
    c1 = comment("c1", "u2", p1, t(2));
    c4 = comment("c4", "u4", p1, t(3));
    agent = reply("pca-x", "pca", c1, t(4));
    y3 = reply("y3", "u3", c1, t(5), &agent);
    p2 = post("p2", "u5", t(1));
    c6 = comment("c6", "u6", p2, t(2));
    ingest_records(store, {p1, c1, c4, agent, y3, p2, c6});
    publications = {{"cand-x", "c1", t(4), agent.record_id}};
  }

  ForumStore store;
  ActionRecord p1, c1, c4, agent, y3, p2, c6;
  std::vector<PublicationEvent> publications;
};

TEST_F(Modes, DirectCoPresenceAndExcluded) {
  const auto modes = classify_interaction_modes(*store.snapshot(), publications, "pca");
  std::map<std::string, InteractionMode> by;
  for (const auto& m : modes) by[m.learner_id] = m;
  EXPECT_EQ(by.size(), 4u);
  EXPECT_EQ(by.at("u2").mode, InteractionModeKind::direct);  // agent replied to u2
  EXPECT_EQ(by.at("u3").mode, InteractionModeKind::direct);  // u3 replied to the agent
  EXPECT_EQ(by.at("u3").evidence, (std::vector<std::string>{y3.record_id}));
  EXPECT_EQ(by.at("u4").mode, InteractionModeKind::co_presence);
  EXPECT_EQ(by.at("u1").mode, InteractionModeKind::co_presence);
  EXPECT_FALSE(by.count("u5"));
  EXPECT_FALSE(by.count("u6"));
  EXPECT_FALSE(by.count("pca"));
}

TEST_F(Modes, NoPublicationsNoModes) {
  EXPECT_TRUE(classify_interaction_modes(*store.snapshot(), {}, "pca").empty());
}

namespace {

CodingAssignments from_bits(const std::vector<int>& bits, Indicator ind = Indicator::OC1) {
  CodingAssignments out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    auto& s = out["r" + std::to_string(1000 + i)];
    if (bits[i]) s.insert(ind);
  }
  return out;
}

}  // namespace

TEST(Kappa, IdenticalCodingsAgreePerfectly) {
  const auto a = from_bits({1, 0, 1, 1, 0});
  const auto k = cohens_kappa(a, a, Indicator::OC1);
  ASSERT_TRUE(k.kappa);
  EXPECT_DOUBLE_EQ(*k.kappa, 1.0);
}

TEST(Kappa, HandCountedTable) {
  // both 20, neither 15, a-only 5, b-only 10: p_o = 0.7, p_e = 0.5
  std::vector<int> a, b;
  auto add = [&](int n, int x, int y) {
    for (int i = 0; i < n; ++i) {
      a.push_back(x);
      b.push_back(y);
    }
  };
  add(20, 1, 1);
  add(15, 0, 0);
  add(5, 1, 0);
  add(10, 0, 1);
  const auto k = cohens_kappa(from_bits(a), from_bits(b), Indicator::OC1);
  EXPECT_NEAR(k.observed_agreement, 0.7, 1e-12);
  EXPECT_NEAR(k.expected_agreement, 0.5, 1e-12);
  EXPECT_NEAR(*k.kappa, 0.4, 1e-12);
  EXPECT_NEAR(*detail::kappa_from_counts(20, 15, 5, 10).kappa, 0.4, 1e-12);
}

TEST(Kappa, IndependentCodersNearZero) {
  std::mt19937 rng(20251130);
  std::bernoulli_distribution coin(0.3);
  std::vector<int> a(1000), b(1000);
  for (auto& x : a) x = coin(rng);
  for (auto& x : b) x = coin(rng);
  const auto k = cohens_kappa(from_bits(a), from_bits(b), Indicator::OC1);
  EXPECT_LT(std::abs(*k.kappa), 0.1);
}

TEST(Kappa, SymmetricInCoders) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a(40), b(40);
    for (auto& x : a) x = rng() % 2;
    for (auto& x : b) x = rng() % 2;
    const auto ab = cohens_kappa(from_bits(a), from_bits(b), Indicator::OC1);
    const auto ba = cohens_kappa(from_bits(b), from_bits(a), Indicator::OC1);
    ASSERT_EQ(ab.degenerate, ba.degenerate);
    if (ab.kappa) {
      EXPECT_DOUBLE_EQ(*ab.kappa, *ba.kappa);
    }
  }
}

TEST(Kappa, ConstantIdenticalCodingsAreDegenerate) {
  const auto a = from_bits({0, 0, 0});
  const auto k = cohens_kappa(a, a, Indicator::OC1);
  EXPECT_TRUE(k.degenerate);
  EXPECT_FALSE(k.kappa);
  EXPECT_EQ(k.observed_agreement, 1.0);
}

TEST(Kappa, RecordSetsMustMatch) {
  EXPECT_THROW(cohens_kappa(from_bits({1, 0}), from_bits({1}), Indicator::OC1), Error);
}

TEST(Kappa, UnitsToAssignmentsKeepUncodedRecords) {
  const std::vector<CodedUnit> units{unit(Indicator::OC1, Salience::primary, "r1")};
  const std::vector<std::string> ids{"r1", "r2"};
  const auto a = assignments_from_units(units, ids);
  EXPECT_EQ(a.size(), 2u);
  EXPECT_TRUE(a.at("r2").empty());
}

TEST(LlmCoding, HappyPathRejectionAndEmptyText) {
  const auto t = at("2025-11-29T08:00:00Z");
  auto p1 = post("p1", "u1", t, "I love this idea");
  auto c1 = comment("c1", "u2", p1, t, "strange");
  auto c2 = comment("c2", "u3", p1, t, "   ");
  auto like = like_comment("lk1", "u4", c1, t);
  StubClient client([](const GenerationRequest& req, std::size_t) -> std::string {
    return req.user_messages.front() == "strange" ? "XX1 primary" : "OC2 primary";
  });
  const std::vector<ActionRecord> records{p1, c1, c2, like};
  const auto result = llm_code_records(records, client);
  ASSERT_EQ(result.units.size(), 1u);
  EXPECT_EQ(result.units[0], (CodedUnit{p1.record_id, Indicator::OC2, Salience::primary, "llm"}));
  ASSERT_EQ(result.rejections.size(), 1u);
  EXPECT_EQ(result.rejections[0].record_id, c1.record_id);
  EXPECT_EQ(result.rejections[0].raw_output, "XX1 primary");
  EXPECT_EQ(client.requests().size(), 2u);  // blank text and likes never reach the model
  EXPECT_DOUBLE_EQ(client.requests()[0].temperature, 0.7);
}

TEST(LlmCoding, RetriesThenRaises) {
  auto client = StubClient::scripted({"I would say OC2.", "NONE"});
  const auto r = post("p1", "u1", at("2025-11-29T08:00:00Z"), "hello all");
  const auto outcome = code_record(r, client, CodingScheme::defaults(), {});
  EXPECT_TRUE(std::get<std::vector<CodedUnit>>(outcome).empty());

  auto garbage = StubClient::scripted({"I would say OC2."});
  EXPECT_THROW(code_record(r, garbage, CodingScheme::defaults(), {}), UnparseableOutputError);
  EXPECT_EQ(garbage.requests().size(), 3u);
}

TEST(LlmCoding, ParserAcceptsTheLineFormat) {
  const auto p = parse_coding_output("OC2 primary\n`EX1 secondary`\n");
  ASSERT_TRUE(p);
  ASSERT_EQ(p->size(), 2u);
  EXPECT_EQ((*p)[1].code, "EX1");
  EXPECT_EQ((*p)[1].salience, Salience::secondary);
  EXPECT_FALSE(parse_coding_output(""));
  EXPECT_FALSE(parse_coding_output("OC2 important"));
}

TEST(LlmCoding, SchemeFixtureMatchesDefaults) {
  const auto loaded = CodingScheme::load(std::string(FACIHUB_FIXTURES) + "/coding_scheme.json");
  EXPECT_EQ(loaded.render(), CodingScheme::defaults().render());
}

TEST(LlmCoding, DeterministicCoderIsStable) {
  const auto r = post("p1", "u1", at("2025-11-29T08:00:00Z"), "We co-designed a rubric together.");
  DeterministicCoderClient a, b;
  const std::vector<ActionRecord> records{r};
  EXPECT_EQ(llm_code_records(records, a).units, llm_code_records(records, b).units);
}
