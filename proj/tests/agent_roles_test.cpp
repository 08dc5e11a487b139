#include <gtest/gtest.h>

#include "facihub/agent_roles.hpp"
#include "support.hpp"

using namespace facihub;
using namespace facihub::testing;

namespace {

std::string reply_block(const std::string& role, const std::string& text) {
  return "<reply>\nreply_role: " + role + "\nreply_text: " + text + "\n</reply>";
}

class Prompts : public ::testing::Test {
 protected:
  void SetUp() override {
    p1 = post("p1", "u1", at("2025-11-29T08:00:00Z"), "We tried AI quizzes.", "AI quizzes in grade 7");
    c1 = comment("c1", "u2", p1, at("2025-11-29T09:00:00Z"), "How did you check answers?");
    r1 = reply("r1", "u3", c1, at("2025-11-29T10:00:00Z"), nullptr, "By hand, mostly.");
    ingest_records(store, {p1, c1, r1});
  }

  PromptBundle bundle_for(const std::string& id, const RoleFramework& fw = RoleFramework::refined()) {
    const auto snap = store.snapshot();
    InterventionTarget t{id, Trigger::network, *snap->root_post_of(id), at("2025-11-30T00:00:00Z"), 0.5};
    return assemble_prompt(t, resolve_thread(*snap, id), fw);
  }

  ForumStore store;
  ActionRecord p1, c1, r1;
};

}  // namespace

TEST_F(Prompts, PostTargetUsesPostTemplate) {
  const auto b = bundle_for("p1");
  EXPECT_NE(b.user_prompt.find("Title: AI quizzes in grade 7"), std::string::npos);
  EXPECT_NE(b.user_prompt.find("Content: We tried AI quizzes."), std::string::npos);
  EXPECT_EQ(b.user_prompt.find("Upstream comment thread"), std::string::npos);
  EXPECT_NE(b.system_prompt.find("You are Li Rui (call me Rui)"), std::string::npos);
}

TEST_F(Prompts, TopLevelCommentHasNoThreadSection) {
  const auto b = bundle_for("c1");
  EXPECT_NE(b.user_prompt.find("Parent post title: AI quizzes in grade 7"), std::string::npos);
  EXPECT_NE(b.user_prompt.find("Target comment: How did you check answers?"), std::string::npos);
  EXPECT_EQ(b.user_prompt.find("Upstream comment thread"), std::string::npos);
}

TEST_F(Prompts, ReplyAtDepthTwoCarriesUpstreamThread) {
  const auto b = bundle_for("r1");
  EXPECT_NE(b.user_prompt.find("Upstream comment thread: [u2] How did you check answers?"), std::string::npos);
  EXPECT_NE(b.user_prompt.find("Target comment: By hand, mostly."), std::string::npos);
}

TEST_F(Prompts, GuidanceEmbedsOnlyEnabledRoles) {
  RoleFramework guide_only = RoleFramework::full();
  guide_only.enabled = {Role::Guide};
  const auto b = bundle_for("p1", guide_only);
  EXPECT_NE(b.role_guidance.find("Guide | "), std::string::npos);
  EXPECT_EQ(b.role_guidance.find("Amplifier | "), std::string::npos);
  EXPECT_EQ(b.role_guidance.find("Empathizer"), std::string::npos);
  EXPECT_EQ(b.enabled_roles, (std::vector<Role>{Role::Guide}));

  const auto refined = bundle_for("p1");
  EXPECT_NE(refined.role_guidance.find("Amplifier | "), std::string::npos);
  EXPECT_EQ(refined.role_guidance.find("Critical_Inquirer"), std::string::npos);
  EXPECT_EQ(refined.generation_params.model_name, "kimi-k2-turbo-preview");
  EXPECT_DOUBLE_EQ(refined.generation_params.temperature, 0.6);
}

TEST_F(Prompts, KindMismatchIsArgumentError) {
  const auto snap = store.snapshot();
  InterventionTarget t{"r1", Trigger::network, "p1", at("2025-11-30T00:00:00Z"), std::nullopt};
  try {
    assemble_prompt(t, resolve_thread(*snap, "c1"), RoleFramework::refined());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::argument);
  }
  auto ctx = resolve_thread(*snap, "r1");
  ctx.target_kind = TargetKind::post;
  EXPECT_THROW(assemble_prompt(t, ctx, RoleFramework::refined()), Error);
}

TEST_F(Prompts, FixtureTemplatesMatchDefaults) {
  const auto loaded = load_prompt_templates(std::string(FACIHUB_FIXTURES) + "/prompts");
  const PromptTemplates defaults;
  EXPECT_EQ(loaded.persona, defaults.persona);
  EXPECT_EQ(loaded.comment_template, defaults.comment_template);
  EXPECT_EQ(loaded.output_format, defaults.output_format);
}

TEST(Framework, RefinedEnablesGuideAndAmplifier) {
  const auto fw = RoleFramework::refined();
  EXPECT_EQ(fw.enabled, (std::set<Role>{Role::Guide, Role::Amplifier}));
  EXPECT_EQ(fw.roles.size(), 4u);
  RoleFramework broken;
  broken.enabled = {Role::Guide};
  EXPECT_THROW(broken.validate(), Error);
}

TEST(Framework, RoleLabelsAreClosed) {
  EXPECT_EQ(parse_role("Critical Inquirer"), Role::Critical_Inquirer);
  EXPECT_EQ(parse_role("guide"), Role::Guide);
  EXPECT_FALSE(parse_role("Mentor"));
}

TEST(Parse, ExtractsRoleAndText) {
  const auto p = parse_structured_output("noise\n" + reply_block("Guide", "Nice work.\nSecond line.") + "\ntrailer");
  ASSERT_TRUE(p);
  EXPECT_EQ(p->role_label, "Guide");
  EXPECT_EQ(p->text, "Nice work.\nSecond line.");
  EXPECT_FALSE(parse_structured_output("I think you are doing great!"));
  EXPECT_FALSE(parse_structured_output("<reply>\nreply_role: Guide\n</reply>"));
  EXPECT_FALSE(parse_structured_output(reply_block("", "text")));
}

class Generation : public ::testing::Test {
 protected:
  PromptBundle bundle() const {
    PromptBundle b;
    b.target_id = "p1";
    b.system_prompt = "persona";
    b.role_guidance = "guidance";
    b.user_prompt = "post";
    b.enabled_roles = {Role::Guide, Role::Amplifier};
    return b;
  }
  const Timestamp now = at("2025-11-30T00:00:00Z");
};

TEST_F(Generation, HappyPathIsPending) {
  auto client = StubClient::scripted({reply_block("Guide", "What would you try next?")});
  const auto c = generate_candidate(bundle(), client, "cand-1", now);
  EXPECT_EQ(c.role, Role::Guide);
  EXPECT_EQ(c.status, CandidateStatus::pending);
  EXPECT_EQ(c.text, "What would you try next?");
  EXPECT_EQ(c.raw_output, reply_block("Guide", "What would you try next?"));
  EXPECT_EQ(client.requests().size(), 1u);
  EXPECT_EQ(client.requests()[0].user_messages, (std::vector<std::string>{"guidance", "post"}));
}

TEST_F(Generation, RoleOutsideEnabledSetIsViolation) {
  auto mentor = StubClient::scripted({reply_block("Mentor", "x")});
  try {
    generate_candidate(bundle(), mentor, "cand-1", now);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::role_violation);
  }
  auto empathizer = StubClient::scripted({reply_block("Empathizer", "x")});
  EXPECT_THROW(generate_candidate(bundle(), empathizer, "cand-1", now), Error);
  EXPECT_EQ(empathizer.requests().size(), 1u);  // not retried, not remapped
}

TEST_F(Generation, ThreeUnparseableAnswersRaiseWithRawOutput) {
  auto client = StubClient::scripted({"free prose one", "free prose two", "free prose three"});
  try {
    generate_candidate(bundle(), client, "cand-1", now);
    FAIL();
  } catch (const UnparseableOutputError& e) {
    EXPECT_EQ(e.raw_output(), "free prose three");
  }
  const auto requests = client.requests();
  ASSERT_EQ(requests.size(), 3u);
  EXPECT_EQ(requests[1].user_messages.back(), PromptTemplates{}.format_reminder);
}

TEST_F(Generation, RecoversOnRetry) {
  auto client = StubClient::scripted({"oops", reply_block("Amplifier", "Great detail.")});
  const auto c = generate_candidate(bundle(), client, "cand-1", now);
  EXPECT_EQ(c.role, Role::Amplifier);
  EXPECT_EQ(client.requests().size(), 2u);
}

TEST_F(Generation, TransportErrorsPropagateAsRetryable) {
  StubClient client([](const GenerationRequest&, std::size_t) -> std::string {
    throw GenerationError("connection refused", true);
  });
  try {
    generate_candidate(bundle(), client, "cand-1", now);
    FAIL();
  } catch (const GenerationError& e) {
    EXPECT_TRUE(e.retryable());
  }
}

TEST_F(Generation, DeterministicStubIsBitStable) {
  DeterministicReplyClient a({Role::Guide, Role::Amplifier}), b({Role::Guide, Role::Amplifier});
  const auto x = generate_candidate(bundle(), a, "cand-1", now);
  const auto y = generate_candidate(bundle(), b, "cand-1", now);
  EXPECT_EQ(x, y);
  EXPECT_TRUE(x.role == Role::Guide || x.role == Role::Amplifier);
}
