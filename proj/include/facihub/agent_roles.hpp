#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "facihub/error.hpp"
#include "facihub/forum_model.hpp"
#include "facihub/generation_client.hpp"
#include "facihub/targeting.hpp"
#include "facihub/time.hpp"

namespace facihub {

enum class Role { Guide, Amplifier, Empathizer, Critical_Inquirer };

inline constexpr std::array<Role, 4> kAllRoles{Role::Guide, Role::Amplifier, Role::Empathizer,
                                               Role::Critical_Inquirer};

inline const char* to_string(Role r) {
  switch (r) {
    case Role::Guide: return "Guide";
    case Role::Amplifier: return "Amplifier";
    case Role::Empathizer: return "Empathizer";
    case Role::Critical_Inquirer: return "Critical_Inquirer";
  }
  return "?";
}

/// Case-insensitive; spaces, hyphens and underscores are interchangeable.
inline std::optional<Role> parse_role(std::string_view label) {
  std::string norm;
  for (char c : label) {
    if (c == ' ' || c == '-' || c == '_') {
      if (!norm.empty() && norm.back() != '_') norm.push_back('_');
    } else {
      norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  while (!norm.empty() && norm.back() == '_') norm.pop_back();
  if (norm == "guide") return Role::Guide;
  if (norm == "amplifier") return Role::Amplifier;
  if (norm == "empathizer") return Role::Empathizer;
  if (norm == "critical_inquirer") return Role::Critical_Inquirer;
  return std::nullopt;
}

struct RoleSpec {
  Role role = Role::Guide;
  std::string trigger_characteristics;
  std::string response_objectives;
  std::string language_style;
};

struct RoleFramework {
  std::vector<RoleSpec> roles;
  std::set<Role> enabled;

  bool is_enabled(Role r) const { return enabled.count(r) > 0; }

  void validate() const {
    for (Role r : enabled) {
      const bool declared =
          std::any_of(roles.begin(), roles.end(), [r](const RoleSpec& s) { return s.role == r; });
      if (!declared) fail(ErrorCode::config, std::string("enabled role ") + to_string(r) + " is not declared");
    }
    if (enabled.empty()) fail(ErrorCode::config, "role framework enables no roles");
  }

  /// All four roles.
  static RoleFramework full() {
    RoleFramework fw;
    fw.roles = {
        {Role::Guide, "Content is short or generic; lacks deep reflection; questions are broad",
         "Ask open-ended follow-up questions; invite peers to share similar or different experiences; "
         "connect to course themes",
         "Curious, encouraging, discussion-driven"},
        {Role::Amplifier,
         "Contains specific teaching scenarios, steps, or results; includes practice reflections",
         "Highlight strengths; conceptualize the value of the experience; encourage others to inquire "
         "further and learn from it",
         "Affirming, appreciative, motivating expansion"},
        {Role::Empathizer, "Shows worry, anxiety, self-doubt, stress, or negative emotions",
         "Validate feelings; emphasize emotional normalcy; reduce psychological burden; encourage "
         "continued expression",
         "Warm, understanding, supportive, resonant"},
        {Role::Critical_Inquirer,
         "Expresses extremes (overly optimistic or negative); single-sided view lacking conditions; AI "
         "myths or fears",
         "Gently challenge through questions; introduce ethical and boundary considerations",
         "Respectful, rational, reflective"},
    };
    fw.enabled = {kAllRoles.begin(), kAllRoles.end()};
    return fw;
  }

  /// Refined profile: Guide and Amplifier only.
  static RoleFramework refined() {
    RoleFramework fw = full();
    fw.enabled = {Role::Guide, Role::Amplifier};
    return fw;
  }
};

/// Editable prompt text. Every field can be overridden from a fixture
/// directory (see load_prompt_templates).
struct PromptTemplates {
  std::string persona =
      "You are Li Rui (call me Rui). A college English teacher teaching College English II. AI practice "
      "level: Explorer, using AI to grade essays but still figuring out how to use it more effectively.\n\n"
      "You are participating in a cMOOC titled Front-line Teachers Explore AI Teaching 2.0. Course "
      "overview: Week 1 [Attitudes & Ethics] establishing correct understanding and attitudes toward AI, "
      "discussing ethical boundaries; Week 2 [Knowledge & Tools] understanding AI tools' basic "
      "principles, characteristics, and applicable roles; Weeks 3-4 [AI Pedagogy] in-depth analysis and "
      "collaborative design of innovative AI-teaching integration models; Week 5 [Professional "
      "Development] exploring how AI can support teachers' personal professional growth and "
      "breakthroughs.\n\n"
      "You joined this course with a puzzle: Students treat AI as an answer ATM machine, copying and "
      "pasting without thinking. How should I design tasks so they must think with AI rather than let AI "
      "think for them?\n\n"
      "You hope to take away an AI collaborative writing task template: from topic selection, research, "
      "structure building, to language polishing, each step requires students to leave traces of "
      "human-machine dialogue, improving both writing and visible thinking processes.\n\n"
      "Output should minimize emoji use. Avoid dashes and quotation marks.";
  std::string role_guidance =
      "Based on the characteristics of the target comment content, select the most suitable role from "
      "the following framework, output the reply_role, and generate a response.\n"
      "Role selection framework for PCA response generation:\n{framework}";
  std::string post_template =
      "Please generate a natural interactive reply based on the following post:\n"
      "Title: {title}\n"
      "Content: {content}";
  std::string comment_template =
      "Please generate a natural reply to the target comment based on the following context:\n"
      "Parent post title: {title}\n"
      "Parent post content: {content}\n"
      "Target comment: {comment}\n"
      "Upstream comment thread: {thread}";
  std::string output_format =
      "Answer with exactly one block in this format and nothing else:\n"
      "<reply>\n"
      "reply_role: <one of: {roles}>\n"
      "reply_text: <your reply>\n"
      "</reply>";
  std::string format_reminder =
      "Your previous answer could not be parsed. Reply again using exactly the <reply> block with the "
      "reply_role and reply_text fields.";
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

/// Overrides defaults with any of persona.txt, role_guidance.txt,
/// post_template.txt, comment_template.txt, output_format.txt,
/// format_reminder.txt found in `dir`.
inline PromptTemplates load_prompt_templates(const std::string& dir) {
  PromptTemplates t;
  auto maybe = [&dir](const char* name, std::string& field) {
    const std::string path = dir + "/" + name;
    if (std::ifstream(path)) field = read_text_file(path);
  };
  maybe("persona.txt", t.persona);
  maybe("role_guidance.txt", t.role_guidance);
  maybe("post_template.txt", t.post_template);
  maybe("comment_template.txt", t.comment_template);
  maybe("output_format.txt", t.output_format);
  maybe("format_reminder.txt", t.format_reminder);
  return t;
}

inline std::string replace_all(std::string s, std::string_view key, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = s.find(key, pos)) != std::string::npos) {
    s.replace(pos, key.size(), value);
    pos += value.size();
  }
  return s;
}

struct GenerationParams {
  std::string model_name = "kimi-k2-turbo-preview";
  double temperature = 0.6;
};

struct PromptBundle {
  std::string target_id;
  TargetKind target_kind = TargetKind::post;
  std::string system_prompt;
  std::string role_guidance;
  std::string user_prompt;
  GenerationParams generation_params;
  std::vector<Role> enabled_roles;
  std::string format_reminder = PromptTemplates{}.format_reminder;

  GenerationRequest request() const {
    return {system_prompt, {role_guidance, user_prompt}, generation_params.model_name,
            generation_params.temperature};
  }
};

/// Renders the enabled rows of the framework as a pipe table.
inline std::string render_framework(const RoleFramework& fw) {
  std::string out = "Role | Characteristics of the Target Comment | Response Objectives | Language Style";
  for (const auto& spec : fw.roles) {
    if (!fw.is_enabled(spec.role)) continue;
    out += "\n";
    out += std::string(to_string(spec.role)) + " | " + spec.trigger_characteristics + " | " +
           spec.response_objectives + " | " + spec.language_style;
  }
  return out;
}

namespace detail {

/// Drops template lines that mention a placeholder whose value is empty.
inline std::string drop_lines_with(const std::string& tmpl, std::string_view key) {
  std::istringstream in(tmpl);
  std::string line, out;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find(key) != std::string::npos) continue;
    if (!first) out += '\n';
    out += line;
    first = false;
  }
  return out;
}

inline std::string format_thread(const std::vector<ThreadItem>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += "\n";
    out += "[" + item.author_id + "] " + item.text;
  }
  return out;
}

}  // namespace detail

inline PromptBundle assemble_prompt(const InterventionTarget& target, const ThreadContext& ctx,
                                    const RoleFramework& fw, const PromptTemplates& templates = {},
                                    const GenerationParams& params = {}) {
  fw.validate();
  if (target.target_id != ctx.target_id())
    fail(ErrorCode::argument,
         "thread context resolves '" + ctx.target_id() + "', not target '" + target.target_id + "'");
  if (target.root_post_id != ctx.post.post_id)
    fail(ErrorCode::argument, "target root '" + target.root_post_id + "' does not match thread post '" +
                                  ctx.post.post_id + "'");
  if ((ctx.target_kind == TargetKind::post) != ctx.comment_chain.empty())
    fail(ErrorCode::argument, "thread context kind does not match its comment chain");

  PromptBundle b;
  b.target_id = target.target_id;
  b.target_kind = ctx.target_kind;
  b.generation_params = params;
  b.format_reminder = templates.format_reminder;
  for (const auto& spec : fw.roles)
    if (fw.is_enabled(spec.role)) b.enabled_roles.push_back(spec.role);

  std::string role_names;
  for (Role r : b.enabled_roles) role_names += (role_names.empty() ? "" : ", ") + std::string(to_string(r));

  b.system_prompt = templates.persona;
  b.role_guidance = replace_all(templates.role_guidance, "{framework}", render_framework(fw)) + "\n\n" +
                    replace_all(templates.output_format, "{roles}", role_names);

  if (ctx.target_kind == TargetKind::post) {
    std::string s = replace_all(templates.post_template, "{title}", ctx.post.title);
    b.user_prompt = replace_all(std::move(s), "{content}", ctx.post.content);
  } else {
    std::vector<ThreadItem> upstream(ctx.comment_chain.begin(), ctx.comment_chain.end() - 1);
    std::string s = upstream.empty() ? detail::drop_lines_with(templates.comment_template, "{thread}")
                                     : replace_all(templates.comment_template, "{thread}",
                                                   detail::format_thread(upstream));
    s = replace_all(std::move(s), "{title}", ctx.post.title);
    s = replace_all(std::move(s), "{content}", ctx.post.content);
    b.user_prompt = replace_all(std::move(s), "{comment}", ctx.comment_chain.back().text);
  }
  return b;
}

enum class CandidateStatus { pending, accepted, rejected };

inline const char* to_string(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::pending: return "pending";
    case CandidateStatus::accepted: return "accepted";
    case CandidateStatus::rejected: return "rejected";
  }
  return "?";
}

struct CandidateResponse {
  std::string candidate_id;
  std::string target_id;
  Role role = Role::Guide;
  std::string text;
  Timestamp generated_at{};
  std::string raw_output;
  CandidateStatus status = CandidateStatus::pending;

  bool operator==(const CandidateResponse&) const = default;
};

inline Json to_json(const CandidateResponse& c) {
  return {{"candidate_id", c.candidate_id}, {"target_id", c.target_id},
          {"role", to_string(c.role)},      {"text", c.text},
          {"generated_at", format_timestamp(c.generated_at)},
          {"raw_output", c.raw_output},     {"status", to_string(c.status)}};
}

inline CandidateResponse candidate_from_json(const Json& j) {
  CandidateResponse c;
  c.candidate_id = j.at("candidate_id").get<std::string>();
  c.target_id = j.at("target_id").get<std::string>();
  c.role = parse_role(j.at("role").get<std::string>()).value();
  c.text = j.at("text").get<std::string>();
  c.generated_at = require_timestamp(j.at("generated_at").get<std::string>());
  c.raw_output = j.at("raw_output").get<std::string>();
  return c;
}

struct ParsedReply {
  std::string role_label;
  std::string text;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

}  // namespace detail

/// Extracts reply_role / reply_text from the first <reply>...</reply> block.
/// Returns nullopt when the block or either field is missing or empty.
inline std::optional<ParsedReply> parse_structured_output(std::string_view raw) {
  const auto open = raw.find("<reply>");
  if (open == std::string_view::npos) return std::nullopt;
  const auto body_start = open + 7;
  const auto close = raw.find("</reply>", body_start);
  if (close == std::string_view::npos) return std::nullopt;
  const std::string_view body = raw.substr(body_start, close - body_start);

  const auto role_pos = body.find("reply_role:");
  const auto text_pos = body.find("reply_text:");
  if (role_pos == std::string_view::npos || text_pos == std::string_view::npos || role_pos > text_pos)
    return std::nullopt;
  std::string_view role_line = body.substr(role_pos + 11);
  role_line = role_line.substr(0, std::min(role_line.find('\n'), text_pos - role_pos - 11));
  ParsedReply out{detail::trim(role_line), detail::trim(body.substr(text_pos + 11))};
  if (out.role_label.empty() || out.text.empty()) return std::nullopt;
  return out;
}

inline constexpr int kMaxGenerationAttempts = 3;

/// Calls the client, parses the structured block and checks the role against
/// the bundle's enabled set. Parse failures are retried (with a format
/// reminder appended) up to kMaxGenerationAttempts in total.
inline CandidateResponse generate_candidate(const PromptBundle& bundle, GenerationClient& client,
                                            std::string candidate_id, Timestamp generated_at) {
  GenerationRequest request = bundle.request();
  std::string raw;
  for (int attempt = 1; attempt <= kMaxGenerationAttempts; ++attempt) {
    raw = client.complete(request);
    const auto parsed = parse_structured_output(raw);
    if (!parsed) {
      if (attempt == 1) request.user_messages.push_back(bundle.format_reminder);
      continue;
    }
    const auto role = parse_role(parsed->role_label);
    if (!role || std::find(bundle.enabled_roles.begin(), bundle.enabled_roles.end(), *role) ==
                     bundle.enabled_roles.end())
      fail(ErrorCode::role_violation, "model chose role '" + parsed->role_label + "', which is not enabled");
    return {std::move(candidate_id), bundle.target_id, *role, parsed->text, generated_at, raw,
            CandidateStatus::pending};
  }
  throw UnparseableOutputError("no parseable reply after " + std::to_string(kMaxGenerationAttempts) +
                                   " attempts",
                               raw);
}

/// Deterministic client for tests and dry runs: picks an enabled role from a
/// hash of the prompt and echoes a short reply in the structured format.
class DeterministicReplyClient : public GenerationClient {
 public:
  explicit DeterministicReplyClient(std::vector<Role> roles) : roles_(std::move(roles)) {
    if (roles_.empty()) fail(ErrorCode::argument, "stub needs at least one role");
  }

  std::string complete(const GenerationRequest& request) override {
    std::string joined = request.system_prompt;
    for (const auto& m : request.user_messages) joined += "\n" + m;
    const std::uint64_t h = fnv1a(joined);
    const Role role = roles_[h % roles_.size()];
    const std::string& last = request.user_messages.empty() ? joined : request.user_messages.back();
    std::string excerpt = last.substr(0, std::min<std::size_t>(40, last.size()));
    std::replace(excerpt.begin(), excerpt.end(), '\n', ' ');
    char tag[17];
    std::snprintf(tag, sizeof tag, "%016llx", static_cast<unsigned long long>(h));
    return std::string("<reply>\nreply_role: ") + to_string(role) +
           "\nreply_text: Thanks for sharing this. What would you try next? (" + excerpt + " #" + tag +
           ")\n</reply>";
  }

  std::string kind() const override { return "deterministic-stub"; }

 private:
  std::vector<Role> roles_;
};

}  // namespace facihub
