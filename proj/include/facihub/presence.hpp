#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "facihub/agent_roles.hpp"
#include "facihub/error.hpp"
#include "facihub/forum_model.hpp"
#include "facihub/generation_client.hpp"
#include "facihub/review_workflow.hpp"
#include "facihub/targeting.hpp"

namespace facihub {

// ---------------------------------------------------------------------------
// Coding scheme vocabulary

enum class Indicator { AF1, AF2, OC1, OC2, NC1, NC2, PT1, PT2, EX1, EX2, IN1, IN2, RC1, RC2 };

inline constexpr std::size_t kIndicatorCount = 14;

inline constexpr std::array<Indicator, kIndicatorCount> kAllIndicators{
    Indicator::AF1, Indicator::AF2, Indicator::OC1, Indicator::OC2, Indicator::NC1, Indicator::NC2, Indicator::PT1,
    Indicator::PT2, Indicator::EX1, Indicator::EX2, Indicator::IN1, Indicator::IN2, Indicator::RC1, Indicator::RC2};

inline constexpr std::array<const char*, kIndicatorCount> kIndicatorCodes{
    "AF1", "AF2", "OC1", "OC2", "NC1", "NC2", "PT1", "PT2", "EX1", "EX2", "IN1", "IN2", "RC1", "RC2"};

inline const char* to_string(Indicator i) { return kIndicatorCodes[static_cast<std::size_t>(i)]; }

/// Accepts "OC2" and "OC-2" (any case).
inline std::optional<Indicator> parse_indicator(std::string_view s) {
  std::string norm;
  for (char c : s)
    if (c != '-') norm.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (std::size_t i = 0; i < kIndicatorCount; ++i)
    if (norm == kIndicatorCodes[i]) return kAllIndicators[i];
  return std::nullopt;
}

enum class Salience { primary, secondary };

inline const char* to_string(Salience s) { return s == Salience::primary ? "primary" : "secondary"; }

inline std::optional<Salience> parse_salience(std::string_view s) {
  if (s == "primary") return Salience::primary;
  if (s == "secondary") return Salience::secondary;
  return std::nullopt;
}

struct CodedUnit {
  std::string record_id;
  Indicator indicator = Indicator::AF1;
  Salience salience = Salience::primary;
  std::string coder_id;

  bool operator==(const CodedUnit&) const = default;
};

inline Json to_json(const CodedUnit& u) {
  return {{"record_id", u.record_id},
          {"indicator", to_string(u.indicator)},
          {"salience", to_string(u.salience)},
          {"coder_id", u.coder_id}};
}

/// Throws ValidationError on unknown indicator or salience.
inline CodedUnit coded_unit_from_json(const Json& j) {
  std::vector<FieldError> errors;
  CodedUnit u;
  if (!j.is_object()) throw ValidationError("coded unit must be an object");
  if (!j.contains("record_id") || !j["record_id"].is_string()) errors.push_back({"record_id", "required string"});
  else u.record_id = j["record_id"].get<std::string>();
  const auto ind = j.contains("indicator") && j["indicator"].is_string()
                       ? parse_indicator(j["indicator"].get<std::string>())
                       : std::nullopt;
  if (!ind) errors.push_back({"indicator", "unknown indicator code"});
  else u.indicator = *ind;
  const auto sal = j.contains("salience") && j["salience"].is_string() ? parse_salience(j["salience"].get<std::string>())
                                                                       : std::nullopt;
  if (!sal) errors.push_back({"salience", "must be primary or secondary"});
  else u.salience = *sal;
  if (j.contains("coder_id") && j["coder_id"].is_string()) u.coder_id = j["coder_id"].get<std::string>();
  if (!errors.empty()) throw ValidationError("invalid coded unit", std::move(errors));
  return u;
}

inline std::vector<CodedUnit> read_coded_units(std::istream& in) {
  std::vector<CodedUnit> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::validation, "line " + std::to_string(n) + ": invalid JSON");
    out.push_back(coded_unit_from_json(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring and aggregation

using IndicatorVector = std::array<double, kIndicatorCount>;

inline double salience_value(Salience s) { return s == Salience::primary ? 1.0 : 0.5; }

/// Per-indicator score for one record: 1.0 if any primary code, else 0.5 if
/// any secondary, else 0.
inline IndicatorVector score_record(std::span<const CodedUnit> units) {
  IndicatorVector v{};
  for (const auto& u : units) {
    if (u.record_id != units.front().record_id)
      fail(ErrorCode::argument, "score_record got units from records '" + units.front().record_id + "' and '" +
                                    u.record_id + "'");
    double& slot = v[static_cast<std::size_t>(u.indicator)];
    slot = std::max(slot, salience_value(u.salience));
  }
  return v;
}

enum class PresenceIndex { SP_AF, SP_OC, SP_NC, SP_total, CP_PT, CP_EX, CP_IN, CP_RC, CP_total };

inline constexpr std::size_t kPresenceIndexCount = 9;

inline constexpr std::array<PresenceIndex, kPresenceIndexCount> kAllPresenceIndices{
    PresenceIndex::SP_AF, PresenceIndex::SP_OC, PresenceIndex::SP_NC, PresenceIndex::SP_total, PresenceIndex::CP_PT,
    PresenceIndex::CP_EX, PresenceIndex::CP_IN, PresenceIndex::CP_RC, PresenceIndex::CP_total};

inline const char* to_string(PresenceIndex p) {
  static constexpr std::array<const char*, kPresenceIndexCount> names{
      "SP_AF", "SP_OC", "SP_NC", "SP_total", "CP_PT", "CP_EX", "CP_IN", "CP_RC", "CP_total"};
  return names[static_cast<std::size_t>(p)];
}

inline std::optional<PresenceIndex> parse_presence_index(std::string_view s) {
  for (PresenceIndex p : kAllPresenceIndices)
    if (s == to_string(p)) return p;
  return std::nullopt;
}

/// The nine presence indices in report order.
struct PresenceIndexVector {
  std::array<double, kPresenceIndexCount> values{};

  double& operator[](PresenceIndex p) { return values[static_cast<std::size_t>(p)]; }
  double operator[](PresenceIndex p) const { return values[static_cast<std::size_t>(p)]; }

  bool operator==(const PresenceIndexVector&) const = default;
};

namespace detail {

inline void fill_totals(PresenceIndexVector& out) {
  out[PresenceIndex::SP_total] = out[PresenceIndex::SP_AF] + out[PresenceIndex::SP_OC] + out[PresenceIndex::SP_NC];
  out[PresenceIndex::CP_total] = out[PresenceIndex::CP_PT] + out[PresenceIndex::CP_EX] + out[PresenceIndex::CP_IN] +
                                 out[PresenceIndex::CP_RC];
}

inline constexpr std::array<PresenceIndex, 7> kCategoryIndices{PresenceIndex::SP_AF, PresenceIndex::SP_OC,
                                                               PresenceIndex::SP_NC, PresenceIndex::CP_PT,
                                                               PresenceIndex::CP_EX, PresenceIndex::CP_IN,
                                                               PresenceIndex::CP_RC};

}  // namespace detail

inline PresenceIndexVector aggregate_indices(const IndicatorVector& v) {
  auto pair_sum = [&v](Indicator first) {
    const auto i = static_cast<std::size_t>(first);
    return v[i] + v[i + 1];
  };
  PresenceIndexVector out;
  out[PresenceIndex::SP_AF] = pair_sum(Indicator::AF1);
  out[PresenceIndex::SP_OC] = pair_sum(Indicator::OC1);
  out[PresenceIndex::SP_NC] = pair_sum(Indicator::NC1);
  out[PresenceIndex::CP_PT] = pair_sum(Indicator::PT1);
  out[PresenceIndex::CP_EX] = pair_sum(Indicator::EX1);
  out[PresenceIndex::CP_IN] = pair_sum(Indicator::IN1);
  out[PresenceIndex::CP_RC] = pair_sum(Indicator::RC1);
  detail::fill_totals(out);
  return out;
}

struct LearnerScore {
  std::string learner_id;
  Condition condition = Condition::with_pca;
  PresenceIndexVector scores;
};

using LearnerKey = std::pair<std::string, Condition>;

/// Mean of each category index per (learner, condition). Totals are re-summed
/// from the category means so the index identities hold exactly.
inline std::map<LearnerKey, PresenceIndexVector> learner_level_means(std::span<const LearnerScore> rows) {
  std::map<LearnerKey, std::pair<PresenceIndexVector, std::size_t>> acc;
  for (const auto& row : rows) {
    auto& [sum, n] = acc[{row.learner_id, row.condition}];
    for (PresenceIndex p : detail::kCategoryIndices) sum[p] += row.scores[p];
    ++n;
  }
  std::map<LearnerKey, PresenceIndexVector> out;
  for (const auto& [key, value] : acc) {
    PresenceIndexVector mean;
    for (PresenceIndex p : detail::kCategoryIndices) mean[p] = value.first[p] / static_cast<double>(value.second);
    detail::fill_totals(mean);
    out.emplace(key, mean);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interaction modes

enum class InteractionModeKind { direct, co_presence };

inline const char* to_string(InteractionModeKind m) {
  return m == InteractionModeKind::direct ? "direct" : "co_presence";
}

struct InteractionMode {
  std::string learner_id;
  InteractionModeKind mode = InteractionModeKind::co_presence;
  std::vector<std::string> evidence;  // record ids
};

/// Author of the artifact a record responds to: post author for a comment,
/// parent author for a reply. Likes have no addressee.
inline std::optional<std::string> addressee_of(const StoreSnapshot& store, const ActionRecord& r) {
  switch (r.action_type) {
    case ActionType::commented: return r.post_author_id;
    case ActionType::replied: return store.parent_author_of_reply(r);
    default: return std::nullopt;
  }
}

/// Learners active in threads that carry at least one published agent reply.
/// direct: the agent replied to them or they replied to the agent;
/// co_presence: otherwise. Learners outside those threads are not listed.
inline std::vector<InteractionMode> classify_interaction_modes(const StoreSnapshot& store,
                                                               std::span<const PublicationEvent> publications,
                                                               const std::string& pca_user_id) {
  std::set<std::string> involved;
  for (const auto& e : publications)
    if (const ActionRecord* r = store.find_record(e.record_id)) involved.insert(r->post_id);

  std::map<std::string, std::vector<std::string>> activity;
  std::map<std::string, std::vector<std::string>> ties;
  for (const auto& r : store.records()) {
    if (!involved.count(r.post_id)) continue;
    const auto addressee = addressee_of(store, r);
    if (r.actor_id == pca_user_id) {
      if (addressee && *addressee != pca_user_id) ties[*addressee].push_back(r.record_id);
      continue;
    }
    activity[r.actor_id].push_back(r.record_id);
    if (addressee == pca_user_id && r.action_type == ActionType::replied) ties[r.actor_id].push_back(r.record_id);
  }
  // Authors addressed by the agent count as participants even if their own
  // records fall outside the snapshot.
  for (const auto& [learner, evidence] : ties) activity[learner];

  std::vector<InteractionMode> out;
  for (auto& [learner, records] : activity) {
    auto tie = ties.find(learner);
    if (tie != ties.end() && !tie->second.empty()) {
      out.push_back({learner, InteractionModeKind::direct, tie->second});
    } else {
      out.push_back({learner, InteractionModeKind::co_presence, records});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inter-coder agreement

/// Per-record indicator sets for one coder.
using CodingAssignments = std::map<std::string, std::set<Indicator>>;

inline CodingAssignments assignments_from_units(std::span<const CodedUnit> units,
                                                std::span<const std::string> record_ids = {}) {
  CodingAssignments out;
  for (const auto& id : record_ids) out[id];
  for (const auto& u : units) out[u.record_id].insert(u.indicator);
  return out;
}

struct KappaResult {
  std::optional<double> kappa;  // empty when degenerate
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  std::size_t n = 0;
  bool degenerate = false;
};

namespace detail {

inline KappaResult kappa_from_counts(std::size_t both, std::size_t neither, std::size_t a_only, std::size_t b_only) {
  KappaResult r;
  r.n = both + neither + a_only + b_only;
  if (r.n == 0) fail(ErrorCode::argument, "kappa needs at least one record");
  const double n = static_cast<double>(r.n);
  const double pa = static_cast<double>(both + a_only) / n;
  const double pb = static_cast<double>(both + b_only) / n;
  r.observed_agreement = static_cast<double>(both + neither) / n;
  r.expected_agreement = pa * pb + (1.0 - pa) * (1.0 - pb);
  if (r.expected_agreement >= 1.0) {
    r.degenerate = true;
    return r;
  }
  r.kappa = (r.observed_agreement - r.expected_agreement) / (1.0 - r.expected_agreement);
  return r;
}

inline void require_same_records(const CodingAssignments& a, const CodingAssignments& b) {
  if (a.size() != b.size() ||
      !std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) { return x.first == y.first; }))
    fail(ErrorCode::argument, "coders must cover the same record set");
}

}  // namespace detail

/// Cohen's kappa on binary presence of `indicator` per record.
inline KappaResult cohens_kappa(const CodingAssignments& a, const CodingAssignments& b, Indicator indicator) {
  detail::require_same_records(a, b);
  std::size_t both = 0, neither = 0, a_only = 0, b_only = 0;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    const bool x = ia->second.count(indicator) > 0;
    const bool y = ib->second.count(indicator) > 0;
    if (x && y) ++both;
    else if (!x && !y) ++neither;
    else if (x) ++a_only;
    else ++b_only;
  }
  return detail::kappa_from_counts(both, neither, a_only, b_only);
}

/// Kappa over every (record, indicator) cell.
inline KappaResult pooled_kappa(const CodingAssignments& a, const CodingAssignments& b) {
  detail::require_same_records(a, b);
  std::size_t both = 0, neither = 0, a_only = 0, b_only = 0;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    for (Indicator ind : kAllIndicators) {
      const bool x = ia->second.count(ind) > 0;
      const bool y = ib->second.count(ind) > 0;
      if (x && y) ++both;
      else if (!x && !y) ++neither;
      else if (x) ++a_only;
      else ++b_only;
    }
  }
  return detail::kappa_from_counts(both, neither, a_only, b_only);
}

// ---------------------------------------------------------------------------
// Model-assisted coding

struct SchemeEntry {
  Indicator indicator = Indicator::AF1;
  std::string category;
  std::string name;
  std::string description;
};

struct CodingScheme {
  std::vector<SchemeEntry> entries;

  static CodingScheme defaults() {
    return {{
        {Indicator::AF1, "Affective Expression", "Emotional Expression",
         "Explicit expression of personal emotions, attitudes, humor, or use of emoticons"},
        {Indicator::AF2, "Affective Expression", "Digital Identity Construction",
         "Sharing personal experiences, professional roles, or background information"},
        {Indicator::OC1, "Open Communication", "Continuing a Thread",
         "Explicitly building on prior discussion; asking questions to promote interaction; informally or "
         "formally referencing others' viewpoints"},
        {Indicator::OC2, "Open Communication", "Agreement and Support",
         "Expressing appreciation, acknowledgment, or explicit agreement with others' contributions"},
        {Indicator::NC1, "Networked Cohesion", "Group Climate",
         "Direct address or naming others; use of inclusive pronouns; greetings or friendly tone"},
        {Indicator::NC2, "Networked Cohesion", "Community Building",
         "Use of shared or community-specific terminology and references"},
        {Indicator::PT1, "Problem Triggering", "Identifying a Problem",
         "Explicitly raising or defining an issue or challenge"},
        {Indicator::PT2, "Problem Triggering", "Expressing Puzzlement",
         "Expressing confusion or uncertainty about the topic"},
        {Indicator::EX1, "Exploration", "Negotiating Differences",
         "Expressing differing viewpoints; sharing research or information to advance discussion"},
        {Indicator::EX2, "Exploration", "Suggesting Ideas",
         "Proposing possible approaches, solutions, or multiple possibilities"},
        {Indicator::IN1, "Integration", "Identifying Patterns",
         "Synthesizing group consensus; integrating multiple viewpoints within a single contribution"},
        {Indicator::IN2, "Integration", "Knowledge Construction",
         "Connecting and synthesizing concepts; developing a coherent solution or framework"},
        {Indicator::RC1, "Resolution and Creation", "Applying Solutions",
         "Applying new understanding or solutions in practice"},
        {Indicator::RC2, "Resolution and Creation", "Artifact Creation",
         "Producing original outputs, frameworks, or shareable professional knowledge"},
    }};
  }

  /// Reads a JSON array of {indicator, category, name, description}.
  static CodingScheme load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot read coding scheme '" + path + "'");
    const Json j = Json::parse(in);
    CodingScheme scheme;
    for (const auto& e : j) {
      const auto ind = parse_indicator(e.at("indicator").get<std::string>());
      if (!ind) fail(ErrorCode::validation, "coding scheme has unknown indicator " + e.at("indicator").dump());
      scheme.entries.push_back({*ind, e.at("category").get<std::string>(), e.at("name").get<std::string>(),
                                e.at("description").get<std::string>()});
    }
    return scheme;
  }

  std::string render() const {
    std::string out;
    for (const auto& e : entries) {
      out += std::string(to_string(e.indicator)) + " (" + e.category + " / " + e.name + "): " + e.description + "\n";
    }
    return out;
  }
};

struct CoderParams {
  std::string model_name = "gpt-5.2";
  double temperature = 0.7;
  std::string coder_id = "llm";
};

struct CodingRejection {
  std::string record_id;
  std::string reason;
  std::string raw_output;
};

struct CodingResult {
  std::vector<CodedUnit> units;
  std::vector<CodingRejection> rejections;
};

inline std::string coding_system_prompt(const CodingScheme& scheme) {
  return "You code forum contributions for social and cognitive presence. A contribution may receive several "
         "codes. For each code, say whether it is primary (the main focus of the contribution) or secondary.\n\n"
         "Indicators:\n" +
         scheme.render() +
         "\nAnswer with one line per code in the form `<CODE> <primary|secondary>`, for example `OC2 primary`. "
         "Answer `NONE` if no indicator applies. Output nothing else.";
}

struct ParsedCodeLine {
  std::string code;
  Salience salience = Salience::primary;
};

/// nullopt when the output does not follow the line format at all. Unknown
/// indicator codes are returned as-is for the caller to reject.
inline std::optional<std::vector<ParsedCodeLine>> parse_coding_output(std::string_view raw) {
  std::vector<ParsedCodeLine> out;
  std::istringstream in{std::string(raw)};
  std::string line;
  bool saw_none = false, saw_any = false;
  while (std::getline(in, line)) {
    std::istringstream tokens(line);
    std::string code, salience, extra;
    if (!(tokens >> code)) continue;
    saw_any = true;
    while (!code.empty() && (code.front() == '`' || code.front() == '-' || code.front() == '*')) code.erase(0, 1);
    if (code == "NONE" || code == "NONE`") {
      saw_none = true;
      continue;
    }
    if (!(tokens >> salience) || (tokens >> extra)) return std::nullopt;
    while (!salience.empty() && (salience.back() == '`' || salience.back() == '.')) salience.pop_back();
    const auto s = parse_salience(salience);
    if (!s) return std::nullopt;
    out.push_back({code, *s});
  }
  if (!saw_any || (saw_none && !out.empty())) return std::nullopt;
  return out;
}

/// Codes one record's text. Format failures are retried like candidate
/// generation; a well-formed answer containing an unknown code is returned as
/// a rejection.
inline std::variant<std::vector<CodedUnit>, CodingRejection> code_record(const ActionRecord& record,
                                                                         GenerationClient& client,
                                                                         const CodingScheme& scheme,
                                                                         const CoderParams& params) {
  const std::string text = record.text.value_or("");
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return std::vector<CodedUnit>{};
  GenerationRequest request{coding_system_prompt(scheme), {text}, params.model_name, params.temperature};
  std::string raw;
  for (int attempt = 1; attempt <= kMaxGenerationAttempts; ++attempt) {
    raw = client.complete(request);
    const auto parsed = parse_coding_output(raw);
    if (!parsed) {
      if (attempt == 1)
        request.user_messages.push_back("Your previous answer did not follow the `<CODE> <primary|secondary>` "
                                        "line format. Answer again.");
      continue;
    }
    std::vector<CodedUnit> units;
    for (const auto& line : *parsed) {
      const auto ind = parse_indicator(line.code);
      if (!ind) return CodingRejection{record.record_id, "unknown indicator code '" + line.code + "'", raw};
      units.push_back({record.record_id, *ind, line.salience, params.coder_id});
    }
    return units;
  }
  throw UnparseableOutputError("coding output for '" + record.record_id + "' unparseable after " +
                                   std::to_string(kMaxGenerationAttempts) + " attempts",
                               raw);
}

/// Codes every text-bearing record; records without text are skipped.
inline CodingResult llm_code_records(std::span<const ActionRecord> records, GenerationClient& client,
                                     const CodingScheme& scheme = CodingScheme::defaults(),
                                     const CoderParams& params = {}) {
  CodingResult result;
  for (const auto& r : records) {
    if (!has_text(r.action_type)) continue;
    auto outcome = code_record(r, client, scheme, params);
    if (auto* units = std::get_if<std::vector<CodedUnit>>(&outcome)) {
      result.units.insert(result.units.end(), units->begin(), units->end());
    } else {
      result.rejections.push_back(std::get<CodingRejection>(outcome));
    }
  }
  return result;
}

/// Deterministic coder for tests and dry runs: derives zero to three codes
/// from a hash of the text.
class DeterministicCoderClient : public GenerationClient {
 public:
  std::string complete(const GenerationRequest& request) override {
    const std::string& text = request.user_messages.empty() ? request.system_prompt : request.user_messages.front();
    std::uint64_t h = fnv1a(text);
    const int count = static_cast<int>(h % 4);
    if (count == 0) return "NONE";
    std::string out;
    std::set<std::size_t> used;
    for (int i = 0; i < count; ++i) {
      h = fnv1a(std::to_string(h), h);
      const std::size_t idx = h % kIndicatorCount;
      if (!used.insert(idx).second) continue;
      out += std::string(kIndicatorCodes[idx]) + ((h >> 20) % 3 == 0 ? " secondary\n" : " primary\n");
    }
    return out;
  }

  std::string kind() const override { return "deterministic-coder"; }
};

}  // namespace facihub
