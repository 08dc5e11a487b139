#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "facihub/agent_roles.hpp"
#include "facihub/config.hpp"
#include "facihub/error.hpp"
#include "facihub/forum_model.hpp"
#include "facihub/generation_client.hpp"
#include "facihub/hypergraph.hpp"
#include "facihub/presence.hpp"
#include "facihub/review_workflow.hpp"
#include "facihub/stats/balance.hpp"
#include "facihub/stats/goal_analysis.hpp"
#include "facihub/stats/permutation.hpp"
#include "facihub/targeting.hpp"

namespace facihub {

inline constexpr const char* kEngineVersion = "0.3.0";

struct GenerationFailure {
  std::string target_id;
  std::string code;
  std::string message;
  std::string raw_output;
};

struct RunResult {
  RunManifest manifest;
  std::vector<CandidateResponse> candidates;
  std::vector<GenerationFailure> failures;
  std::vector<std::string> skipped_existing;  // targets that already had a candidate
};

inline Json to_json(const RunResult& r) {
  Json j = to_json(r.manifest);
  Json candidates = Json::array();
  for (const auto& c : r.candidates)
    candidates.push_back({{"candidate_id", c.candidate_id}, {"target_id", c.target_id}, {"role", to_string(c.role)}});
  Json failures = Json::array();
  for (const auto& f : r.failures)
    failures.push_back({{"target_id", f.target_id}, {"code", f.code}, {"message", f.message}, {"raw_output", f.raw_output}});
  j["generation"] = {{"candidates", candidates}, {"failures", failures}, {"skipped_existing", r.skipped_existing}};
  return j;
}

struct CodingRunSummary {
  std::size_t coded = 0;
  std::size_t units = 0;
  std::size_t already_coded = 0;
  std::vector<CodingRejection> rejections;
};

inline Json to_json(const CodingRunSummary& s) {
  Json rej = Json::array();
  for (const auto& r : s.rejections) rej.push_back({{"record_id", r.record_id}, {"reason", r.reason}});
  return {{"coded_records", s.coded}, {"units", s.units}, {"already_coded", s.already_coded}, {"rejections", rej}};
}

/// Per-record coding outcome as kept in coding.ndjson.
struct RecordCoding {
  std::string record_id;
  std::vector<CodedUnit> units;
};

struct RecordScore {
  std::string record_id;
  std::string iso_week;
  LearnerScore score;
};

/// The whole engine state lives in one data directory:
///   records.ndjson       forum action log
///   assignments.ndjson   focal post conditions
///   runs.ndjson          run manifests
///   candidates/reviews/publications.ndjson   review board
///   coding.ndjson        per-record presence codes
/// Every file is append-only and replayed on start.
class Engine {
 public:
  Engine(EngineConfig config, std::shared_ptr<GenerationClient> generator, std::shared_ptr<GenerationClient> coder)
      : config_(std::move(config)), generator_(std::move(generator)), coder_(std::move(coder)) {
    config_.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(config_.data_dir, ec);
    if (ec || !fs::is_directory(config_.data_dir))
      fail(ErrorCode::io, "cannot create data directory '" + config_.data_dir + "'");
    {
      std::ofstream probe(path("records.ndjson"), std::ios::app);
      if (!probe) fail(ErrorCode::io, "data directory '" + config_.data_dir + "' is not writable");
    }
    store_ = std::make_unique<ForumStore>(path("records.ndjson"));
    registry_ = std::make_unique<ConditionRegistry>(path("assignments.ndjson"));
    board_ = std::make_unique<ReviewBoard>(config_.data_dir);
    framework_ = config_.framework == "full" ? RoleFramework::full() : RoleFramework::refined();
    templates_ = config_.prompts_dir.empty() ? PromptTemplates{} : load_prompt_templates(config_.prompts_dir);
    scheme_ = config_.coding_scheme.empty() ? CodingScheme::defaults() : CodingScheme::load(config_.coding_scheme);
    read_lines(path("runs.ndjson"), [this](const Json& j) { runs_.push_back(j); });
    read_lines(path("coding.ndjson"), [this](const Json& j) { remember_coding(j); });
  }

  const EngineConfig& config() const { return config_; }
  std::shared_ptr<const StoreSnapshot> snapshot() const { return store_->snapshot(); }
  ForumStore& store() { return *store_; }
  ReviewBoard& board() { return *board_; }
  const RoleFramework& framework() const { return framework_; }

  IngestReport ingest(std::istream& in) { return store_->ingest(in); }
  IngestReport ingest_file(const std::string& file) { return store_->ingest_file(file); }

  /// Targeting, then one candidate per new target, enqueued in target order.
  /// `generated_at` defaults to `as_of` so repeated runs are reproducible.
  RunResult run(Timestamp as_of, std::optional<Timestamp> generated_at = std::nullopt) {
    std::lock_guard job(job_mutex_);
    const auto snap = store_->snapshot();
    RunResult result;
    result.manifest = run_daily_targeting(*snap, *registry_, as_of, previous_run_before(as_of), config_.targeting);

    GenerationParams params{config_.llm.model, config_.llm.temperature};
    struct Job {
      InterventionTarget target;
      ThreadContext context;
      std::optional<CandidateResponse> candidate;
      std::optional<GenerationFailure> failure;
    };
    std::vector<Job> jobs;
    for (const auto& t : result.manifest.targets) {
      if (board_->has_candidate_for(t.target_id)) {
        result.skipped_existing.push_back(t.target_id);
        continue;
      }
      jobs.push_back({t, resolve_thread(*snap, t.target_id), std::nullopt, std::nullopt});
    }
    const Timestamp stamp = generated_at.value_or(as_of);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        Job& job = jobs[i];
        try {
          const PromptBundle bundle = assemble_prompt(job.target, job.context, framework_, templates_, params);
          job.candidate = generate_candidate(bundle, *generator_, "cand-" + job.target.target_id, stamp);
        } catch (const UnparseableOutputError& e) {
          job.failure = GenerationFailure{job.target.target_id, to_string(e.code()), e.what(), e.raw_output()};
        } catch (const Error& e) {
          job.failure = GenerationFailure{job.target.target_id, to_string(e.code()), e.what(), {}};
        }
      }
    };
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config_.llm.parallelism), jobs.size());
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    for (auto& job : jobs) {
      if (job.candidate) {
        board_->enqueue(*job.candidate, job.context);
        result.candidates.push_back(std::move(*job.candidate));
      } else {
        result.failures.push_back(std::move(*job.failure));
      }
    }
    Json line = to_json(result.manifest);
    append_line(path("runs.ndjson"), line);
    runs_.push_back(std::move(line));
    return result;
  }

  ReviewRecord decide(const std::string& candidate_id, const DecisionPayload& payload, Timestamp decided_at) {
    return board_->decide(candidate_id, payload, decided_at);
  }

  std::vector<PublicationEvent> publish(Timestamp published_at, Timestamp since = Timestamp{}) {
    return board_->publish_accepted(since, published_at, *store_, config_.targeting.pca_user_id);
  }

  AcceptanceMetrics metrics(Date from, Date to) const { return board_->acceptance_metrics(from, to); }

  /// Codes learner text records in threads with an assigned condition that
  /// have not been coded yet.
  CodingRunSummary code() {
    std::lock_guard job(job_mutex_);
    const auto snap = store_->snapshot();
    CodingRunSummary summary;
    std::vector<const ActionRecord*> todo;
    for (const auto& r : snap->records()) {
      if (!has_text(r.action_type) || r.actor_id == config_.targeting.pca_user_id) continue;
      if (!registry_->condition_of(r.post_id)) continue;
      if (coded_.count(r.record_id)) {
        ++summary.already_coded;
        continue;
      }
      todo.push_back(&r);
    }
    const CoderParams params{config_.llm.coder_model, config_.llm.coder_temperature, coder_->kind()};
    std::vector<std::optional<std::variant<std::vector<CodedUnit>, CodingRejection>>> outcomes(todo.size());
    std::vector<std::exception_ptr> errors(todo.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < todo.size(); i = next++) {
        try {
          outcomes[i] = code_record(*todo[i], *coder_, scheme_, params);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config_.llm.parallelism), todo.size());
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    // Persist what succeeded before surfacing the first hard failure.
    std::exception_ptr first_error;
    for (std::size_t i = 0; i < todo.size(); ++i) {
      if (errors[i]) {
        if (!first_error) first_error = errors[i];
        continue;
      }
      if (auto* units = std::get_if<std::vector<CodedUnit>>(&*outcomes[i])) {
        store_coding({todo[i]->record_id, *units});
        ++summary.coded;
        summary.units += units->size();
      } else {
        summary.rejections.push_back(std::get<CodingRejection>(*outcomes[i]));
      }
    }
    if (first_error) std::rethrow_exception(first_error);
    return summary;
  }

  /// Imports externally produced coded units (e.g. human coding). Records
  /// already coded are left unchanged.
  std::size_t import_codes(const std::vector<CodedUnit>& units, const std::vector<std::string>& uncoded_records = {}) {
    std::lock_guard job(job_mutex_);
    std::map<std::string, std::vector<CodedUnit>> grouped;
    for (const auto& id : uncoded_records) grouped[id];
    for (const auto& u : units) grouped[u.record_id].push_back(u);
    std::size_t added = 0;
    for (auto& [id, list] : grouped) {
      if (coded_.count(id)) continue;
      store_coding({id, std::move(list)});
      ++added;
    }
    return added;
  }

  /// Record-level index scores of coded learner records with their condition.
  std::vector<RecordScore> record_scores() const {
    const auto snap = store_->snapshot();
    std::vector<RecordScore> out;
    for (const auto& r : snap->records()) {
      auto it = coded_.find(r.record_id);
      if (it == coded_.end() || r.actor_id == config_.targeting.pca_user_id) continue;
      const auto condition = registry_->condition_of(r.post_id);
      if (!condition) continue;
      out.push_back({r.record_id, iso_week(r.timestamp), {r.actor_id, *condition, aggregate_indices(score_record(it->second))}});
    }
    return out;
  }

  std::map<LearnerKey, PresenceIndexVector> learner_means() const {
    std::vector<LearnerScore> rows;
    for (auto& rs : record_scores()) rows.push_back(std::move(rs.score));
    return learner_level_means(rows);
  }

  std::vector<InteractionMode> interaction_modes() const {
    const auto pubs = board_->publications();
    return classify_interaction_modes(*store_->snapshot(), pubs, config_.targeting.pca_user_id);
  }

  stats::GoalReport goal1() const {
    return stats::run_goal1(stats::goal1_rows(learner_means()), goal_options());
  }

  stats::GoalReport goal2() const {
    return stats::run_goal2(stats::goal2_rows(learner_means(), interaction_modes()));
  }

  stats::GoalOptions goal_options() const {
    stats::GoalOptions o;
    o.alpha = config_.stats.alpha;
    return o;
  }

  /// Within learner-week permutation analysis for each of the nine indices.
  std::vector<stats::PermutationResult> permutation(std::optional<std::size_t> n = std::nullopt,
                                                    std::optional<std::uint64_t> seed = std::nullopt) const {
    const auto scores = record_scores();
    stats::PermutationOptions options{n.value_or(config_.stats.permutation_n),
                                      seed.value_or(config_.stats.permutation_seed), config_.stats.threads};
    std::vector<stats::PermutationResult> out;
    for (PresenceIndex p : kAllPresenceIndices) {
      std::vector<stats::StratifiedObservation> data;
      for (const auto& rs : scores)
        data.push_back({rs.score.learner_id, rs.iso_week, rs.score.condition == Condition::with_pca,
                        rs.score.scores[p]});
      out.push_back(stats::permutation_sensitivity(data, to_string(p), options));
    }
    return out;
  }

  /// Post-level balance over every assigned focal post. Centrality is the
  /// post's score in the run that first assigned it.
  stats::BalanceTable balance() const {
    std::map<std::string, double> centrality;
    for (const auto& run : runs_)
      if (run.contains("focal_centrality"))
        for (const auto& [id, v] : run["focal_centrality"].items()) centrality.emplace(id, v.get<double>());
    const auto snap = store_->snapshot();
    std::vector<stats::BalancePost> posts;
    for (const auto& [id, a] : registry_->assignments()) {
      const ActionRecord* post = snap->find_artifact(id);
      if (!post) continue;
      std::optional<double> c;
      if (auto it = centrality.find(id); it != centrality.end()) c = it->second;
      posts.push_back({id, a.condition, post->timestamp, c});
    }
    return stats::balance_check(posts, std::chrono::minutes{config_.stats.balance_utc_offset_minutes});
  }

  const std::vector<Json>& runs() const { return runs_; }

  std::string path(const std::string& file) const { return config_.data_dir + "/" + file; }

 private:
  /// Latest earlier run: a learner reply counts for the first run after it.
  std::optional<Timestamp> previous_run_before(Timestamp as_of) const {
    std::optional<Timestamp> best;
    for (const auto& run : runs_) {
      const Timestamp t = require_timestamp(run.at("as_of").get<std::string>());
      if (t < as_of && (!best || t > *best)) best = t;
    }
    return best;
  }

  void remember_coding(const Json& j) {
    RecordCoding rc;
    rc.record_id = j.at("record_id").get<std::string>();
    const std::string coder = j.value("coder_id", "");
    for (const auto& u : j.at("units")) {
      Json unit = u;
      unit["record_id"] = rc.record_id;
      if (!unit.contains("coder_id")) unit["coder_id"] = coder;
      rc.units.push_back(coded_unit_from_json(unit));
    }
    coded_.emplace(rc.record_id, std::move(rc.units));
  }

  void store_coding(RecordCoding rc) {
    Json units = Json::array();
    for (const auto& u : rc.units) units.push_back({{"indicator", to_string(u.indicator)}, {"salience", to_string(u.salience)}, {"coder_id", u.coder_id}});
    append_line(path("coding.ndjson"), {{"record_id", rc.record_id}, {"units", units}});
    coded_.emplace(rc.record_id, std::move(rc.units));
  }

  template <class F>
  static void read_lines(const std::string& file, F&& f) {
    std::ifstream in(file);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      const Json j = Json::parse(line, nullptr, false);
      if (j.is_discarded()) fail(ErrorCode::integrity, file + ":" + std::to_string(n) + ": corrupt line");
      f(j);
    }
  }

  static void append_line(const std::string& file, const Json& j) {
    std::ofstream out(file, std::ios::app);
    if (!out) fail(ErrorCode::io, "cannot append to '" + file + "'");
    out << j.dump() << '\n';
    if (!out.flush()) fail(ErrorCode::io, "write to '" + file + "' failed");
  }

  EngineConfig config_;
  std::shared_ptr<GenerationClient> generator_;
  std::shared_ptr<GenerationClient> coder_;
  std::unique_ptr<ForumStore> store_;
  std::unique_ptr<ConditionRegistry> registry_;
  std::unique_ptr<ReviewBoard> board_;
  RoleFramework framework_;
  PromptTemplates templates_;
  CodingScheme scheme_;
  std::vector<Json> runs_;
  std::map<std::string, std::vector<CodedUnit>> coded_;
  std::mutex job_mutex_;
};

}  // namespace facihub
