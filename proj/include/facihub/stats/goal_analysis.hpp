#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "facihub/error.hpp"
#include "facihub/forum_model.hpp"
#include "facihub/presence.hpp"
#include "facihub/stats/core.hpp"
#include "facihub/stats/multiple_testing.hpp"
#include "facihub/stats/shapiro_wilk.hpp"
#include "facihub/stats/tests.hpp"

namespace facihub::stats {

enum class Goal { goal1_paired, goal2_independent };

inline const char* to_string(Goal g) { return g == Goal::goal1_paired ? "goal1" : "goal2"; }

/// One row of a learner-means table: learner, group label and nine indices.
/// The group label is a condition (with_pca / without_pca) for goal 1 and an
/// interaction mode (direct / co_presence) for goal 2.
struct LearnerMeansRow {
  std::string learner_id;
  std::string group;
  PresenceIndexVector means;
};

inline void write_learner_means_tsv(std::ostream& out, const std::vector<LearnerMeansRow>& rows);

/// Reads a tab-separated learner-means table with header
/// learner_id, group (or condition / mode) and the nine index columns.
inline std::vector<LearnerMeansRow> read_learner_means_tsv(std::istream& in) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    if (!line.empty() && line.back() == '\t') cells.emplace_back();
    return cells;
  };
  std::string header_line;
  if (!std::getline(in, header_line)) throw ValidationError("learner means table is empty", {{"header", "missing"}});
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
  const auto header = split(header_line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);

  std::vector<FieldError> missing;
  auto need = [&](const std::string& name) -> std::size_t {
    auto it = col.find(name);
    if (it == col.end()) {
      missing.push_back({name, "missing column"});
      return 0;
    }
    return it->second;
  };
  const std::size_t learner_col = need("learner_id");
  std::optional<std::size_t> group_col;
  for (const char* name : {"group", "condition", "mode"})
    if (col.count(name)) {
      group_col = col[name];
      break;
    }
  if (!group_col) missing.push_back({"group", "missing column (group, condition or mode)"});
  std::array<std::size_t, kPresenceIndexCount> index_cols{};
  for (PresenceIndex p : kAllPresenceIndices) index_cols[static_cast<std::size_t>(p)] = need(to_string(p));
  if (!missing.empty()) throw ValidationError("learner means table is missing columns", std::move(missing));

  std::vector<LearnerMeansRow> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    const std::string where = "line " + std::to_string(line_no);
    if (cells.size() != header.size())
      throw ValidationError(where + ": expected " + std::to_string(header.size()) + " cells", {{where, "cell count"}});
    LearnerMeansRow row{cells[learner_col], cells[*group_col], {}};
    for (PresenceIndex p : kAllPresenceIndices) {
      const auto& text = cells[index_cols[static_cast<std::size_t>(p)]];
      try {
        std::size_t used = 0;
        row.means[p] = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
      } catch (const std::logic_error&) {
        throw ValidationError(where + ": " + to_string(p) + " is not a number", {{to_string(p), "not a number"}});
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<LearnerMeansRow> read_learner_means_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  return read_learner_means_tsv(in);
}

/// One report line. Columns that do not apply to the goal are left empty.
struct GoalReportRow {
  PresenceIndex index = PresenceIndex::SP_AF;
  std::optional<double> mean_a;    // M_without (goal 1) or M_co (goal 2)
  std::optional<double> mean_b;    // M_with or M_direct
  std::optional<double> median_a;  // goal 2 only
  std::optional<double> median_b;
  std::optional<double> delta_m;  // mean_b - mean_a
  std::string test;               // paired_t, wilcoxon or mann_whitney_u
  std::optional<TestResult> result;
  std::optional<double> p_bh;
  std::optional<ShapiroWilkResult> normality;
  std::optional<std::string> error;  // "code: message" when the test could not run
};

struct GoalReport {
  Goal goal = Goal::goal1_paired;
  Tail tail = Tail::one_tailed_greater;
  double alpha = 0.05;
  std::size_t n_a = 0;  // learners in the baseline group (goal 2) or pairs (goal 1)
  std::size_t n_b = 0;
  std::vector<std::string> dropped_learners;  // goal 1: learners lacking one condition
  std::vector<GoalReportRow> rows;
};

namespace detail {

inline std::string error_text(const Error& e) { return std::string(to_string(e.code())) + ": " + e.what(); }

inline void apply_bh(GoalReport& report) {
  std::vector<double> raw;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < report.rows.size(); ++i)
    if (report.rows[i].result) {
      raw.push_back(report.rows[i].result->p_value);
      where.push_back(i);
    }
  const auto adj = bh_adjust(raw);
  for (std::size_t k = 0; k < where.size(); ++k) report.rows[where[k]].p_bh = adj.adjusted[k];
}

}  // namespace detail

struct GoalOptions {
  double alpha = 0.05;  // Shapiro-Wilk gate
  WilcoxonOptions wilcoxon{};
};

/// Within-subjects comparison per index. Learners need both a with_pca and a
/// without_pca row; others are dropped and listed. The normality gate picks
/// paired t when the differences pass Shapiro-Wilk and Wilcoxon signed-rank
/// otherwise, one-tailed for with > without.
inline GoalReport run_goal1(const std::vector<LearnerMeansRow>& rows, const GoalOptions& options = {}) {
  std::map<std::string, std::map<std::string, PresenceIndexVector>> by_learner;
  for (const auto& r : rows) {
    if (r.group != "with_pca" && r.group != "without_pca")
      throw ValidationError("goal 1 expects condition with_pca or without_pca", {{"condition", r.group}});
    if (!by_learner[r.learner_id].emplace(r.group, r.means).second)
      throw ValidationError("duplicate row for learner " + r.learner_id, {{"learner_id", r.learner_id}});
  }
  GoalReport report;
  report.goal = Goal::goal1_paired;
  report.alpha = options.alpha;
  std::vector<std::pair<PresenceIndexVector, PresenceIndexVector>> pairs;  // (without, with)
  for (const auto& [learner, groups] : by_learner) {
    auto w = groups.find("with_pca");
    auto wo = groups.find("without_pca");
    if (w == groups.end() || wo == groups.end()) {
      report.dropped_learners.push_back(learner);
      continue;
    }
    pairs.emplace_back(wo->second, w->second);
  }
  report.n_a = report.n_b = pairs.size();

  for (PresenceIndex p : kAllPresenceIndices) {
    GoalReportRow row;
    row.index = p;
    std::vector<double> without, with, diffs;
    for (const auto& [a, b] : pairs) {
      without.push_back(a[p]);
      with.push_back(b[p]);
      diffs.push_back(b[p] - a[p]);
    }
    if (!pairs.empty()) {
      row.mean_a = mean(without);
      row.mean_b = mean(with);
      row.delta_m = *row.mean_b - *row.mean_a;
    }
    try {
      if (diffs.size() < 3) fail(ErrorCode::degenerate, "need at least 3 paired learners, have " + std::to_string(diffs.size()));
      bool normal = false;
      try {
        row.normality = shapiro_wilk(diffs);
        normal = row.normality->p_value >= options.alpha;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::degenerate) throw;
        // Constant differences: no normality evidence, fall through to ranks.
      }
      if (normal) {
        row.test = "paired_t";
        row.result = paired_t(diffs, report.tail);
      } else {
        row.test = "wilcoxon";
        row.result = wilcoxon_signed_rank(diffs, report.tail, options.wilcoxon);
      }
    } catch (const Error& e) {
      row.error = detail::error_text(e);
    }
    report.rows.push_back(std::move(row));
  }
  detail::apply_bh(report);
  return report;
}

/// Between-groups comparison per index: direct-interaction learners against
/// co-presence learners, Mann-Whitney U one-tailed for direct > co-presence.
inline GoalReport run_goal2(const std::vector<LearnerMeansRow>& rows) {
  std::vector<const PresenceIndexVector*> co, direct;
  std::set<std::string> seen;
  for (const auto& r : rows) {
    if (!seen.insert(r.learner_id).second)
      throw ValidationError("duplicate row for learner " + r.learner_id, {{"learner_id", r.learner_id}});
    if (r.group == "direct") {
      direct.push_back(&r.means);
    } else if (r.group == "co_presence") {
      co.push_back(&r.means);
    } else {
      throw ValidationError("goal 2 expects mode direct or co_presence", {{"mode", r.group}});
    }
  }
  GoalReport report;
  report.goal = Goal::goal2_independent;
  report.n_a = co.size();
  report.n_b = direct.size();
  for (PresenceIndex p : kAllPresenceIndices) {
    GoalReportRow row;
    row.index = p;
    row.test = "mann_whitney_u";
    std::vector<double> a, b;
    for (const auto* v : co) a.push_back((*v)[p]);
    for (const auto* v : direct) b.push_back((*v)[p]);
    if (!a.empty()) {
      row.mean_a = mean(a);
      row.median_a = median(a);
    }
    if (!b.empty()) {
      row.mean_b = mean(b);
      row.median_b = median(b);
    }
    if (row.mean_a && row.mean_b) row.delta_m = *row.mean_b - *row.mean_a;
    try {
      row.result = mann_whitney_u(b, a, report.tail);
    } catch (const Error& e) {
      row.error = detail::error_text(e);
    }
    report.rows.push_back(std::move(row));
  }
  detail::apply_bh(report);
  return report;
}

/// Learner-means table for goal 1 from per-learner condition means.
inline std::vector<LearnerMeansRow> goal1_rows(const std::map<LearnerKey, PresenceIndexVector>& means) {
  std::vector<LearnerMeansRow> out;
  for (const auto& [key, v] : means) out.push_back({key.first, to_string(key.second), v});
  return out;
}

/// Learner-means table for goal 2: with_pca means of learners that have an
/// interaction mode.
inline std::vector<LearnerMeansRow> goal2_rows(const std::map<LearnerKey, PresenceIndexVector>& means,
                                               const std::vector<InteractionMode>& modes) {
  std::vector<LearnerMeansRow> out;
  for (const auto& m : modes) {
    auto it = means.find({m.learner_id, Condition::with_pca});
    if (it != means.end()) out.push_back({m.learner_id, to_string(m.mode), it->second});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export

inline std::string format_number(std::optional<double> v) {
  if (!v) return "NA";
  if (*v == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}

inline void write_report_tsv(std::ostream& out, const GoalReport& report) {
  if (report.goal == Goal::goal1_paired) {
    out << "indicator\tM_without\tM_with\tdelta_M\ttest\teffect_size\tp\tp_BH\n";
  } else {
    out << "indicator\tM_co\tM_direct\tMdn_co\tMdn_direct\tdelta_M\teffect_size\tp\tp_BH\n";
  }
  for (const auto& row : report.rows) {
    std::optional<double> effect, p;
    if (row.result) {
      effect = row.result->effect_size.value;
      p = row.result->p_value;
    }
    out << to_string(row.index) << '\t' << format_number(row.mean_a) << '\t' << format_number(row.mean_b) << '\t';
    if (report.goal == Goal::goal1_paired) {
      out << format_number(row.delta_m) << '\t' << (row.result ? row.test : "NA") << '\t';
    } else {
      out << format_number(row.median_a) << '\t' << format_number(row.median_b) << '\t' << format_number(row.delta_m)
          << '\t';
    }
    out << format_number(effect) << '\t' << format_number(p) << '\t' << format_number(row.p_bh) << '\n';
  }
}

/// Report metadata kept beside the table: tails, conventions, per-row detail.
inline Json report_metadata(const GoalReport& report, const GoalOptions& options = {}) {
  Json j;
  j["goal"] = to_string(report.goal);
  j["tail"] = to_string(report.tail);
  if (report.goal == Goal::goal1_paired) {
    j["hypothesis"] = "with_pca > without_pca";
    j["n_pairs"] = report.n_a;
    j["normality_alpha"] = report.alpha;
    j["zero_method"] = to_string(options.wilcoxon.zero_method);
    j["wilcoxon_r_denominator"] = "sqrt(nonzero paired differences)";
    j["dropped_learners"] = report.dropped_learners;
  } else {
    j["hypothesis"] = "direct > co_presence";
    j["n_co_presence"] = report.n_a;
    j["n_direct"] = report.n_b;
    j["mann_whitney_r_denominator"] = "sqrt(n_direct + n_co_presence)";
  }
  j["exact_threshold"] = kExactThreshold;
  j["multiple_testing"] = "benjamini_hochberg across rows with a valid test";
  j["rows"] = Json::array();
  for (const auto& row : report.rows) {
    Json r;
    r["indicator"] = to_string(row.index);
    r["test"] = row.test;
    if (row.result) {
      r["statistic"] = row.result->statistic;
      r["z"] = row.result->z_value ? Json(*row.result->z_value) : Json();
      r["effect_kind"] = to_string(row.result->effect_size.kind);
      r["n_used"] = row.result->n_used;
      r["p_method"] = row.result->method == PMethod::exact ? "exact" : "normal";
    }
    if (row.normality) r["shapiro_wilk"] = {{"W", row.normality->w}, {"p", row.normality->p_value}};
    if (row.error) r["error"] = *row.error;
    j["rows"].push_back(std::move(r));
  }
  return j;
}

inline void write_learner_means_tsv(std::ostream& out, const std::vector<LearnerMeansRow>& rows) {
  out << "learner_id\tgroup";
  for (PresenceIndex p : kAllPresenceIndices) out << '\t' << to_string(p);
  out << '\n';
  for (const auto& r : rows) {
    out << r.learner_id << '\t' << r.group;
    for (PresenceIndex p : kAllPresenceIndices) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", r.means[p]);
      out << '\t' << buf;
    }
    out << '\n';
  }
}

}  // namespace facihub::stats
