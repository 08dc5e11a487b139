#pragma once

#include <chrono>
#include <cstdio>
#include <ostream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "facihub/error.hpp"
#include "facihub/stats/core.hpp"
#include "facihub/targeting.hpp"
#include "facihub/time.hpp"

namespace facihub::stats {

struct BalancePost {
  std::string post_id;
  Condition condition = Condition::with_pca;
  Timestamp timestamp{};
  std::optional<double> centrality;
};

struct BalanceRow {
  std::string metric;
  std::optional<double> value_without;
  std::optional<double> value_with;
  std::optional<double> difference;  // with - without
};

struct BalanceTable {
  std::vector<BalanceRow> rows;
};

/// Post-level balance between conditions: mean posting hour (0-23, in the
/// given UTC offset), mean and median centrality. Posts without a centrality
/// score are left out of the centrality rows.
inline BalanceTable balance_check(std::span<const BalancePost> posts, std::chrono::minutes utc_offset = {}) {
  std::vector<double> hours[2], centrality[2];
  for (const auto& p : posts) {
    const int g = p.condition == Condition::with_pca ? 1 : 0;
    hours[g].push_back(static_cast<double>(hour_of(p.timestamp + utc_offset)));
    if (p.centrality) centrality[g].push_back(*p.centrality);
  }
  if (hours[0].empty() || hours[1].empty())
    fail(ErrorCode::analysis, "balance check needs posts from both conditions");

  auto row = [](std::string name, const std::vector<double>& without, const std::vector<double>& with,
                double (*summary)(const std::vector<double>&)) {
    BalanceRow r{std::move(name), std::nullopt, std::nullopt, std::nullopt};
    if (!without.empty()) r.value_without = summary(without);
    if (!with.empty()) r.value_with = summary(with);
    if (r.value_with && r.value_without) r.difference = *r.value_with - *r.value_without;
    return r;
  };
  auto mean_of = [](const std::vector<double>& v) { return mean(v); };
  auto median_of = [](const std::vector<double>& v) { return median(v); };

  BalanceTable table;
  table.rows.push_back(row("mean_posting_hour", hours[0], hours[1], +mean_of));
  table.rows.push_back(row("mean_centrality", centrality[0], centrality[1], +mean_of));
  table.rows.push_back(row("median_centrality", centrality[0], centrality[1], +median_of));
  return table;
}

inline nlohmann::json to_json(const BalanceTable& t) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"metric", r.metric},
                    {"value_without", opt(r.value_without)},
                    {"value_with", opt(r.value_with)},
                    {"difference", opt(r.difference)}});
  return {{"rows", rows}};
}

inline void write_balance_tsv(std::ostream& out, const BalanceTable& t) {
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string("NA");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *v == 0.0 ? 0.0 : *v);
    return std::string(buf);
  };
  out << "metric\twithout_pca\twith_pca\tdifference\n";
  for (const auto& r : t.rows)
    out << r.metric << '\t' << num(r.value_without) << '\t' << num(r.value_with) << '\t' << num(r.difference) << '\n';
}

}  // namespace facihub::stats
