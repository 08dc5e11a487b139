#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "facihub/error.hpp"
#include "facihub/stats/core.hpp"

namespace facihub::stats {

/// Paired t on differences. Effect size is Cohen's d = mean / sd.
inline TestResult paired_t(std::span<const double> diffs, Tail tail) {
  if (diffs.size() < 2) fail(ErrorCode::sample_size, "paired t needs at least 2 differences");
  const double m = mean(diffs);
  const double sd = stddev(diffs);
  if (!(sd > 0.0)) fail(ErrorCode::degenerate, "differences have zero variance");
  const double n = static_cast<double>(diffs.size());
  const double t = m / (sd / std::sqrt(n));
  const double df = n - 1.0;
  TestResult r;
  r.statistic = t;
  r.tail = tail;
  r.p_value = tail_p(tail, students_t_sf(t, df), students_t_cdf(t, df));
  r.effect_size = {EffectKind::cohen_d, m / sd};
  r.n_used = diffs.size();
  r.method = PMethod::normal;
  return r;
}

/// Sample size at or below which rank tests enumerate the exact null.
inline constexpr std::size_t kExactThreshold = 12;

enum class RankMethod { automatic, exact, normal };

/// Zero differences: dropped before ranking (wilcox) or ranked and then
/// dropped (pratt).
enum class ZeroMethod { wilcox, pratt };

inline const char* to_string(ZeroMethod z) { return z == ZeroMethod::wilcox ? "wilcox" : "pratt"; }

struct WilcoxonOptions {
  RankMethod method = RankMethod::automatic;
  ZeroMethod zero_method = ZeroMethod::wilcox;
};

namespace detail {

/// Number of subsets of `weights` per subset sum. Exact null of a signed-rank
/// statistic when every sign is equally likely.
inline std::vector<double> subset_sum_counts(std::span<const std::int64_t> weights) {
  std::int64_t total = 0;
  for (auto w : weights) total += w;
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  std::int64_t reach = 0;
  for (auto w : weights) {
    for (std::int64_t s = reach; s >= 0; --s) counts[static_cast<std::size_t>(s + w)] += counts[static_cast<std::size_t>(s)];
    reach += w;
  }
  return counts;
}

/// counts[k][s]: number of k-subsets of `weights` summing to s.
inline std::vector<std::vector<double>> k_subset_sum_counts(std::span<const std::int64_t> weights, std::size_t k_max) {
  std::int64_t total = 0;
  for (auto w : weights) total += w;
  std::vector<std::vector<double>> counts(k_max + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
  counts[0][0] = 1.0;
  std::size_t seen = 0;
  for (auto w : weights) {
    ++seen;
    for (std::size_t k = std::min(seen, k_max); k >= 1; --k)
      for (std::int64_t s = total - w; s >= 0; --s)
        if (counts[k - 1][static_cast<std::size_t>(s)] != 0.0)
          counts[k][static_cast<std::size_t>(s + w)] += counts[k - 1][static_cast<std::size_t>(s)];
  }
  return counts;
}

}  // namespace detail

/// Wilcoxon signed-rank test on paired differences. The statistic is W+, the
/// rank sum of positive differences. Exact null by enumeration when at most
/// kExactThreshold nonzero differences remain, otherwise a tie-corrected
/// normal approximation with continuity correction. Effect size
/// r = Z / sqrt(n_used), n_used = nonzero differences, Z uncorrected.
inline TestResult wilcoxon_signed_rank(std::span<const double> diffs, Tail tail, WilcoxonOptions options = {}) {
  std::vector<double> ranked_abs;
  std::vector<bool> positive;
  std::vector<bool> zero;
  for (double d : diffs) {
    if (d == 0.0 && options.zero_method == ZeroMethod::wilcox) continue;
    ranked_abs.push_back(std::abs(d));
    positive.push_back(d > 0.0);
    zero.push_back(d == 0.0);
  }
  const auto ranks_all = doubled_midranks(ranked_abs);
  std::vector<std::int64_t> ranks;  // nonzero differences only
  std::int64_t w_plus2 = 0;
  for (std::size_t i = 0; i < ranks_all.size(); ++i) {
    if (zero[i]) continue;
    ranks.push_back(ranks_all[i]);
    if (positive[i]) w_plus2 += ranks_all[i];
  }
  const std::size_t n = ranks.size();
  if (n == 0) fail(ErrorCode::degenerate, "all differences are zero");

  double sum_r = 0.0, sum_r2 = 0.0;
  for (auto r2 : ranks) {
    const double r = static_cast<double>(r2) / 2.0;
    sum_r += r;
    sum_r2 += r * r;
  }
  const double w_plus = static_cast<double>(w_plus2) / 2.0;
  const double mu = sum_r / 2.0;
  const double sd = std::sqrt(sum_r2 / 4.0);
  const double z = (w_plus - mu) / sd;

  const bool exact = options.method == RankMethod::exact ||
                     (options.method == RankMethod::automatic && n <= kExactThreshold);
  double p_greater, p_less;
  if (exact) {
    const auto counts = detail::subset_sum_counts(ranks);
    const double total = std::ldexp(1.0, static_cast<int>(n));
    double ge = 0.0, le = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (static_cast<std::int64_t>(s) >= w_plus2) ge += counts[s];
      if (static_cast<std::int64_t>(s) <= w_plus2) le += counts[s];
    }
    p_greater = ge / total;
    p_less = le / total;
  } else {
    p_greater = normal_sf((w_plus - mu - 0.5) / sd);
    p_less = normal_cdf((w_plus - mu + 0.5) / sd);
  }

  TestResult r;
  r.statistic = w_plus;
  r.z_value = z;
  r.tail = tail;
  r.p_value = tail_p(tail, p_greater, p_less);
  r.n_used = n;
  r.effect_size = {EffectKind::rank_r, z / std::sqrt(static_cast<double>(n))};
  r.method = exact ? PMethod::exact : PMethod::normal;
  return r;
}

/// Mann-Whitney U for samples a and b. Tails are stated for a: greater means
/// a tends to exceed b. The statistic is U_a. Exact null by enumeration when
/// n_a + n_b <= kExactThreshold, otherwise a tie-corrected normal
/// approximation with continuity correction. r = Z / sqrt(n_a + n_b).
inline TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, Tail tail,
                                 RankMethod method = RankMethod::automatic) {
  if (a.empty() || b.empty()) fail(ErrorCode::argument, "Mann-Whitney U needs two non-empty samples");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = doubled_midranks(pooled);
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::int64_t ra2 = 0;
  for (std::size_t i = 0; i < na; ++i) ra2 += ranks[i];

  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb), dn = static_cast<double>(n);
  const double u_a = static_cast<double>(ra2) / 2.0 - dna * (dna + 1.0) / 2.0;
  const double mu = dna * dnb / 2.0;
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term(pooled) / (dn * (dn - 1.0)));
  const double sd = var > 0.0 ? std::sqrt(var) : 0.0;
  const double z = sd > 0.0 ? (u_a - mu) / sd : 0.0;

  const bool exact = method == RankMethod::exact || (method == RankMethod::automatic && n <= kExactThreshold);
  double p_greater, p_less;
  if (exact) {
    const auto counts = detail::k_subset_sum_counts(ranks, na);
    double total = 0.0, ge = 0.0, le = 0.0;
    for (std::size_t s = 0; s < counts[na].size(); ++s) {
      const double c = counts[na][s];
      total += c;
      if (static_cast<std::int64_t>(s) >= ra2) ge += c;
      if (static_cast<std::int64_t>(s) <= ra2) le += c;
    }
    p_greater = ge / total;
    p_less = le / total;
  } else if (sd > 0.0) {
    p_greater = normal_sf((u_a - mu - 0.5) / sd);
    p_less = normal_cdf((u_a - mu + 0.5) / sd);
  } else {
    p_greater = p_less = 1.0;
  }

  TestResult r;
  r.statistic = u_a;
  r.z_value = z;
  r.tail = tail;
  r.p_value = tail_p(tail, p_greater, p_less);
  r.n_used = n;
  r.effect_size = {EffectKind::rank_r, z / std::sqrt(dn)};
  r.method = exact ? PMethod::exact : PMethod::normal;
  return r;
}

}  // namespace facihub::stats
