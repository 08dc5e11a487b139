#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "facihub/error.hpp"

namespace facihub::stats {

enum class Tail { one_tailed_greater, one_tailed_less, two_tailed };

inline const char* to_string(Tail t) {
  switch (t) {
    case Tail::one_tailed_greater: return "one_tailed_greater";
    case Tail::one_tailed_less: return "one_tailed_less";
    case Tail::two_tailed: return "two_tailed";
  }
  return "?";
}

inline Tail flip(Tail t) {
  switch (t) {
    case Tail::one_tailed_greater: return Tail::one_tailed_less;
    case Tail::one_tailed_less: return Tail::one_tailed_greater;
    default: return t;
  }
}

enum class EffectKind { cohen_d, rank_r };

inline const char* to_string(EffectKind k) { return k == EffectKind::cohen_d ? "cohen_d" : "rank_r"; }

struct EffectSize {
  EffectKind kind = EffectKind::cohen_d;
  double value = 0.0;
};

/// How a rank test's p-value was obtained.
enum class PMethod { exact, normal };

struct TestResult {
  double statistic = 0.0;
  std::optional<double> z_value;
  double p_value = 1.0;
  Tail tail = Tail::two_tailed;
  EffectSize effect_size;
  std::size_t n_used = 0;
  PMethod method = PMethod::normal;
};

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

inline double students_t_cdf(double t, double df) {
  return boost::math::cdf(boost::math::students_t_distribution<double>(df), t);
}

inline double students_t_sf(double t, double df) {
  return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df), t));
}

inline double clamp_p(double p) { return std::clamp(p, 0.0, 1.0); }

/// Combines one-sided tail probabilities into the requested p-value.
inline double tail_p(Tail tail, double p_greater, double p_less) {
  switch (tail) {
    case Tail::one_tailed_greater: return clamp_p(p_greater);
    case Tail::one_tailed_less: return clamp_p(p_less);
    case Tail::two_tailed: return clamp_p(2.0 * std::min(p_greater, p_less));
  }
  return 1.0;
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) fail(ErrorCode::sample_size, "mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double stddev(std::span<const double> xs) {
  if (xs.size() < 2) fail(ErrorCode::sample_size, "standard deviation needs at least 2 values");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) fail(ErrorCode::sample_size, "median of empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// Linear-interpolation quantile (type 7) of a sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(ErrorCode::sample_size, "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Mid-ranks doubled so they stay integral: a tie group occupying 1-based
/// positions i..j gets i + j.
inline std::vector<std::int64_t> doubled_midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<std::int64_t> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const auto r2 = static_cast<std::int64_t>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r2;
    i = j + 1;
  }
  return ranks;
}

/// Sum over tie groups of t^3 - t.
inline double tie_term(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    term += t * t * t - t;
    i = j + 1;
  }
  return term;
}

}  // namespace facihub::stats
