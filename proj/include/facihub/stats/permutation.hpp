#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <map>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "facihub/error.hpp"
#include "facihub/stats/core.hpp"

namespace facihub::stats {

struct StratifiedObservation {
  std::string learner_id;
  std::string iso_week;
  bool with_condition = false;
  double value = 0.0;
};

struct PermutationResult {
  std::string indicator;
  double observed_delta = 0.0;
  double null_lo = 0.0;
  double null_hi = 0.0;
  double percentile = 0.0;
  double empirical_p_two_tailed = 1.0;
  std::size_t n_permutations = 0;
  std::uint64_t seed = 0;
  std::size_t strata_used = 0;
  std::size_t learners_used = 0;
  std::vector<std::string> excluded_strata;  // "learner|week"

  bool operator==(const PermutationResult&) const = default;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Uniform integer in [0, bound) by rejection; portable across standard
/// libraries, unlike std::uniform_int_distribution.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

/// Engine for replicate `index` under `seed`; independent of scheduling.
inline std::mt19937_64 replicate_engine(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(index + 1)));
}

struct PermutationOptions {
  std::size_t n_permutations = 2000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

namespace detail {

struct Stratum {
  std::size_t learner = 0;
  std::vector<double> values;
  std::vector<char> labels;  // 1 = with
};

/// mean over learners of (mean with - mean without).
inline double learner_delta(const std::vector<Stratum>& strata, std::size_t learners) {
  std::vector<double> with_sum(learners, 0.0), without_sum(learners, 0.0);
  std::vector<std::size_t> with_n(learners, 0), without_n(learners, 0);
  for (const auto& s : strata) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (s.labels[i]) {
        with_sum[s.learner] += s.values[i];
        ++with_n[s.learner];
      } else {
        without_sum[s.learner] += s.values[i];
        ++without_n[s.learner];
      }
    }
  }
  double total = 0.0;
  for (std::size_t l = 0; l < learners; ++l)
    total += with_sum[l] / static_cast<double>(with_n[l]) - without_sum[l] / static_cast<double>(without_n[l]);
  return total / static_cast<double>(learners);
}

}  // namespace detail

/// Within-stratum label permutation test for the learner-level with minus
/// without mean difference. Strata are (learner, ISO week); strata with fewer
/// than two observations or a single condition are excluded and listed.
inline PermutationResult permutation_sensitivity(std::span<const StratifiedObservation> data, std::string indicator,
                                                 const PermutationOptions& options = {}) {
  if (options.n_permutations < 1) fail(ErrorCode::argument, "n_permutations must be at least 1");

  std::map<std::pair<std::string, std::string>, std::vector<const StratifiedObservation*>> grouped;
  for (const auto& obs : data) grouped[{obs.learner_id, obs.iso_week}].push_back(&obs);

  PermutationResult result;
  result.indicator = std::move(indicator);
  result.n_permutations = options.n_permutations;
  result.seed = options.seed;

  std::map<std::string, std::size_t> learner_index;
  std::vector<detail::Stratum> strata;
  for (const auto& [key, rows] : grouped) {
    const bool has_with = std::any_of(rows.begin(), rows.end(), [](auto* o) { return o->with_condition; });
    const bool has_without = std::any_of(rows.begin(), rows.end(), [](auto* o) { return !o->with_condition; });
    if (rows.size() < 2 || !has_with || !has_without) {
      result.excluded_strata.push_back(key.first + "|" + key.second);
      continue;
    }
    auto [it, inserted] = learner_index.emplace(key.first, learner_index.size());
    detail::Stratum s;
    s.learner = it->second;
    for (const auto* o : rows) {
      s.values.push_back(o->value);
      s.labels.push_back(o->with_condition ? 1 : 0);
    }
    strata.push_back(std::move(s));
  }
  if (strata.empty()) fail(ErrorCode::analysis, "no eligible user-week stratum");
  result.strata_used = strata.size();
  result.learners_used = learner_index.size();
  const std::size_t learners = learner_index.size();

  result.observed_delta = detail::learner_delta(strata, learners);

  std::vector<double> null(options.n_permutations);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    std::vector<detail::Stratum> work = strata;
    for (std::size_t rep = begin; rep < end; ++rep) {
      auto rng = replicate_engine(options.seed, rep);
      for (std::size_t si = 0; si < work.size(); ++si) {
        auto& labels = work[si].labels;
        labels = strata[si].labels;
        for (std::size_t i = labels.size() - 1; i > 0; --i) std::swap(labels[i], labels[bounded(rng, i + 1)]);
      }
      null[rep] = detail::learner_delta(work, learners);
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, 64));
  if (threads == 1) {
    run_range(0, null.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (null.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk, end = std::min(null.size(), begin + chunk);
      if (begin < end) pool.emplace_back(run_range, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  const double obs = result.observed_delta;
  const double tol = 1e-12 * std::max(1.0, std::abs(obs));
  std::size_t at_or_below = 0, as_extreme = 0;
  for (double v : null) {
    if (v <= obs + tol) ++at_or_below;
    if (std::abs(v) >= std::abs(obs) - tol) ++as_extreme;
  }
  std::sort(null.begin(), null.end());
  result.null_lo = quantile_sorted(null, 0.025);
  result.null_hi = quantile_sorted(null, 0.975);
  result.percentile = static_cast<double>(at_or_below) / static_cast<double>(null.size());
  result.empirical_p_two_tailed =
      static_cast<double>(1 + as_extreme) / static_cast<double>(options.n_permutations + 1);
  return result;
}

inline nlohmann::json to_json(const PermutationResult& r) {
  return {{"indicator", r.indicator},
          {"observed_delta", r.observed_delta},
          {"null_interval_95", {r.null_lo, r.null_hi}},
          {"percentile", r.percentile},
          {"empirical_p_two_tailed", r.empirical_p_two_tailed},
          {"n_permutations", r.n_permutations},
          {"seed", r.seed},
          {"strata_used", r.strata_used},
          {"learners_used", r.learners_used},
          {"excluded_strata", r.excluded_strata}};
}

/// Tab-separated table, one row per indicator.
inline void write_permutation_tsv(std::ostream& out, std::span<const PermutationResult> results) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v == 0.0 ? 0.0 : v);
    return std::string(buf);
  };
  out << "indicator\tobserved_delta_M\tnull_95_lo\tnull_95_hi\tpercentile\tempirical_p_two_tailed\n";
  for (const auto& r : results)
    out << r.indicator << '\t' << num(r.observed_delta) << '\t' << num(r.null_lo) << '\t' << num(r.null_hi) << '\t'
        << num(r.percentile) << '\t' << num(r.empirical_p_two_tailed) << '\n';
}

}  // namespace facihub::stats
