#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "facihub/error.hpp"

namespace facihub::stats {

struct AdjustedPValues {
  std::vector<double> raw;
  std::vector<double> adjusted;
};

/// Benjamini-Hochberg step-up adjustment, returned in input order.
inline AdjustedPValues bh_adjust(std::span<const double> p_values) {
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::argument, "p-values must lie in [0, 1]");
  const std::size_t m = p_values.size();
  AdjustedPValues out{{p_values.begin(), p_values.end()}, std::vector<double>(m)};
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  double running = 1.0;
  for (std::size_t rank = m; rank >= 1; --rank) {
    const std::size_t idx = order[rank - 1];
    // m / rank >= 1 is rounded first so the product never drops below p.
    const double scale = static_cast<double>(m) / static_cast<double>(rank);
    running = std::min(running, std::min(1.0, p_values[idx] * scale));
    out.adjusted[idx] = running;
  }
  return out;
}

}  // namespace facihub::stats
