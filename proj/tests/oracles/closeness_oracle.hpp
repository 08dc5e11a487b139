#pragma once

// Brute-force s-closeness: dense co-occurrence matrix, Floyd-Warshall, then
// the component-restricted closeness formula. Deliberately shares nothing
// with the library beyond the input types.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

inline std::map<std::string, double> closeness(const std::vector<std::set<std::string>>& edges, int s) {
  std::vector<std::string> ids;
  for (const auto& e : edges)
    for (const auto& v : e) ids.push_back(v);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const std::size_t n = ids.size();
  auto idx = [&](const std::string& v) {
    return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), v) - ids.begin());
  };

  std::vector<std::vector<int>> together(n, std::vector<int>(n, 0));
  for (const auto& e : edges)
    for (const auto& a : e)
      for (const auto& b : e)
        if (a != b) ++together[idx(a)][idx(b)];

  const int inf = 1 << 20;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) {
    d[i][i] = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && together[i][j] >= s) d[i][j] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];

  std::map<std::string, double> out;
  for (std::size_t i = 0; i < n; ++i) {
    long reach = 0, sum = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && d[i][j] < inf) {
        ++reach;
        sum += d[i][j];
      }
    out[ids[i]] = reach == 0 ? 0.0 : static_cast<double>(reach) / static_cast<double>(sum);
  }
  return out;
}

}  // namespace oracle
