#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "facihub/error.hpp"
#include "facihub/stats/core.hpp"

namespace facihub::stats {

struct ShapiroWilkResult {
  double w = 1.0;
  double p_value = 1.0;
};

namespace detail {

// Horner evaluation of cc[0] + cc[1] x + ... (Royston's poly()).
inline double poly(std::span<const double> cc, double x) {
  double result = 0.0;
  for (auto it = cc.rbegin(); it != cc.rend(); ++it) result = result * x + *it;
  return result;
}

}  // namespace detail

/// Shapiro-Wilk W with Royston's (1995) coefficient and p-value
/// approximations. Valid for 3 <= n <= 5000.
inline ShapiroWilkResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3) fail(ErrorCode::sample_size, "Shapiro-Wilk needs at least 3 values");
  if (n > 5000) fail(ErrorCode::sample_size, "Shapiro-Wilk supports at most 5000 values");

  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 1e-19 * std::max(1.0, std::abs(x.front())))) fail(ErrorCode::degenerate, "constant sample");

  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};

  const double an = static_cast<double>(n);
  const std::size_t half = n / 2;
  // Coefficients for the lower half; the upper half mirrors them with the
  // opposite sign.
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = detail::poly(c1, rsn) - m[0] / ssumm2;
    std::size_t first;
    double fac;
    if (n > 5) {
      first = 2;
      const double a2 = -m[1] / ssumm2 + detail::poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
    } else {
      first = 1;
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first; i < half; ++i) a[i] = -m[i] / fac;
  }

  const double xbar = mean(x);
  double ssq = 0.0;
  for (double v : x) ssq += (v - xbar) * (v - xbar);
  double num = 0.0;
  for (std::size_t i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  double w = num * num / ssq;
  w = std::min(w, 1.0);

  ShapiroWilkResult result;
  result.w = w;
  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;   // 6 / pi
    constexpr double stqr = 1.04719755119660;  // pi / 3
    result.p_value = std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr));
    return result;
  }
  const double w1 = std::log(1.0 - w);
  double mu, sigma, y;
  if (n <= 11) {
    const double gamma = detail::poly(g, an);
    if (w1 >= gamma) {
      result.p_value = 1e-99;
      return result;
    }
    y = -std::log(gamma - w1);
    mu = detail::poly(c3, an);
    sigma = std::exp(detail::poly(c4, an));
  } else {
    const double ln_n = std::log(an);
    mu = detail::poly(c5, ln_n);
    sigma = std::exp(detail::poly(c6, ln_n));
    y = w1;
  }
  result.p_value = clamp_p(normal_sf((y - mu) / sigma));
  return result;
}

}  // namespace facihub::stats
