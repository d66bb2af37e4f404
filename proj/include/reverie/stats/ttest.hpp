#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "reverie/stats/distributions.hpp"

namespace reverie::stats {

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
  double mean_difference = 0.0;
  bool operator==(const TTestResult&) const = default;
};

struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double var = 0.0;  // n-1 divisor
};

inline Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = static_cast<double>(v.size());
  if (v.empty()) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / m.n;
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.var = ss / (m.n - 1.0);
  return m;
}

namespace detail {

// Variance that is only rounding noise around a constant counts as zero.
inline bool negligible_variance(const std::vector<double>& v, double var) {
  double scale = 1.0;
  for (double x : v) scale = std::max(scale, std::fabs(x));
  return var <= (1e-13 * scale) * (1e-13 * scale);
}

}  // namespace detail

inline TTestResult paired_t_test(const std::vector<double>& pre, const std::vector<double>& post) {
  if (pre.size() != post.size()) throw std::invalid_argument("paired samples must have equal length");
  if (pre.size() < 2) throw DegenerateData("paired t-test needs at least 2 pairs");
  std::vector<double> d(pre.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = post[i] - pre[i];
  const Moments m = moments(d);
  if (detail::negligible_variance(d, m.var)) throw DegenerateData("differences have zero variance");
  TTestResult r;
  r.mean_difference = m.mean;
  r.dof = m.n - 1.0;
  r.t = m.mean / std::sqrt(m.var / m.n);
  r.p = t_two_tailed_p(r.t, r.dof);
  return r;
}

/// Welch's unequal-variance t-test, a minus b.
inline TTestResult two_sample_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw DegenerateData("each sample needs at least 2 observations");
  const Moments ma = moments(a), mb = moments(b);
  const double va = detail::negligible_variance(a, ma.var) ? 0.0 : ma.var / ma.n;
  const double vb = detail::negligible_variance(b, mb.var) ? 0.0 : mb.var / mb.n;
  if (va + vb == 0.0) throw DegenerateData("both samples are constant");
  TTestResult r;
  r.mean_difference = ma.mean - mb.mean;
  r.t = r.mean_difference / std::sqrt(va + vb);
  r.dof = (va + vb) * (va + vb) / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
  r.p = t_two_tailed_p(r.t, r.dof);
  return r;
}

}  // namespace reverie::stats
