#pragma once

// Random-intercept linear mixed model fitted by maximum likelihood.
//
// With theta = s2u / s2e each cluster's covariance is s2e * (I + theta J),
// whose inverse and determinant are closed-form:
//   (I + theta J)^-1 = I - theta / (1 + n theta) J,   det = 1 + n theta.
// For fixed theta, beta is the GLS solution and s2e = RSS_theta / N, which
// leaves a one-dimensional profile likelihood in theta.

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reverie/stats/linear_model.hpp"

namespace reverie::stats {

inline constexpr double kThetaMin = 1e-8;
inline constexpr double kThetaMax = 1e4;

struct ClusteredData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<int> cluster;  // cluster index per row, 0..m-1
  std::vector<std::string> names;
};

struct ProfilePoint {
  double theta = 0.0;
  double log_likelihood = 0.0;
  double sigma2_e = 0.0;
  Eigen::VectorXd beta;
  Eigen::MatrixXd xtvx;  // X' V^-1 X with V scaled so that s2e = 1
};

namespace detail {

struct ClusterIndex {
  std::vector<std::vector<Eigen::Index>> rows;
};

inline ClusterIndex index_clusters(const ClusteredData& d) {
  if (static_cast<Eigen::Index>(d.cluster.size()) != d.y.size() || d.X.rows() != d.y.size()) {
    throw std::invalid_argument("clustered data lengths differ");
  }
  ClusterIndex ci;
  for (std::size_t r = 0; r < d.cluster.size(); ++r) {
    const int c = d.cluster[r];
    if (c < 0) throw std::invalid_argument("negative cluster index");
    if (static_cast<std::size_t>(c) >= ci.rows.size()) ci.rows.resize(static_cast<std::size_t>(c) + 1);
    ci.rows[static_cast<std::size_t>(c)].push_back(static_cast<Eigen::Index>(r));
  }
  return ci;
}

inline ProfilePoint profile_at(const ClusteredData& d, const ClusterIndex& ci, double theta) {
  const Eigen::Index p = d.X.cols();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  double logdet = 0.0;
  for (const auto& rows : ci.rows) {
    if (rows.empty()) continue;
    const double n = static_cast<double>(rows.size());
    const double c = theta / (1.0 + n * theta);
    Eigen::VectorXd sx = Eigen::VectorXd::Zero(p);
    double sy = 0.0;
    for (Eigen::Index r : rows) {
      A.noalias() += d.X.row(r).transpose() * d.X.row(r);
      b.noalias() += d.X.row(r).transpose() * d.y(r);
      sx += d.X.row(r).transpose();
      sy += d.y(r);
    }
    A.noalias() -= c * sx * sx.transpose();
    b.noalias() -= c * sx * sy;
    logdet += std::log1p(n * theta);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw SingularDesign("GLS normal matrix is not positive definite");
  ProfilePoint pt;
  pt.theta = theta;
  pt.beta = ldlt.solve(b);
  pt.xtvx = A;

  const Eigen::VectorXd resid = d.y - d.X * pt.beta;
  double rss = 0.0;
  for (const auto& rows : ci.rows) {
    if (rows.empty()) continue;
    const double n = static_cast<double>(rows.size());
    const double c = theta / (1.0 + n * theta);
    double s = 0.0, ss = 0.0;
    for (Eigen::Index r : rows) {
      s += resid(r);
      ss += resid(r) * resid(r);
    }
    rss += ss - c * s * s;
  }
  const double N = static_cast<double>(d.y.size());
  pt.sigma2_e = rss / N;
  if (!(pt.sigma2_e > 0.0)) throw SingularDesign("zero residual variance");
  pt.log_likelihood = -0.5 * N * (std::log(2.0 * std::numbers::pi) + std::log(pt.sigma2_e) + 1.0) - 0.5 * logdet;
  return pt;
}

}  // namespace detail

/// Profiled ML log-likelihood at a fixed variance ratio.
inline ProfilePoint lmm_profile(const ClusteredData& d, double theta) {
  if (!(theta >= 0.0)) throw std::invalid_argument("theta must be non-negative");
  return detail::profile_at(d, detail::index_clusters(d), theta);
}

inline FitResult fit_random_intercept(const ClusteredData& d) {
  const auto ci = detail::index_clusters(d);
  int clusters = 0;
  for (const auto& rows : ci.rows) clusters += rows.empty() ? 0 : 1;
  if (clusters < 2) throw TooFewGroups("need at least two participants");
  const Eigen::Index p = d.X.cols();
  if (d.y.size() <= p) throw SingularDesign("fewer observations than fixed effects");
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X * d.X.colwise().norm().cwiseMax(1e-300).cwiseInverse().asDiagonal());
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw SingularDesign("fixed-effect design is rank deficient");
  }

  auto ll = [&](double log_theta) { return detail::profile_at(d, ci, std::exp(log_theta)).log_likelihood; };

  // Coarse log-spaced scan to locate the basin, then golden section inside
  // the bracket around the best grid point.
  const double lo = std::log(kThetaMin), hi = std::log(kThetaMax);
  constexpr int kGrid = 49;
  std::vector<double> grid(kGrid), vals(kGrid);
  int best = 0;
  for (int k = 0; k < kGrid; ++k) {
    grid[k] = lo + (hi - lo) * k / (kGrid - 1);
    vals[k] = ll(grid[k]);
    if (vals[k] > vals[best]) best = k;
  }
  double a = grid[std::max(best - 1, 0)];
  double b = grid[std::min(best + 1, kGrid - 1)];
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = ll(x1), f2 = ll(x2);
  int iter = 0;
  // Width in log space approximates the relative tolerance on theta.
  while (b - a > 1e-8) {
    if (++iter > 500) throw NonConvergence("golden-section search did not converge");
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = ll(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = ll(x1);
    }
  }
  double log_theta = 0.5 * (a + b);
  double f = ll(log_theta);
  for (double cand : {grid[best], lo}) {
    const double fc = ll(cand);
    if (fc > f) {
      f = fc;
      log_theta = cand;
    }
  }
  if (hi - log_theta < 1e-6) throw NonConvergence("variance ratio ran into the upper bracket bound");

  const auto pt = detail::profile_at(d, ci, std::exp(log_theta));
  const Eigen::MatrixXd cov = pt.sigma2_e * pt.xtvx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));

  FitResult out;
  out.names = d.names.empty() ? detail::default_names(p) : d.names;
  out.inference = "wald-z (normal approximation)";
  out.dof = 0.0;
  out.coefficients.resize(static_cast<std::size_t>(p));
  out.standard_errors.resize(static_cast<std::size_t>(p));
  for (Eigen::Index k = 0; k < p; ++k) {
    out.coefficients[static_cast<std::size_t>(k)] = pt.beta(k);
    out.standard_errors[static_cast<std::size_t>(k)] = std::sqrt(cov(k, k));
  }
  out.rss = pt.sigma2_e * static_cast<double>(d.y.size());
  out.sigma2 = pt.sigma2_e;
  out.log_likelihood = pt.log_likelihood;
  out.variance_components = VarianceComponents{pt.theta * pt.sigma2_e, pt.sigma2_e};
  detail::finish_tests(out, true);
  return out;
}

struct VasRecord {
  std::string id;
  int day = 0;
  double vas = 0.0;
  bool operator==(const VasRecord&) const = default;
};

/// Builds the vas ~ group + day + group:day design with one cluster per id.
/// `group` maps id -> 1 (intervention) or 0 (control).
inline ClusteredData vas_design(const std::vector<VasRecord>& records, const std::map<std::string, int>& group) {
  ClusteredData d;
  const auto n = static_cast<Eigen::Index>(records.size());
  d.X.resize(n, 4);
  d.y.resize(n);
  d.names = {"intercept", "group", "day", "group:day"};
  std::map<std::string, int> cluster_of;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& rec = records[static_cast<std::size_t>(r)];
    auto g = group.find(rec.id);
    if (g == group.end()) throw std::invalid_argument("vas record for unknown participant " + rec.id);
    auto [it, inserted] = cluster_of.emplace(rec.id, static_cast<int>(cluster_of.size()));
    d.cluster.push_back(it->second);
    d.X(r, 0) = 1.0;
    d.X(r, 1) = g->second;
    d.X(r, 2) = rec.day;
    d.X(r, 3) = g->second * rec.day;
    d.y(r) = rec.vas;
  }
  return d;
}

inline FitResult fit_lmm_random_intercept(const std::vector<VasRecord>& records, const std::map<std::string, int>& group) {
  return fit_random_intercept(vas_design(records, group));
}

}  // namespace reverie::stats
