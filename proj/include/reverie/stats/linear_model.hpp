#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "reverie/stats/distributions.hpp"

namespace reverie::stats {

struct VarianceComponents {
  double sigma2_u = 0.0;
  double sigma2_e = 0.0;
  bool operator==(const VarianceComponents&) const = default;
};

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> coefficients;
  std::vector<double> standard_errors;
  std::vector<double> test_statistics;
  std::vector<double> p_values;
  double dof = 0.0;         // residual dof for t inference; 0 when Wald z is used
  std::string inference;    // "t" or "wald-z (normal approximation)"
  double rss = 0.0;
  double sigma2 = 0.0;
  std::optional<double> log_likelihood;
  std::optional<VarianceComponents> variance_components;

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    throw std::out_of_range("no coefficient named " + name);
  }
  double coef(const std::string& name) const { return coefficients[index_of(name)]; }
  double se(const std::string& name) const { return standard_errors[index_of(name)]; }
  double p(const std::string& name) const { return p_values[index_of(name)]; }

  bool operator==(const FitResult&) const = default;
};

inline void to_json(nlohmann::json& j, const FitResult& f) {
  j = {{"names", f.names},
       {"coefficients", f.coefficients},
       {"standard_errors", f.standard_errors},
       {"test_statistics", f.test_statistics},
       {"p_values", f.p_values},
       {"dof", f.dof},
       {"inference", f.inference},
       {"rss", f.rss},
       {"sigma2", f.sigma2}};
  j["log_likelihood"] = f.log_likelihood ? nlohmann::json(*f.log_likelihood) : nlohmann::json();
  if (f.variance_components) {
    j["variance_components"] = {{"sigma2_u", f.variance_components->sigma2_u},
                                {"sigma2_e", f.variance_components->sigma2_e}};
  } else {
    j["variance_components"] = nullptr;
  }
}

inline void from_json(const nlohmann::json& j, FitResult& f) {
  j.at("names").get_to(f.names);
  j.at("coefficients").get_to(f.coefficients);
  j.at("standard_errors").get_to(f.standard_errors);
  j.at("test_statistics").get_to(f.test_statistics);
  j.at("p_values").get_to(f.p_values);
  j.at("dof").get_to(f.dof);
  j.at("inference").get_to(f.inference);
  j.at("rss").get_to(f.rss);
  j.at("sigma2").get_to(f.sigma2);
  f.log_likelihood.reset();
  if (!j.at("log_likelihood").is_null()) f.log_likelihood = j.at("log_likelihood").get<double>();
  f.variance_components.reset();
  if (const auto& vc = j.at("variance_components"); !vc.is_null()) {
    f.variance_components = VarianceComponents{vc.at("sigma2_u").get<double>(), vc.at("sigma2_e").get<double>()};
  }
}

namespace detail {

// Fills test statistics and p-values from coefficients and SEs. A perfect
// fit leaves zero SEs: the statistic is then infinite (or 0 for a zero
// coefficient) rather than NaN.
inline void finish_tests(FitResult& f, bool wald) {
  const std::size_t p = f.coefficients.size();
  f.test_statistics.assign(p, 0.0);
  f.p_values.assign(p, 1.0);
  for (std::size_t k = 0; k < p; ++k) {
    const double b = f.coefficients[k];
    const double s = f.standard_errors[k];
    double stat = 0.0;
    if (s > 0.0) {
      stat = b / s;
    } else if (b != 0.0) {
      stat = b > 0 ? INFINITY : -INFINITY;
    }
    f.test_statistics[k] = stat;
    f.p_values[k] = wald ? z_two_tailed_p(stat) : t_two_tailed_p(stat, f.dof);
  }
}

inline std::vector<std::string> default_names(Eigen::Index p) {
  std::vector<std::string> names;
  for (Eigen::Index k = 0; k < p; ++k) names.push_back("x" + std::to_string(k));
  return names;
}

}  // namespace detail

/// Ordinary least squares via column-pivoted QR. Standard errors use
/// RSS/(n-p); p-values are two-tailed t with n-p dof.
inline FitResult ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> names = {}) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) throw std::invalid_argument("design and response lengths differ");
  if (p == 0) throw std::invalid_argument("design has no columns");
  if (n <= p) throw TooFewRows("need more rows than columns (n=" + std::to_string(n) + ", p=" + std::to_string(p) + ")");
  if (names.empty()) names = detail::default_names(p);
  if (static_cast<Eigen::Index>(names.size()) != p) throw std::invalid_argument("one name per column required");

  // Scale columns so the rank threshold is independent of units.
  Eigen::VectorXd scale = X.colwise().norm().transpose();
  for (Eigen::Index k = 0; k < p; ++k) {
    if (scale(k) == 0.0) throw RankDeficient("design column '" + names[static_cast<std::size_t>(k)] + "' is all zero");
  }
  const Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw RankDeficient("design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " < " + std::to_string(p) + ")");

  const Eigen::VectorXd beta_s = qr.solve(y);
  const Eigen::VectorXd resid = y - Xs * beta_s;

  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const auto& P = qr.colsPermutation();
  const Eigen::MatrixXd unscaled_cov_s = P * (Rinv * Rinv.transpose()) * P.transpose();

  FitResult f;
  f.names = std::move(names);
  f.inference = "t";
  f.dof = static_cast<double>(n - p);
  f.rss = resid.squaredNorm();
  f.sigma2 = f.rss / f.dof;
  f.coefficients.resize(static_cast<std::size_t>(p));
  f.standard_errors.resize(static_cast<std::size_t>(p));
  for (Eigen::Index k = 0; k < p; ++k) {
    f.coefficients[static_cast<std::size_t>(k)] = beta_s(k) / scale(k);
    f.standard_errors[static_cast<std::size_t>(k)] = std::sqrt(f.sigma2 * unscaled_cov_s(k, k)) / scale(k);
  }
  detail::finish_tests(f, false);
  return f;
}

/// Residuals y - X*beta for a fitted coefficient vector.
inline Eigen::VectorXd residuals(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FitResult& f) {
  return y - X * Eigen::Map<const Eigen::VectorXd>(f.coefficients.data(), static_cast<Eigen::Index>(f.coefficients.size()));
}

/// Post score on group indicator with the baseline score as covariate.
inline FitResult ancova(const std::vector<double>& t2, const std::vector<int>& group, const std::vector<double>& t0) {
  const std::size_t n = t2.size();
  if (group.size() != n || t0.size() != n) throw std::invalid_argument("ancova inputs must be aligned");
  if (n < 4) throw TooFewRows("ancova needs at least 4 observations");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (group[i] != 0 && group[i] != 1) throw std::invalid_argument("group indicator must be 0 or 1");
    const auto r = static_cast<Eigen::Index>(i);
    X(r, 0) = 1.0;
    X(r, 1) = group[i];
    X(r, 2) = t0[i];
    y(r) = t2[i];
  }
  return ols_fit(X, y, {"intercept", "group", "baseline"});
}

}  // namespace reverie::stats
