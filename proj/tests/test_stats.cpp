#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "reverie/stats/distributions.hpp"
#include "reverie/stats/linear_model.hpp"
#include "reverie/stats/lmm.hpp"
#include "reverie/stats/scales.hpp"
#include "reverie/stats/synthetic.hpp"
#include "reverie/stats/ttest.hpp"

using namespace reverie::stats;

namespace {

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const Eigen::MatrixXd& X) {
  Rows r(static_cast<std::size_t>(X.rows()), std::vector<double>(static_cast<std::size_t>(X.cols())));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) r[i][j] = X(i, j);
  return r;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

Design random_design(Gaussian& g, int n, int p) {
  Design d{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    d.X(i, 0) = 1.0;
    for (int j = 1; j < p; ++j) d.X(i, j) = g(0.0, 1.0 + j);
    d.y(i) = g(3.0, 2.0);
    for (int j = 1; j < p; ++j) d.y(i) += 0.5 * j * d.X(i, j);
  }
  return d;
}

ClusteredData clustered(Gaussian& g, const std::vector<int>& sizes, double sigma_u, double sigma_e) {
  ClusteredData d;
  int n = 0;
  for (int s : sizes) n += s;
  d.X.resize(n, 3);
  d.y.resize(n);
  int row = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const double u = g(0.0, sigma_u);
    const double grp = c % 2;
    for (int k = 0; k < sizes[c]; ++k, ++row) {
      d.X(row, 0) = 1.0;
      d.X(row, 1) = grp;
      d.X(row, 2) = k + 1;
      d.y(row) = 5.0 + 0.3 * grp - 0.2 * (k + 1) + u + g(0.0, sigma_e);
      d.cluster.push_back(static_cast<int>(c));
    }
  }
  return d;
}

double welch_dof_oracle(double va, double na, double vb, double nb) {
  const double a = va / na, b = vb / nb;
  return (a + b) * (a + b) / (a * a / (na - 1) + b * b / (nb - 1));
}

double sample_var(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= v.size();
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

double two_tailed_by_integration(double t, double v) { return 2.0 * (1.0 - oracle::t_cdf_by_integration(std::fabs(t), v)); }

}  // namespace

TEST(TDistribution, CdfMatchesNumericalIntegration) {
  for (double v : {1.0, 5.0, 30.0}) {
    for (double x = -6.0; x <= 6.0001; x += 0.25) {
      EXPECT_NEAR(t_cdf(x, v), oracle::t_cdf_by_integration(x, v), 1e-8) << "dof " << v << " x " << x;
    }
  }
}

TEST(TDistribution, SymmetryAndCentre) {
  for (double v : {1.0, 2.5, 7.0, 100.0}) {
    EXPECT_DOUBLE_EQ(t_cdf(0.0, v), 0.5);
    EXPECT_DOUBLE_EQ(t_two_tailed_p(0.0, v), 1.0);
    for (double x : {0.3, 1.7, 4.2}) EXPECT_NEAR(t_cdf(x, v) + t_cdf(-x, v), 1.0, 1e-14);
  }
  EXPECT_NEAR(t_two_tailed_p(2.228138851986, 10), 0.05, 1e-9);
  EXPECT_NEAR(z_two_tailed_p(1.959963984540), 0.05, 1e-11);
  EXPECT_NEAR(normal_cdf(-1.0), 0.158655253931457, 1e-14);
}

TEST(Ols, MatchesNormalEquationOracle) {
  Gaussian g(101);
  for (int rep = 0; rep < 100; ++rep) {
    const int p = 2 + rep % 4, n = p + 3 + rep % 17;
    const auto d = random_design(g, n, p);
    const auto f = ols_fit(d.X, d.y);
    const auto beta = oracle::normal_equation_solution(to_rows(d.X), to_vec(d.y));
    const auto r = d.y - d.X * Eigen::Map<const Eigen::VectorXd>(beta.data(), p);
    const double s2 = r.squaredNorm() / (n - p);
    const auto xtx = to_rows(d.X.transpose() * d.X);
    const auto inv = oracle::gauss_jordan_inverse(xtx);
    ASSERT_EQ(f.dof, n - p);
    for (int k = 0; k < p; ++k) {
      EXPECT_NEAR(f.coefficients[k], beta[k], 1e-8 * (1.0 + std::fabs(beta[k])));
      const double se = std::sqrt(s2 * inv[k][k]);
      EXPECT_NEAR(f.standard_errors[k], se, 1e-8 * se);
      EXPECT_NEAR(f.p_values[k], two_tailed_by_integration(beta[k] / se, n - p), 1e-7);
    }
    EXPECT_NEAR(f.rss, r.squaredNorm(), 1e-8 * (1.0 + r.squaredNorm()));
  }
}

TEST(Ols, ResidualsOrthogonalToDesign) {
  Gaussian g(7);
  for (int rep = 0; rep < 50; ++rep) {
    const auto d = random_design(g, 40, 5);
    const auto f = ols_fit(d.X, d.y);
    const Eigen::VectorXd xr = d.X.transpose() * residuals(d.X, d.y, f);
    EXPECT_LT(xr.cwiseAbs().maxCoeff(), 1e-9 * d.X.cwiseAbs().maxCoeff() * d.y.cwiseAbs().maxCoeff() * 40);
  }
}

TEST(Ols, DegenerateDesignsRejected) {
  Gaussian g(3);
  auto d = random_design(g, 10, 3);
  Eigen::MatrixXd dup(10, 4);
  dup << d.X, d.X.col(1) * 2.0;
  EXPECT_THROW(ols_fit(dup, d.y), RankDeficient);
  Eigen::MatrixXd zero = d.X;
  zero.col(2).setZero();
  EXPECT_THROW(ols_fit(zero, d.y), RankDeficient);
  EXPECT_THROW(ols_fit(d.X.topRows(3), d.y.head(3)), TooFewRows);
}

TEST(Ols, PerfectFitHasZeroErrors) {
  Eigen::MatrixXd X(5, 2);
  Eigen::VectorXd y(5);
  for (int i = 0; i < 5; ++i) {
    X(i, 0) = 1;
    X(i, 1) = i;
    y(i) = 2 + 3 * i;
  }
  const auto f = ols_fit(X, y);
  EXPECT_NEAR(f.coefficients[0], 2.0, 1e-12);
  EXPECT_NEAR(f.coefficients[1], 3.0, 1e-12);
  EXPECT_NEAR(f.rss, 0.0, 1e-20);
}

TEST(Ancova, RecoversPlantedEffectAndIsShiftInvariant) {
  Gaussian g(11);
  std::vector<double> t0, t2;
  std::vector<int> grp;
  for (int i = 0; i < 40; ++i) {
    grp.push_back(i % 2);
    t0.push_back(g(29.0, 3.5));
    t2.push_back(4.0 - 2.5 * grp.back() + 0.8 * t0.back() + g(0.0, 0.5));
  }
  const auto f = ancova(t2, grp, t0);
  EXPECT_EQ(f.names, (std::vector<std::string>{"intercept", "group", "baseline"}));
  EXPECT_NEAR(f.coef("group"), -2.5, 3 * f.se("group"));
  EXPECT_LT(f.p("group"), 1e-6);

  auto shifted_t2 = t2, shifted_t0 = t0;
  for (auto& v : shifted_t2) v += 10;
  for (auto& v : shifted_t0) v -= 7;
  const auto s = ancova(shifted_t2, grp, shifted_t0);
  EXPECT_NEAR(s.coef("group"), f.coef("group"), 1e-9);
  EXPECT_NEAR(s.coef("baseline"), f.coef("baseline"), 1e-9);
  EXPECT_NEAR(s.se("group"), f.se("group"), 1e-9);

  auto flipped = grp;
  for (auto& v : flipped) v = 1 - v;
  EXPECT_NEAR(ancova(t2, flipped, t0).coef("group"), -f.coef("group"), 1e-9);

  EXPECT_THROW(ancova({1, 2, 3}, {0, 1, 0}, {1, 2, 3}), TooFewRows);
  EXPECT_THROW(ancova({1, 2, 3, 4}, {0, 1, 2, 0}, {1, 2, 3, 5}), std::invalid_argument);
}

TEST(Lmm, ProfileMatchesDenseGaussianDensity) {
  Gaussian g(5);
  const auto d = clustered(g, {3, 5, 4, 6, 2, 5, 4, 3}, 0.7, 0.5);
  for (double theta : {0.0, 1e-6, 0.05, 0.5, 2.0, 30.0, 900.0}) {
    const auto pt = lmm_profile(d, theta);
    const double dense = oracle::dense_profile_loglik(d.X, d.y, d.cluster, theta);
    EXPECT_NEAR(pt.log_likelihood, dense, 1e-8 * std::fabs(dense)) << theta;
  }
}

TEST(Lmm, OptimumBeatsFineThetaGrid) {
  Gaussian g(8);
  for (int rep = 0; rep < 5; ++rep) {
    const auto d = clustered(g, {4, 6, 5, 5, 3, 6, 4, 5, 6, 4}, 0.4 + 0.2 * rep, 0.5);
    const auto f = fit_random_intercept(d);
    double best = -INFINITY;
    for (int i = 0; i < 1000; ++i) {
      const double theta = std::exp(std::log(kThetaMin) + (std::log(kThetaMax) - std::log(kThetaMin)) * i / 999.0);
      best = std::max(best, oracle::dense_profile_loglik(d.X, d.y, d.cluster, theta));
    }
    EXPECT_GE(*f.log_likelihood, best - 1e-6);
    ASSERT_TRUE(f.variance_components);
    EXPECT_GE(f.variance_components->sigma2_u, 0.0);
    EXPECT_EQ(f.inference, "wald-z (normal approximation)");
  }
}

TEST(Lmm, BalancedDesignMatchesOls) {
  Gaussian g(13);
  for (int rep = 0; rep < 10; ++rep) {
    const auto d = clustered(g, std::vector<int>(12, 7), 0.0, 0.6);
    const auto lmm = fit_random_intercept(d);
    const auto ols = ols_fit(d.X, d.y);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(lmm.coefficients[k], ols.coefficients[k], 1e-6);
  }
}

TEST(Lmm, ClusterVarianceShrinksWithoutClusterEffect) {
  Gaussian g(21);
  const auto d = clustered(g, std::vector<int>(200, 14), 0.0, 1.0);
  const auto f = fit_random_intercept(d);
  EXPECT_LT(f.variance_components->sigma2_u, 0.02);
  EXPECT_NEAR(f.variance_components->sigma2_e, 1.0, 0.06);
}

TEST(Lmm, RecoversPlantedVasEffects) {
  int covered = 0, detected = 0;
  const int seeds = 40;
  for (int seed = 0; seed < seeds; ++seed) {
    Gaussian g(1000 + seed);
    VasModel m;
    const auto s = simulate_vas(g, m);
    const auto f = fit_lmm_random_intercept(s.records, s.group);
    bool all = true;
    for (std::size_t k = 0; k < 4; ++k) all &= std::fabs(f.coefficients[k] - m.beta[k]) <= 3 * f.standard_errors[k];
    covered += all;
    detected += f.p("group:day") < 0.05 && f.coef("group:day") < 0;
  }
  EXPECT_GE(covered, seeds * 8 / 10);
  EXPECT_GE(detected, seeds * 8 / 10);
}

TEST(Lmm, InvalidInputsRejected) {
  Gaussian g(2);
  auto d = clustered(g, {6}, 0.5, 0.5);
  EXPECT_THROW(fit_random_intercept(d), TooFewGroups);
  d = clustered(g, {5, 5, 5}, 0.5, 0.5);
  d.X.col(1) = d.X.col(0);
  EXPECT_THROW(fit_random_intercept(d), SingularDesign);
  EXPECT_THROW(lmm_profile(d, -1.0), std::invalid_argument);

  // No within-person noise: the variance ratio runs off to the bound.
  auto flat = clustered(g, {4, 4, 4, 4, 4}, 1.0, 0.0);
  Eigen::MatrixXd intercept = Eigen::MatrixXd::Ones(flat.y.size(), 1);
  for (Eigen::Index r = 0; r < flat.y.size(); ++r) flat.y(r) = flat.cluster[r] * 1.5;
  flat.X = intercept;
  flat.names = {"intercept"};
  EXPECT_THROW(fit_random_intercept(flat), NonConvergence);
}

TEST(TTests, PairedMatchesFormula) {
  Gaussian g(31);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> pre, post, diff;
    const int n = 3 + rep % 20;
    for (int i = 0; i < n; ++i) {
      pre.push_back(g(29, 3));
      post.push_back(pre.back() + g(-1.5, 2));
      diff.push_back(post.back() - pre.back());
    }
    double mean = 0;
    for (double d : diff) mean += d;
    mean /= n;
    const double t = mean / std::sqrt(sample_var(diff) / n);
    const auto r = paired_t_test(pre, post);
    EXPECT_NEAR(r.t, t, 1e-10 * (1 + std::fabs(t)));
    EXPECT_EQ(r.dof, n - 1);
    EXPECT_NEAR(r.mean_difference, mean, 1e-10);
    EXPECT_NEAR(r.p, two_tailed_by_integration(t, n - 1), 1e-8);
  }
}

TEST(TTests, WelchMatchesFormula) {
  Gaussian g(37);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a, b;
    for (int i = 0; i < 4 + rep % 9; ++i) a.push_back(g(5, 1 + rep % 3));
    for (int i = 0; i < 3 + rep % 13; ++i) b.push_back(g(6, 0.5));
    double ma = 0, mb = 0;
    for (double x : a) ma += x;
    for (double x : b) mb += x;
    ma /= a.size();
    mb /= b.size();
    const double va = sample_var(a), vb = sample_var(b);
    const double t = (ma - mb) / std::sqrt(va / a.size() + vb / b.size());
    const double dof = welch_dof_oracle(va, a.size(), vb, b.size());
    const auto r = two_sample_t_test(a, b);
    EXPECT_NEAR(r.t, t, 1e-10 * (1 + std::fabs(t)));
    EXPECT_NEAR(r.dof, dof, 1e-10 * dof);
    EXPECT_NEAR(r.p, two_tailed_by_integration(t, dof), 1e-8);
  }
}

TEST(TTests, DegenerateSamplesRejected) {
  EXPECT_THROW(paired_t_test({1, 2, 3}, {2, 3, 4}), DegenerateData);
  EXPECT_THROW(paired_t_test({1}, {2}), DegenerateData);
  EXPECT_THROW(paired_t_test({1, 2}, {1}), std::invalid_argument);
  EXPECT_THROW(two_sample_t_test({2, 2, 2}, {5, 5}), DegenerateData);
  EXPECT_THROW(two_sample_t_test({2}, {5, 6}), DegenerateData);
  EXPECT_NO_THROW(two_sample_t_test({2, 2, 2}, {5, 6}));
}

TEST(Scales, Pss10ReverseScoring) {
  EXPECT_EQ(score_pss10({2, 2, 2, 2, 2, 2, 2, 2, 2, 2}), 20);
  EXPECT_EQ(score_pss10({4, 0, 4, 0, 0, 4, 0, 0, 4, 4}), 36);
  EXPECT_EQ(score_pss10({0, 0, 0, 4, 4, 0, 4, 4, 0, 0}), 0);
  EXPECT_EQ(score_pss10({4, 4, 4, 0, 0, 4, 0, 0, 4, 4}), 40);
  EXPECT_THROW(score_pss10({2, 2, 2}), WrongItemCount);
  EXPECT_THROW(score_pss10({2, 2, 2, 2, 5, 2, 2, 2, 2, 2}), OutOfRange);
}

TEST(Scales, CerqBlocksAndPermutationInvariance) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<int> items(36);
    for (auto& v : items) v = 1 + static_cast<int>(rng() % 5);
    const auto s = score_cerq(items);
    for (int sub = 0; sub < 9; ++sub) {
      EXPECT_EQ(s[sub], items[4 * sub] + items[4 * sub + 1] + items[4 * sub + 2] + items[4 * sub + 3]);
      EXPECT_GE(s[sub], 4);
      EXPECT_LE(s[sub], 20);
    }
    auto permuted = items;
    for (int sub = 0; sub < 9; ++sub) std::shuffle(permuted.begin() + 4 * sub, permuted.begin() + 4 * sub + 4, rng);
    EXPECT_EQ(score_cerq(permuted), s);
  }
  EXPECT_THROW(score_cerq(std::vector<int>(36, 0)), OutOfRange);
}

TEST(Scales, GeqKeyCoversEveryItemOnce) {
  std::vector<int> seen(34, 0);
  for (const auto& dim : geq_key())
    for (int i : dim.items) ++seen[i];
  for (int i = 1; i <= 33; ++i) EXPECT_EQ(seen[i], 1) << i;
  std::vector<int> items(33);
  for (int i = 0; i < 33; ++i) items[i] = i % 5;
  const auto s = score_geq(items);
  EXPECT_DOUBLE_EQ(s[3], ((22 - 1) % 5 + (24 - 1) % 5 + (29 - 1) % 5) / 3.0);  // tension
}

TEST(Scales, SusExtremesAndSubscales) {
  const auto best = score_sus({5, 1, 5, 1, 5, 1, 5, 1, 5, 1});
  EXPECT_EQ(best, (SusScore{100, 100, 100}));
  const auto worst = score_sus({1, 5, 1, 5, 1, 5, 1, 5, 1, 5});
  EXPECT_EQ(worst, (SusScore{0, 0, 0}));
  const auto mid = score_sus({3, 3, 3, 3, 3, 3, 3, 3, 3, 3});
  EXPECT_EQ(mid.total, 50.0);
  EXPECT_EQ(mid.learnability, 50.0);
  const auto c = sus_contributions({4, 2, 5, 1, 4, 2, 4, 1, 5, 3});
  EXPECT_EQ(c, (std::array<double, 10>{3, 3, 4, 4, 3, 3, 3, 4, 4, 2}));
}

TEST(Scales, SusFromReportedMeanContributions) {
  const auto s = sus_from_contributions({3.8, 2.2, 3.7, 1.6, 3.6, 1.9, 3.0, 1.5, 3.3, 1.6});
  EXPECT_NEAR(s.usability, 71.875, 1e-9);
  EXPECT_NEAR(s.learnability, 40.0, 1e-9);
  EXPECT_NEAR(s.total, 65.5, 1e-9);
}

TEST(Scales, InstrumentDispatch) {
  EXPECT_EQ(score_instrument("paesis", {5, 4, 4, 3, 5}).at("total"), 21);
  EXPECT_EQ(score_instrument("cerq", std::vector<int>(36, 2)).at("catastrophizing"), 8);
  EXPECT_EQ(score_instrument("sus", {3, 3, 3, 3, 3, 3, 3, 3, 3, 3}).size(), 3u);
  EXPECT_THROW(score_instrument("bdi", {1}), std::invalid_argument);
}

TEST(CronbachAlpha, KnownValues) {
  Eigen::MatrixXd m(5, 3);
  m << 1, 2, 2,
       2, 2, 3,
       3, 4, 3,
       4, 4, 5,
       5, 5, 5;
  // Item variances 2.5, 1.8, 1.8; total variance 17 (hand computed).
  EXPECT_NEAR(cronbach_alpha(m), 1.5 * (1.0 - 6.1 / 17.0), 1e-12);
}

TEST(CronbachAlpha, DuplicatedItemsGiveOne) {
  Gaussian g(9);
  for (int k : {2, 4, 8}) {
    Eigen::MatrixXd m(30, k);
    for (int i = 0; i < 30; ++i) {
      const double v = g(3, 1);
      m.row(i).setConstant(v);
    }
    EXPECT_EQ(cronbach_alpha(m), 1.0) << k;
  }
  Eigen::MatrixXd m3(30, 3);
  for (int i = 0; i < 30; ++i) m3.row(i).setConstant(g(3, 1));
  EXPECT_NEAR(cronbach_alpha(m3), 1.0, 1e-12);
}

TEST(CronbachAlpha, IndependentItemsNearZero) {
  Gaussian g(10);
  Eigen::MatrixXd m(5000, 6);
  for (int i = 0; i < 5000; ++i)
    for (int j = 0; j < 6; ++j) m(i, j) = g();
  EXPECT_LT(std::fabs(cronbach_alpha(m)), 0.05);
  EXPECT_THROW(cronbach_alpha(Eigen::MatrixXd::Ones(5, 3)), DegenerateData);
  EXPECT_THROW(cronbach_alpha(Eigen::MatrixXd::Ones(5, 1)), DegenerateData);
}

TEST(FitResultJson, RoundTrip) {
  Gaussian g(12);
  const auto d = random_design(g, 20, 3);
  const auto f = ols_fit(d.X, d.y, {"a", "b", "c"});
  nlohmann::json j = f;
  const auto back = j.get<FitResult>();
  EXPECT_EQ(back.names, f.names);
  EXPECT_EQ(back.coefficients, f.coefficients);
  EXPECT_EQ(back.p_values, f.p_values);
  EXPECT_THROW(f.coef("missing"), std::out_of_range);
}
