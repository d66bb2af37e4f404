#pragma once

// Synthetic trial data with known generating parameters. Normal draws use
// Box-Muller over the raw engine output so datasets are identical across
// standard library implementations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "reverie/stats/dataset.hpp"

namespace reverie::stats {

class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53; }
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double a = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }
  double operator()(double mean, double sd) { return mean + sd * (*this)(); }
  int below(int n) { return static_cast<int>(uniform() * n); }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// vas = b0 + b1 group + b2 day + b3 group*day + u_i + e_ij.
struct VasModel {
  std::array<double, 4> beta{8.4, 0.1, -0.13, -0.12};
  double sigma_u = 0.5;
  double sigma_e = 0.4;
  int per_group = 10;
  int days = 14;
  bool clamp = false;  // clip to the 0..10 scale
};

struct VasSample {
  std::vector<VasRecord> records;
  std::map<std::string, int> group;
};

inline std::string participant_id(int group, int k) {
  std::string n = std::to_string(k + 1);
  if (n.size() < 2) n = "0" + n;
  return (group == 1 ? "I" : "C") + n;
}

inline VasSample simulate_vas(Gaussian& g, const VasModel& m) {
  VasSample s;
  for (int grp : {1, 0}) {
    for (int k = 0; k < m.per_group; ++k) {
      const std::string id = participant_id(grp, k);
      s.group[id] = grp;
      const double u = g(0.0, m.sigma_u);
      for (int day = 1; day <= m.days; ++day) {
        double v = m.beta[0] + m.beta[1] * grp + m.beta[2] * day + m.beta[3] * grp * day + u + g(0.0, m.sigma_e);
        if (m.clamp) v = std::clamp(v, 0.0, 10.0);
        s.records.push_back({id, day, v});
      }
    }
  }
  return s;
}

/// Day-1 and day-14 group means for the daily rating; converted to the
/// linear model above.
struct VasTrend {
  double control_first = 8.4, control_last = 6.5;
  double intervention_first = 8.3, intervention_last = 5.1;
  double sigma_u = 0.8, sigma_e = 0.9;

  VasModel model(int per_group = 10) const {
    VasModel m;
    const double cs = (control_last - control_first) / 13.0;
    const double is = (intervention_last - intervention_first) / 13.0;
    m.beta = {control_first - cs, (intervention_first - is) - (control_first - cs), cs, is - cs};
    m.sigma_u = sigma_u;
    m.sigma_e = sigma_e;
    m.per_group = per_group;
    m.clamp = true;
    return m;
  }
};

/// Pre/post perceived-stress totals per group, with correlation rho
/// between a participant's two scores.
struct PssCalibration {
  double int_t0_mean = 28.9, int_t0_sd = 3.25, int_t2_mean = 25.8, int_t2_sd = 2.44;
  double ctl_t0_mean = 29.2, ctl_t0_sd = 3.97, ctl_t2_mean = 28.6, ctl_t2_sd = 3.24;
  double rho = 0.7;
  int per_group = 10;
};

struct PssSample {
  std::vector<double> t0, t2;
  std::vector<int> group;
};

inline PssSample simulate_pss(Gaussian& g, const PssCalibration& c) {
  PssSample s;
  for (int grp : {1, 0}) {
    const double m0 = grp ? c.int_t0_mean : c.ctl_t0_mean, s0 = grp ? c.int_t0_sd : c.ctl_t0_sd;
    const double m2 = grp ? c.int_t2_mean : c.ctl_t2_mean, s2 = grp ? c.int_t2_sd : c.ctl_t2_sd;
    for (int k = 0; k < c.per_group; ++k) {
      const double z0 = g();
      const double z2 = c.rho * z0 + std::sqrt(1.0 - c.rho * c.rho) * g();
      s.t0.push_back(m0 + s0 * z0);
      s.t2.push_back(m2 + s2 * z2);
      s.group.push_back(grp);
    }
  }
  return s;
}

namespace detail {

inline int likert(Gaussian& g, double mean, double sd, int lo, int hi) {
  return std::clamp(static_cast<int>(std::lround(g(mean, sd))), lo, hi);
}

// Item responses whose scored total equals `total`.
inline std::vector<int> pss_items_for_total(Gaussian& g, int total) {
  total = std::clamp(total, 0, 40);
  std::array<int, 10> contrib{};
  for (int unit = 0; unit < total; ++unit) {
    int k = g.below(10);
    while (contrib[static_cast<std::size_t>(k)] == 4) k = (k + 1) % 10;
    ++contrib[static_cast<std::size_t>(k)];
  }
  std::vector<int> items(10);
  for (int i = 1; i <= 10; ++i) {
    const bool reversed = std::find(kPssReversed.begin(), kPssReversed.end(), i) != kPssReversed.end();
    const int c = contrib[static_cast<std::size_t>(i - 1)];
    items[static_cast<std::size_t>(i - 1)] = reversed ? 4 - c : c;
  }
  return items;
}

}  // namespace detail

struct TrialCalibration {
  PssCalibration pss;
  VasTrend vas;
  int per_group = 10;
};

inline TrialDataset generate_trial_dataset(std::uint64_t seed, const TrialCalibration& cal = {}) {
  Gaussian g(seed);
  TrialDataset ds;
  PssCalibration pc = cal.pss;
  pc.per_group = cal.per_group;
  const auto pss = simulate_pss(g, pc);
  const auto vas = simulate_vas(g, cal.vas.model(cal.per_group));

  static const std::array<double, 10> sus_means{3.8, 2.2, 3.7, 1.6, 3.6, 1.9, 3.0, 1.5, 3.3, 1.6};
  static const std::array<double, 5> paesis_means{4.0, 3.5, 4.4, 3.7, 2.9};
  // Adaptive CERQ strategies drift up after the intervention, the others down.
  static const std::array<double, 9> cerq_shift{-0.3, 0.3, -0.3, 0.3, 0.4, 0.4, 0.3, -0.4, -0.2};

  std::size_t row = 0;
  for (int grp : {1, 0}) {
    for (int k = 0; k < cal.per_group; ++k, ++row) {
      const std::string id = participant_id(grp, k);
      const double age = std::round(g(grp ? 21.9 : 21.8, grp ? 1.79 : 1.98));
      ds.participants.push_back({id, grp ? "intervention" : "control", age, k % 2 == 0 ? "female" : "male"});

      auto add = [&](const char* tp, const char* inst, std::vector<int> items) {
        ds.scale_responses.push_back({id, tp, inst, std::move(items)});
      };
      add("T0", "pss10", detail::pss_items_for_total(g, static_cast<int>(std::lround(pss.t0[row]))));
      add("T2", "pss10", detail::pss_items_for_total(g, static_cast<int>(std::lround(pss.t2[row]))));

      std::vector<double> person(9);
      for (auto& p : person) p = g(3.0, 0.6);
      for (const char* tp : {"T0", "T2"}) {
        std::vector<int> items;
        const bool post = tp[1] == '2';
        for (std::size_t sub = 0; sub < 9; ++sub) {
          const double shift = post ? (grp ? cerq_shift[sub] : 0.2 * cerq_shift[sub]) : 0.0;
          for (int i = 0; i < 4; ++i) items.push_back(detail::likert(g, person[sub] + shift, 0.7, 1, 5));
        }
        add(tp, "cerq", std::move(items));
      }

      if (grp == 1) {
        std::vector<int> geq;
        for (int i = 1; i <= 33; ++i) {
          const bool negative = i == 7 || i == 8 || i == 9 || i == 16 || i == 22 || i == 24 || i == 29;
          geq.push_back(detail::likert(g, negative ? 0.9 : 2.6, 0.8, 0, 4));
        }
        add("T2", "geq", std::move(geq));
        std::vector<int> sus;
        for (double m : sus_means) sus.push_back(detail::likert(g, m, 0.7, 1, 5));
        add("T2", "sus", std::move(sus));
        const double rater = g(0.0, 0.5);
        std::vector<int> paesis;
        for (double m : paesis_means) paesis.push_back(detail::likert(g, m + rater, 0.5, 1, 5));
        add("T2", "paesis", std::move(paesis));
      }
    }
  }
  ds.vas_records = vas.records;
  for (auto& v : ds.vas_records) v.vas = std::round(v.vas * 10.0) / 10.0;

  std::sort(ds.scale_responses.begin(), ds.scale_responses.end(), [](const auto& a, const auto& b) {
    return std::tie(a.id, a.timepoint, a.instrument) < std::tie(b.id, b.timepoint, b.instrument);
  });
  return ds;
}

}  // namespace reverie::stats
