#pragma once

// End-to-end trial analysis: descriptives, baseline comparability, ANCOVA
// on perceived stress, mixed model on daily ratings, regulation-strategy
// change comparisons and the experience questionnaires.

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reverie/stats/dataset.hpp"
#include "reverie/stats/lmm.hpp"
#include "reverie/stats/ttest.hpp"

namespace reverie::stats {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TTestResult, t, dof, p, mean_difference)

struct Descriptive {
  std::string instrument, measure, group, timepoint;
  int n = 0;
  double mean = 0.0, sd = 0.0;
  bool operator==(const Descriptive&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Descriptive, instrument, measure, group, timepoint, n, mean, sd)

/// Intervention vs control on one measure (Welch).
struct Comparison {
  std::string measure;
  double mean_intervention = 0.0, mean_control = 0.0;
  bool computed = false;
  std::string note;
  TTestResult test;
  bool significant = false;
  bool operator==(const Comparison&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Comparison, measure, mean_intervention, mean_control, computed, note, test, significant)

struct PairedComparison {
  std::string group;
  int n = 0;
  double mean_t0 = 0.0, mean_t2 = 0.0;
  bool computed = false;
  std::string note;
  TTestResult test;
  bool significant = false;
  bool operator==(const PairedComparison&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PairedComparison, group, n, mean_t0, mean_t2, computed, note, test, significant)

struct FitSection {
  bool skipped = true;
  std::string reason;
  int observations = 0;
  FitResult fit;
  std::string effect;  // coefficient of interest
  bool significant = false;
  bool operator==(const FitSection&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FitSection, skipped, reason, observations, fit, effect, significant)

struct ItemSummary {
  std::vector<double> means, sds;
  double total_mean = 0.0, total_sd = 0.0;
  bool operator==(const ItemSummary&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ItemSummary, means, sds, total_mean, total_sd)

struct AlphaSection {
  bool skipped = true;
  std::string reason;
  int persons = 0;
  double alpha = 0.0;
  ItemSummary items;
  bool operator==(const AlphaSection&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AlphaSection, skipped, reason, persons, alpha, items)

struct SusSection {
  bool skipped = true;
  int n = 0;
  ItemSummary raw_items;
  std::vector<double> contribution_means;
  double total_min = 0.0, total_max = 0.0, total_median = 0.0;
  double usability = 0.0, learnability = 0.0;  // from mean contributions
  bool operator==(const SusSection&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SusSection, skipped, n, raw_items, contribution_means, total_min, total_max,
                                   total_median, usability, learnability)

struct AnalysisReport {
  double alpha_level = 0.05;
  int participants = 0;
  int intervention_n = 0, control_n = 0;
  std::vector<Descriptive> descriptives;
  std::vector<Comparison> baseline;
  FitSection pss_ancova;
  std::vector<PairedComparison> pss_paired;
  FitSection vas_lmm;
  std::vector<Comparison> cerq_change;
  AlphaSection paesis;
  SusSection sus;
  bool operator==(const AnalysisReport&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AnalysisReport, alpha_level, participants, intervention_n, control_n, descriptives,
                                   baseline, pss_ancova, pss_paired, vas_lmm, cerq_change, paesis, sus)

namespace detail {

inline double sd_of(const std::vector<double>& v) { return v.size() < 2 ? 0.0 : std::sqrt(moments(v).var); }

inline ItemSummary summarize_items(const std::vector<std::vector<int>>& rows) {
  ItemSummary s;
  if (rows.empty()) return s;
  const std::size_t k = rows.front().size();
  std::vector<double> totals;
  for (const auto& r : rows) {
    double t = 0.0;
    for (int v : r) t += v;
    totals.push_back(t);
  }
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> col;
    for (const auto& r : rows) col.push_back(r[j]);
    s.means.push_back(moments(col).mean);
    s.sds.push_back(sd_of(col));
  }
  s.total_mean = moments(totals).mean;
  s.total_sd = sd_of(totals);
  return s;
}

inline Comparison compare(const std::string& measure, const std::vector<double>& a, const std::vector<double>& b,
                          double alpha) {
  Comparison c;
  c.measure = measure;
  c.mean_intervention = moments(a).mean;
  c.mean_control = moments(b).mean;
  try {
    c.test = two_sample_t_test(a, b);
    c.computed = true;
    c.significant = c.test.p < alpha;
  } catch (const StatsError& e) {
    c.note = e.what();
  }
  return c;
}

}  // namespace detail

inline AnalysisReport analyze_trial(const TrialDataset& ds, double alpha = 0.05) {
  validate(ds);
  AnalysisReport rep;
  rep.alpha_level = alpha;
  rep.participants = static_cast<int>(ds.participants.size());
  const auto groups = ds.group_indicator();
  for (const auto& [id, g] : groups) (g ? rep.intervention_n : rep.control_n)++;

  // Descriptives for every scored measure.
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::vector<double>> cells;
  for (const auto& r : ds.scale_responses) {
    const std::string grp = groups.at(r.id) ? "intervention" : "control";
    for (const auto& [measure, value] : score_instrument(r.instrument, r.item_values)) {
      cells[{r.instrument, measure, grp, r.timepoint}].push_back(value);
    }
  }
  for (const auto& [key, values] : cells) {
    const auto& [inst, measure, grp, tp] = key;
    rep.descriptives.push_back({inst, measure, grp, tp, static_cast<int>(values.size()), moments(values).mean,
                                detail::sd_of(values)});
  }

  // Baseline comparability.
  {
    std::vector<double> ai, ac;
    for (const auto& p : ds.participants) (groups.at(p.id) ? ai : ac).push_back(p.age);
    rep.baseline.push_back(detail::compare("age", ai, ac, alpha));
    std::vector<double> pi, pc;
    for (const auto& r : ds.scale_responses) {
      if (r.instrument == "pss10" && r.timepoint == "T0") (groups.at(r.id) ? pi : pc).push_back(score_pss10(r.item_values));
    }
    rep.baseline.push_back(detail::compare("pss10_baseline", pi, pc, alpha));
  }

  // Perceived stress: ANCOVA and within-group paired tests.
  {
    std::vector<double> t0, t2;
    std::vector<int> grp;
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_group;
    for (const auto& p : ds.participants) {
      const auto* pre = ds.find(p.id, "T0", "pss10");
      const auto* post = ds.find(p.id, "T2", "pss10");
      if (!pre || !post) continue;
      t0.push_back(score_pss10(pre->item_values));
      t2.push_back(score_pss10(post->item_values));
      grp.push_back(groups.at(p.id));
      by_group[grp.back()].first.push_back(t0.back());
      by_group[grp.back()].second.push_back(t2.back());
    }
    rep.pss_ancova.effect = "group";
    rep.pss_ancova.observations = static_cast<int>(t0.size());
    try {
      rep.pss_ancova.fit = ancova(t2, grp, t0);
      rep.pss_ancova.skipped = false;
      rep.pss_ancova.significant = rep.pss_ancova.fit.p("group") < alpha;
    } catch (const StatsError& e) {
      rep.pss_ancova.reason = e.what();
    }
    for (int g : {1, 0}) {
      PairedComparison pcmp;
      pcmp.group = g ? "intervention" : "control";
      const auto& [pre, post] = by_group[g];
      pcmp.n = static_cast<int>(pre.size());
      pcmp.mean_t0 = moments(pre).mean;
      pcmp.mean_t2 = moments(post).mean;
      try {
        pcmp.test = paired_t_test(pre, post);
        pcmp.computed = true;
        pcmp.significant = pcmp.test.p < alpha;
      } catch (const StatsError& e) {
        pcmp.note = e.what();
      }
      rep.pss_paired.push_back(pcmp);
    }
  }

  // Daily ratings.
  rep.vas_lmm.effect = "group:day";
  rep.vas_lmm.observations = static_cast<int>(ds.vas_records.size());
  if (ds.vas_records.empty()) {
    rep.vas_lmm.reason = "no daily ratings";
  } else {
    try {
      rep.vas_lmm.fit = fit_lmm_random_intercept(ds.vas_records, groups);
      rep.vas_lmm.skipped = false;
      rep.vas_lmm.significant = rep.vas_lmm.fit.p("group:day") < alpha;
    } catch (const StatsError& e) {
      rep.vas_lmm.reason = e.what();
    }
  }

  // Regulation strategies: change scores compared across groups.
  for (std::size_t sub = 0; sub < kCerqSubscales.size(); ++sub) {
    std::vector<double> ci, cc;
    for (const auto& p : ds.participants) {
      const auto* pre = ds.find(p.id, "T0", "cerq");
      const auto* post = ds.find(p.id, "T2", "cerq");
      if (!pre || !post) continue;
      const double change = score_cerq(post->item_values)[sub] - score_cerq(pre->item_values)[sub];
      (groups.at(p.id) ? ci : cc).push_back(change);
    }
    rep.cerq_change.push_back(detail::compare(std::string(kCerqSubscales[sub]), ci, cc, alpha));
  }

  // AI-support questionnaire reliability.
  {
    std::vector<std::vector<int>> rows;
    for (const auto& r : ds.scale_responses) {
      if (r.instrument == "paesis") rows.push_back(r.item_values);
    }
    rep.paesis.persons = static_cast<int>(rows.size());
    rep.paesis.items = detail::summarize_items(rows);
    if (rows.size() < 2) {
      rep.paesis.reason = "fewer than two respondents";
    } else {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), 5);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < 5; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
      try {
        rep.paesis.alpha = cronbach_alpha(m);
        rep.paesis.skipped = false;
      } catch (const StatsError& e) {
        rep.paesis.reason = e.what();
      }
    }
  }

  // Usability.
  {
    std::vector<std::vector<int>> rows;
    std::vector<double> totals;
    std::array<double, 10> contrib{};
    for (const auto& r : ds.scale_responses) {
      if (r.instrument != "sus") continue;
      rows.push_back(r.item_values);
      totals.push_back(score_sus(r.item_values).total);
      const auto c = sus_contributions(r.item_values);
      for (std::size_t j = 0; j < 10; ++j) contrib[j] += c[j];
    }
    rep.sus.n = static_cast<int>(rows.size());
    if (!rows.empty()) {
      rep.sus.skipped = false;
      for (auto& c : contrib) c /= static_cast<double>(rows.size());
      rep.sus.raw_items = detail::summarize_items(rows);
      rep.sus.raw_items.total_mean = moments(totals).mean;
      rep.sus.raw_items.total_sd = detail::sd_of(totals);
      rep.sus.contribution_means.assign(contrib.begin(), contrib.end());
      auto sorted = totals;
      std::sort(sorted.begin(), sorted.end());
      rep.sus.total_min = sorted.front();
      rep.sus.total_max = sorted.back();
      const std::size_t n = sorted.size();
      rep.sus.total_median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
      const auto sub = sus_from_contributions(contrib);
      rep.sus.usability = sub.usability;
      rep.sus.learnability = sub.learnability;
    }
  }
  return rep;
}

namespace detail {

inline std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string fmt_p(double p) { return p < 0.001 ? std::string("<.001") : fmt(p, 3); }

inline const Descriptive* find_descriptive(const AnalysisReport& r, const std::string& inst, const std::string& measure,
                                           const std::string& group, const std::string& tp) {
  for (const auto& d : r.descriptives) {
    if (d.instrument == inst && d.measure == measure && d.group == group && d.timepoint == tp) return &d;
  }
  return nullptr;
}

inline std::string msd(const Descriptive* d) { return d ? fmt(d->mean) + " ± " + fmt(d->sd) : std::string("n/a"); }

inline void fit_table(std::ostringstream& md, const FitSection& s) {
  if (s.skipped) {
    md << "Skipped: " << s.reason << "\n\n";
    return;
  }
  const bool wald = s.fit.dof == 0.0;
  md << "| Term | Estimate | SE | " << (wald ? "z" : "t") << " | p |\n|---|---|---|---|---|\n";
  for (std::size_t k = 0; k < s.fit.names.size(); ++k) {
    md << "| " << s.fit.names[k] << " | " << fmt(s.fit.coefficients[k], 3) << " | " << fmt(s.fit.standard_errors[k], 3)
       << " | " << fmt(s.fit.test_statistics[k], 2) << " | " << fmt_p(s.fit.p_values[k]) << " |\n";
  }
  md << "\nInference: " << s.fit.inference;
  if (!wald) md << " with " << fmt(s.fit.dof, 0) << " residual dof";
  md << ". Observations: " << s.observations << ".\n";
  if (s.fit.variance_components) {
    md << "Variance components: participant " << fmt(s.fit.variance_components->sigma2_u, 4) << ", residual "
       << fmt(s.fit.variance_components->sigma2_e, 4) << "; log-likelihood " << fmt(*s.fit.log_likelihood, 3) << ".\n";
  }
  md << "\n";
}

}  // namespace detail

inline std::string render_markdown(const AnalysisReport& r) {
  using detail::fmt;
  using detail::fmt_p;
  std::ostringstream md;
  md << "# Trial analysis report\n\n";
  md << "Participants: " << r.participants << " (intervention " << r.intervention_n << ", control " << r.control_n
     << "). Two-tailed tests at alpha = " << fmt(r.alpha_level, 2) << ".\n\n";

  md << "## Participants and baseline\n\n| Measure | Intervention | Control | p |\n|---|---|---|---|\n";
  for (const auto& c : r.baseline) {
    md << "| " << c.measure << " | " << fmt(c.mean_intervention) << " | " << fmt(c.mean_control) << " | "
       << (c.computed ? fmt_p(c.test.p) : "n/a") << " |\n";
  }

  md << "\n## Perceived stress (PSS-10)\n\n| Group | T0 (M ± SD) | T2 (M ± SD) | paired t | p |\n|---|---|---|---|---|\n";
  for (const auto& pc : r.pss_paired) {
    md << "| " << pc.group << " | " << detail::msd(detail::find_descriptive(r, "pss10", "total", pc.group, "T0")) << " | "
       << detail::msd(detail::find_descriptive(r, "pss10", "total", pc.group, "T2")) << " | "
       << (pc.computed ? fmt(pc.test.t) : "n/a") << " | " << (pc.computed ? fmt_p(pc.test.p) : pc.note) << " |\n";
  }
  md << "\nANCOVA: T2 score on group with T0 score as covariate.\n\n";
  detail::fit_table(md, r.pss_ancova);

  md << "## Daily stress rating (VAS)\n\nRandom-intercept mixed model: rating on group, day and group x day.\n\n";
  detail::fit_table(md, r.vas_lmm);

  md << "## Cognitive emotion regulation (CERQ change T2 - T0)\n\n"
     << "| Subscale | Intervention change | Control change | Welch t | p |\n|---|---|---|---|---|\n";
  for (const auto& c : r.cerq_change) {
    md << "| " << c.measure << " | " << fmt(c.mean_intervention) << " | " << fmt(c.mean_control) << " | "
       << (c.computed ? fmt(c.test.t) : "n/a") << " | " << (c.computed ? fmt_p(c.test.p) : c.note) << " |\n";
  }

  md << "\n## Game experience (GEQ-Core)\n\n| Dimension | Group | M ± SD |\n|---|---|---|\n";
  for (const auto& d : r.descriptives) {
    if (d.instrument == "geq") md << "| " << d.measure << " | " << d.group << " | " << fmt(d.mean) << " ± " << fmt(d.sd) << " |\n";
  }

  md << "\n## System usability (SUS)\n\n";
  if (r.sus.skipped) {
    md << "Skipped: no responses.\n";
  } else {
    md << "| |";
    for (int i = 1; i <= 10; ++i) md << " Q" << i << " |";
    md << "\n|---|";
    for (int i = 0; i < 10; ++i) md << "---|";
    md << "\n| Mean |";
    for (double m : r.sus.raw_items.means) md << ' ' << fmt(m, 1) << " |";
    md << "\n| SD |";
    for (double s : r.sus.raw_items.sds) md << ' ' << fmt(s) << " |";
    md << "\n\n| Mean | SD | Min | Max | Median | Usability | Learnability |\n|---|---|---|---|---|---|---|\n";
    md << "| " << fmt(r.sus.raw_items.total_mean, 1) << " | " << fmt(r.sus.raw_items.total_sd) << " | "
       << fmt(r.sus.total_min, 1) << " | " << fmt(r.sus.total_max, 1) << " | " << fmt(r.sus.total_median, 1) << " | "
       << fmt(r.sus.usability, 3) << " | " << fmt(r.sus.learnability, 1) << " |\n";
  }

  md << "\n## Perceived AI emotional support (PAESIS)\n\n";
  if (r.paesis.persons == 0) {
    md << "Skipped: no responses.\n";
  } else {
    md << "| |";
    for (int i = 1; i <= 5; ++i) md << " Q" << i << " |";
    md << " Total |\n|---|---|---|---|---|---|---|\n| Mean |";
    for (double m : r.paesis.items.means) md << ' ' << fmt(m, 1) << " |";
    md << ' ' << fmt(r.paesis.items.total_mean, 1) << " |\n| SD |";
    for (double s : r.paesis.items.sds) md << ' ' << fmt(s) << " |";
    md << ' ' << fmt(r.paesis.items.total_sd) << " |\n\n";
    md << "Cronbach's alpha: " << (r.paesis.skipped ? "n/a (" + r.paesis.reason + ")" : fmt(r.paesis.alpha, 3)) << "\n";
  }
  return md.str();
}

inline void write_report(const AnalysisReport& r, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream j(out_dir / "report.json");
    if (!j) throw std::runtime_error("cannot write report.json");
    j << nlohmann::json(r).dump(2) << '\n';
  }
  std::ofstream m(out_dir / "report.md");
  if (!m) throw std::runtime_error("cannot write report.md");
  m << render_markdown(r);
}

}  // namespace reverie::stats
