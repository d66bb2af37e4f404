#pragma once

// Questionnaire scoring. Items are 1-based in keys and error messages.

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "reverie/stats/distributions.hpp"

namespace reverie::stats {

struct InstrumentSpec {
  std::string_view name;
  int items;
  int min_value;
  int max_value;
};

inline constexpr std::array<InstrumentSpec, 5> kInstruments{{
    {"pss10", 10, 0, 4},
    {"cerq", 36, 1, 5},
    {"geq", 33, 0, 4},
    {"sus", 10, 1, 5},
    {"paesis", 5, 1, 5},
}};

inline const InstrumentSpec& instrument_spec(std::string_view name) {
  for (const auto& s : kInstruments) {
    if (s.name == name) return s;
  }
  throw std::invalid_argument("unknown instrument '" + std::string(name) + "'");
}

inline void check_items(const InstrumentSpec& spec, const std::vector<int>& items) {
  if (static_cast<int>(items.size()) != spec.items) {
    throw WrongItemCount(std::string(spec.name) + " expects " + std::to_string(spec.items) + " items, got " +
                         std::to_string(items.size()));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i] < spec.min_value || items[i] > spec.max_value) {
      throw OutOfRange(std::string(spec.name) + " item " + std::to_string(i + 1) + " = " + std::to_string(items[i]) +
                       " outside [" + std::to_string(spec.min_value) + ", " + std::to_string(spec.max_value) + "]");
    }
  }
}

inline constexpr std::array<int, 4> kPssReversed{4, 5, 7, 8};

inline int score_pss10(const std::vector<int>& items) {
  check_items(instrument_spec("pss10"), items);
  int total = 0;
  for (int i = 1; i <= 10; ++i) {
    const int raw = items[static_cast<std::size_t>(i - 1)];
    const bool reversed = std::find(kPssReversed.begin(), kPssReversed.end(), i) != kPssReversed.end();
    total += reversed ? 4 - raw : raw;
  }
  return total;
}

inline constexpr std::array<std::string_view, 9> kCerqSubscales{
    "self_blame",          "acceptance",          "rumination",
    "positive_refocusing", "refocus_on_planning", "positive_reappraisal",
    "putting_into_perspective", "catastrophizing", "blaming_others"};

using CerqScores = std::array<int, 9>;

inline CerqScores score_cerq(const std::vector<int>& items) {
  check_items(instrument_spec("cerq"), items);
  CerqScores s{};
  for (std::size_t i = 0; i < items.size(); ++i) s[i / 4] += items[i];
  return s;
}

struct GeqDimension {
  std::string_view name;
  std::vector<int> items;
};

inline const std::vector<GeqDimension>& geq_key() {
  static const std::vector<GeqDimension> key{
      {"competence", {2, 10, 15, 17, 21}},
      {"sensory_imaginative_immersion", {3, 12, 18, 19, 27, 30}},
      {"flow", {5, 13, 25, 28, 31}},
      {"tension", {22, 24, 29}},
      {"challenge", {11, 23, 26, 32, 33}},
      {"negative_affect", {7, 8, 9, 16}},
      {"positive_affect", {1, 4, 6, 14, 20}},
  };
  return key;
}

inline std::array<double, 7> score_geq(const std::vector<int>& items) {
  check_items(instrument_spec("geq"), items);
  std::array<double, 7> out{};
  const auto& key = geq_key();
  for (std::size_t d = 0; d < key.size(); ++d) {
    double s = 0.0;
    for (int i : key[d].items) s += items[static_cast<std::size_t>(i - 1)];
    out[d] = s / static_cast<double>(key[d].items.size());
  }
  return out;
}

struct SusScore {
  double total = 0.0;
  double usability = 0.0;
  double learnability = 0.0;
  bool operator==(const SusScore&) const = default;
};

/// Subscales from per-item contributions (each 0..4). Items 4 and 10 form
/// learnability; the other eight form usability.
inline SusScore sus_from_contributions(const std::array<double, 10>& c) {
  SusScore s;
  double sum = 0.0, learn = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    sum += c[i];
    if (i == 3 || i == 9) learn += c[i];
  }
  s.total = sum * 2.5;
  s.learnability = learn / 8.0 * 100.0;
  s.usability = (sum - learn) / 32.0 * 100.0;
  return s;
}

inline std::array<double, 10> sus_contributions(const std::vector<int>& items) {
  check_items(instrument_spec("sus"), items);
  std::array<double, 10> c{};
  for (std::size_t i = 0; i < 10; ++i) c[i] = i % 2 == 0 ? items[i] - 1 : 5 - items[i];
  return c;
}

inline SusScore score_sus(const std::vector<int>& items) { return sus_from_contributions(sus_contributions(items)); }

inline int score_paesis(const std::vector<int>& items) {
  check_items(instrument_spec("paesis"), items);
  int total = 0;
  for (int v : items) total += v;
  return total;
}

/// Named measures for any instrument, as used by reports and the CLI.
inline std::map<std::string, double> score_instrument(std::string_view name, const std::vector<int>& items) {
  std::map<std::string, double> out;
  if (name == "pss10") {
    out["total"] = score_pss10(items);
  } else if (name == "cerq") {
    const auto s = score_cerq(items);
    for (std::size_t i = 0; i < s.size(); ++i) out[std::string(kCerqSubscales[i])] = s[i];
  } else if (name == "geq") {
    const auto s = score_geq(items);
    for (std::size_t i = 0; i < s.size(); ++i) out[std::string(geq_key()[i].name)] = s[i];
  } else if (name == "sus") {
    const auto s = score_sus(items);
    out["total"] = s.total;
    out["usability"] = s.usability;
    out["learnability"] = s.learnability;
  } else if (name == "paesis") {
    out["total"] = score_paesis(items);
  } else {
    instrument_spec(name);  // throws
  }
  return out;
}

/// Cronbach's alpha over a persons x items matrix, sample (n-1) variances.
inline double cronbach_alpha(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows(), k = m.cols();
  if (k < 2) throw DegenerateData("alpha needs at least 2 items");
  if (n < 2) throw DegenerateData("alpha needs at least 2 persons");
  auto var = [n](const Eigen::VectorXd& v) {
    const double mean = v.mean();
    return (v.array() - mean).square().sum() / static_cast<double>(n - 1);
  };
  double item_var = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) item_var += var(m.col(j));
  const double total_var = var(m.rowwise().sum());
  if (!(total_var > 0.0)) throw DegenerateData("total score has zero variance");
  const double kk = static_cast<double>(k);
  return kk / (kk - 1.0) * (1.0 - item_var / total_var);
}

}  // namespace reverie::stats
