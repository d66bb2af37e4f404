#pragma once

// Five-senses grounding: 5 things seen, 4 touched, 3 heard, 2 smelled,
// 1 tasted, written while looking at an unrelated illustration.

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "reverie/minigames/result.hpp"
#include "reverie/safety.hpp"

namespace reverie {

inline constexpr std::array<std::size_t, 5> kGroundingCounts{5, 4, 3, 2, 1};
inline constexpr std::array<const char*, 5> kGroundingSenses{"see", "touch", "hear", "smell", "taste"};
inline constexpr std::size_t kGroundingAnswers = 15;

struct GroundingForm {
  std::vector<std::string> see_items;
  std::vector<std::string> touch_items;
  std::vector<std::string> hear_items;
  std::vector<std::string> smell_items;
  std::vector<std::string> taste_items;
  std::string image_ref;

  std::array<const std::vector<std::string>*, 5> groups() const {
    return {&see_items, &touch_items, &hear_items, &smell_items, &taste_items};
  }
  std::vector<std::string> answers() const {
    std::vector<std::string> all;
    for (const auto* g : groups()) all.insert(all.end(), g->begin(), g->end());
    return all;
  }
  bool operator==(const GroundingForm&) const = default;
};

class IncompleteForm : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string normalize_answer(const std::string& s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace detail

inline void validate_grounding_form(const GroundingForm& form) {
  const auto groups = form.groups();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i]->size() != kGroundingCounts[i]) {
      throw IncompleteForm(std::string("expected ") + std::to_string(kGroundingCounts[i]) + " '" +
                           kGroundingSenses[i] + "' answers, got " + std::to_string(groups[i]->size()));
    }
    for (const auto& a : *groups[i]) {
      if (detail::normalize_answer(a).empty()) {
        throw IncompleteForm(std::string("empty '") + kGroundingSenses[i] + "' answer");
      }
    }
  }
}

/// Rates a complete form on a 0-5 quality scale.
class GroundingEvaluator {
 public:
  virtual ~GroundingEvaluator() = default;
  virtual double quality(const GroundingForm& form) = 0;
};

/// Offline rating: one third of a point per distinct answer.
class HeuristicGroundingEvaluator final : public GroundingEvaluator {
 public:
  double quality(const GroundingForm& form) override {
    std::set<std::string> distinct;
    for (const auto& a : form.answers()) {
      auto n = detail::normalize_answer(a);
      if (!n.empty()) distinct.insert(std::move(n));
    }
    return static_cast<double>(distinct.size()) * (kGroundingPointsCap / kGroundingAnswers);
  }
};

struct GroundingOutcome {
  MiniGameResult result;
  std::string risk_phrase;  // non-empty: escalate the session to safe mode

  bool escalate() const { return !risk_phrase.empty(); }
};

inline GroundingOutcome grounding_evaluate(const GroundingForm& form, GroundingEvaluator& evaluator,
                                           const RiskLexicon* lexicon = nullptr) {
  validate_grounding_form(form);
  GroundingOutcome out;
  if (lexicon) {
    for (const auto& a : form.answers()) {
      if (auto hit = lexicon->match(a); !hit.empty()) {
        out.risk_phrase = hit;
        out.result = abandoned_result(MiniGameKind::five_senses);
        return out;
      }
    }
  }
  const double q = std::clamp(evaluator.quality(form), 0.0, kGroundingPointsCap);
  out.result = {MiniGameKind::five_senses, true, q};
  return out;
}

inline GroundingForm grounding_form_from_json(const nlohmann::json& j) {
  GroundingForm f;
  auto list = [&](const char* key) {
    std::vector<std::string> v;
    if (auto it = j.find(key); it != j.end()) v = it->get<std::vector<std::string>>();
    return v;
  };
  f.see_items = list("see");
  f.touch_items = list("touch");
  f.hear_items = list("hear");
  f.smell_items = list("smell");
  f.taste_items = list("taste");
  if (auto it = j.find("image_ref"); it != j.end() && it->is_string()) f.image_ref = it->get<std::string>();
  return f;
}

inline nlohmann::json to_json_value(const GroundingForm& f) {
  return {{"see", f.see_items},     {"touch", f.touch_items}, {"hear", f.hear_items},
          {"smell", f.smell_items}, {"taste", f.taste_items}, {"image_ref", f.image_ref}};
}

}  // namespace reverie
