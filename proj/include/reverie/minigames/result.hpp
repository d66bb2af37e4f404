#pragma once

#include <algorithm>
#include <string>

#include "reverie/contract.hpp"

namespace reverie {

struct MiniGameResult {
  MiniGameKind game = MiniGameKind::none;
  bool completed = false;
  double performance_points = 0.0;  // always 0 when not completed

  bool operator==(const MiniGameResult&) const = default;
};

// Award table. A completed mini-game is worth roughly one good dialogue round.
inline constexpr double kCompletionBonus = 5.0;
inline constexpr double kBreathingPointsPerCycle = 2.0;
inline constexpr int kBreathingMaxCycles = 3;
inline constexpr double kMatch3PointsPerTile = 0.5;
inline constexpr double kMatch3PointsCap = 5.0;
inline constexpr double kGroundingPointsCap = 5.0;

inline MiniGameResult abandoned_result(MiniGameKind game) { return {game, false, 0.0}; }

/// Points added to the session score for a finished mini-game.
inline double minigame_bonus(const MiniGameResult& r) {
  if (!r.completed) return 0.0;
  return kCompletionBonus + std::max(0.0, r.performance_points);
}

inline nlohmann::json to_json_value(const MiniGameResult& r) {
  return {{"game", std::string(to_string(r.game))},
          {"completed", r.completed},
          {"performance_points", r.performance_points}};
}

inline MiniGameResult minigame_result_from_json(const nlohmann::json& j) {
  MiniGameResult r;
  auto k = mini_game_from_string(j.at("game").get<std::string>());
  if (!k) throw std::invalid_argument("unknown mini-game kind");
  r.game = *k;
  r.completed = j.at("completed").get<bool>();
  r.performance_points = r.completed ? j.at("performance_points").get<double>() : 0.0;
  return r;
}

}  // namespace reverie
