#pragma once

// Single-session state machine: preparation -> scene -> dialogue rounds with
// score accumulation, cooldown-gated mini-games, safe-mode termination and
// completion at the pass threshold. Every operation takes a state by value
// and returns the successor; terminal states reject all further transitions.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "reverie/contract.hpp"
#include "reverie/minigames/breathing.hpp"
#include "reverie/minigames/grounding.hpp"
#include "reverie/minigames/match3.hpp"
#include "reverie/safety.hpp"

namespace reverie {

enum class SessionPhase { preparation, scene_init, dialogue, mini_game_active, completed, safe_mode_terminated, exited };

inline std::string_view to_string(SessionPhase p) {
  switch (p) {
    case SessionPhase::preparation: return "preparation";
    case SessionPhase::scene_init: return "scene_init";
    case SessionPhase::dialogue: return "dialogue";
    case SessionPhase::mini_game_active: return "mini_game_active";
    case SessionPhase::completed: return "completed";
    case SessionPhase::safe_mode_terminated: return "safe_mode_terminated";
    case SessionPhase::exited: return "exited";
  }
  return "preparation";
}

inline bool is_terminal(SessionPhase p) {
  return p == SessionPhase::completed || p == SessionPhase::safe_mode_terminated || p == SessionPhase::exited;
}

struct PlayerProfile {
  int age = 0;
  std::string gender;
  std::string identity;
  std::string stressor_text;

  bool operator==(const PlayerProfile&) const = default;
};

struct SceneSpec {
  std::string name;
  std::string description;
  std::string image_ref;

  bool operator==(const SceneSpec&) const = default;
};

struct EngineConfig {
  double pass_threshold = 100.0;
  int cooldown_rounds = 5;  // complete dialogue rounds required between mini-games
  int breathing_cycles = kBreathingMaxCycles;
  int match3_width = 8;
  int match3_height = 8;
  int match3_kinds = 6;
  int match3_target_tiles = 9;
  RiskLexicon lexicon;

  bool operator==(const EngineConfig&) const = default;
};

struct GroundingPending {
  bool operator==(const GroundingPending&) const = default;
};

struct ActiveMiniGame {
  MiniGameKind kind = MiniGameKind::none;
  int started_round = 0;
  std::string image_ref;
  std::variant<BreathingState, Match3Game, GroundingPending> state;

  bool operator==(const ActiveMiniGame&) const = default;
};

struct DialogueRound {
  int round_index = 0;
  std::string npc_prompt;
  std::string player_input;
  ReconciledTurn turn;
  double score_awarded = 0.0;
  double minigame_bonus = 0.0;
  bool minigame_suppressed = false;

  bool operator==(const DialogueRound&) const = default;
};

struct SessionState {
  std::string session_id;
  SessionPhase phase = SessionPhase::preparation;
  PlayerProfile profile;
  std::optional<SceneSpec> scene;
  int round_index = 0;
  double cumulative_score = 0.0;
  EngineConfig config;
  std::optional<int> last_minigame_round;
  std::optional<ActiveMiniGame> active_minigame;
  std::vector<DialogueRound> transcript;
  std::uint64_t rng_seed = 0;
  std::string pending_npc_prompt;
  // The round that ended the session in safe mode; never scored.
  std::optional<DialogueRound> safety_round;
  std::string safety_reason;
  int minigames_started = 0;
  int minigames_suppressed = 0;

  double pass_threshold() const { return config.pass_threshold; }
  bool safe_mode() const { return phase == SessionPhase::safe_mode_terminated; }
  bool operator==(const SessionState&) const = default;
};

class SessionError : public std::runtime_error {
 public:
  enum class Code { InvalidProfile, InvalidScene, WrongPhase, EmptyInput, GameMismatch };
  SessionError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

namespace detail {

inline void require_phase(const SessionState& s, SessionPhase want, const char* op) {
  if (s.phase != want) {
    throw SessionError(SessionError::Code::WrongPhase, std::string(op) + " not allowed in phase " +
                                                           std::string(to_string(s.phase)));
  }
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

inline void complete_if_passed(SessionState& s) {
  if (s.cumulative_score >= s.config.pass_threshold) {
    s.phase = SessionPhase::completed;
    s.active_minigame.reset();
  }
}

}  // namespace detail

/// Seed for the mini-game started at the given round; derived, so replays
/// regenerate identical boards.
inline std::uint64_t minigame_seed(const SessionState& s, int round) {
  return detail::splitmix64(s.rng_seed ^ detail::splitmix64(static_cast<std::uint64_t>(round)));
}

inline SessionState create_session(const PlayerProfile& profile, EngineConfig config, std::uint64_t seed,
                                   std::string session_id = {}) {
  if (detail::blank(profile.stressor_text)) {
    throw SessionError(SessionError::Code::InvalidProfile, "stressor_text must not be empty");
  }
  if (!(config.pass_threshold > 0.0)) {
    throw SessionError(SessionError::Code::InvalidProfile, "pass_threshold must be positive");
  }
  SessionState s;
  s.session_id = std::move(session_id);
  s.profile = profile;
  s.config = std::move(config);
  s.rng_seed = seed;
  return s;
}

/// Stores the scene and queues the NPC's opening line (the scene
/// description when none is supplied).
inline SessionState enter_scene(SessionState s, SceneSpec scene, std::string opening_prompt = {}) {
  detail::require_phase(s, SessionPhase::preparation, "enter_scene");
  if (detail::blank(scene.name) || detail::blank(scene.description)) {
    throw SessionError(SessionError::Code::InvalidScene, "scene name and description must not be empty");
  }
  s.phase = SessionPhase::scene_init;
  s.pending_npc_prompt = detail::blank(opening_prompt) ? scene.description : std::move(opening_prompt);
  s.scene = std::move(scene);
  s.phase = SessionPhase::dialogue;
  return s;
}

inline bool can_invoke_minigame(const SessionState& s) {
  if (!s.last_minigame_round) return true;
  return s.round_index - *s.last_minigame_round >= s.config.cooldown_rounds + 1;
}

inline double progress_fraction(const SessionState& s) {
  return std::clamp(s.cumulative_score / s.config.pass_threshold, 0.0, 1.0);
}

inline ActiveMiniGame make_minigame(const SessionState& s, MiniGameKind kind) {
  ActiveMiniGame g;
  g.kind = kind;
  g.started_round = s.round_index;
  switch (kind) {
    case MiniGameKind::breathing: {
      BreathingState b;
      b.target_cycles = s.config.breathing_cycles;
      g.state = b;
      break;
    }
    case MiniGameKind::match3: {
      Match3Game m;
      m.board = match3_generate(minigame_seed(s, s.round_index), s.config.match3_width, s.config.match3_height,
                                s.config.match3_kinds);
      m.target_tiles = s.config.match3_target_tiles;
      g.state = std::move(m);
      break;
    }
    case MiniGameKind::five_senses:
      g.state = GroundingPending{};
      break;
    case MiniGameKind::none:
      throw std::invalid_argument("cannot start mini-game 'none'");
  }
  return g;
}

struct TurnOutcome {
  SessionState state;
  bool safe_mode_triggered = false;
  std::string risk_phrase;  // set when the local screen fired
  std::optional<MiniGameKind> minigame_started;
  bool minigame_suppressed = false;
  bool completed = false;
};

inline TurnOutcome submit_player_input(SessionState s, const std::string& text, ReconciledTurn turn) {
  detail::require_phase(s, SessionPhase::dialogue, "submit_player_input");
  if (detail::blank(text)) throw SessionError(SessionError::Code::EmptyInput, "player input is empty");

  TurnOutcome out;
  out.risk_phrase = s.config.lexicon.match(text);
  if (!out.risk_phrase.empty() && turn.turn.safety_gate != 0) {
    turn.turn.safety_gate = 0;
    turn.turn.safe_mode = true;
    turn.turn.mini_game_call = MiniGameKind::none;
    turn.turn.round_score = 0.0;
    turn.safety_normalized = true;
    turn.score_corrected = turn.reported_score != 0.0;
  }

  DialogueRound round;
  round.npc_prompt = s.pending_npc_prompt;
  round.player_input = text;

  if (turn.turn.safe_mode || turn.turn.safety_gate == 0) {
    round.round_index = s.round_index + 1;
    round.turn = std::move(turn);
    s.safety_round = std::move(round);
    s.safety_reason = out.risk_phrase.empty() ? "provider_gate" : "risk_lexicon";
    s.phase = SessionPhase::safe_mode_terminated;
    s.pending_npc_prompt.clear();
    out.safe_mode_triggered = true;
    out.state = std::move(s);
    return out;
  }

  ++s.round_index;
  round.round_index = s.round_index;
  round.score_awarded = turn.turn.round_score;
  s.cumulative_score += round.score_awarded;
  s.pending_npc_prompt = turn.turn.npc_reply;
  const MiniGameKind call = turn.turn.mini_game_call;
  round.turn = std::move(turn);

  if (call != MiniGameKind::none) {
    if (can_invoke_minigame(s)) {
      s.active_minigame = make_minigame(s, call);
      s.last_minigame_round = s.round_index;
      s.phase = SessionPhase::mini_game_active;
      ++s.minigames_started;
      out.minigame_started = call;
    } else {
      round.minigame_suppressed = true;
      ++s.minigames_suppressed;
      out.minigame_suppressed = true;
    }
  }
  s.transcript.push_back(std::move(round));

  detail::complete_if_passed(s);
  out.completed = s.phase == SessionPhase::completed;
  out.state = std::move(s);
  return out;
}

inline SessionState attach_minigame_image(SessionState s, std::string image_ref) {
  detail::require_phase(s, SessionPhase::mini_game_active, "attach_minigame_image");
  s.active_minigame->image_ref = std::move(image_ref);
  return s;
}

inline SessionState apply_minigame_result(SessionState s, const MiniGameResult& result) {
  detail::require_phase(s, SessionPhase::mini_game_active, "apply_minigame_result");
  if (!s.active_minigame || s.active_minigame->kind != result.game) {
    throw SessionError(SessionError::Code::GameMismatch,
                       "result for '" + std::string(to_string(result.game)) + "' does not match the active game");
  }
  const double bonus = minigame_bonus(result);
  s.cumulative_score += bonus;
  if (!s.transcript.empty()) s.transcript.back().minigame_bonus += bonus;
  s.last_minigame_round = s.round_index;
  s.active_minigame.reset();
  s.phase = SessionPhase::dialogue;
  detail::complete_if_passed(s);
  return s;
}

/// Safe-mode escalation raised outside dialogue (grounding answers).
inline SessionState escalate_to_safe_mode(SessionState s, std::string reason) {
  if (is_terminal(s.phase)) {
    throw SessionError(SessionError::Code::WrongPhase, "session already ended");
  }
  s.phase = SessionPhase::safe_mode_terminated;
  s.active_minigame.reset();
  s.pending_npc_prompt.clear();
  s.safety_reason = std::move(reason);
  return s;
}

inline SessionState exit_session(SessionState s) {
  if (is_terminal(s.phase)) throw SessionError(SessionError::Code::WrongPhase, "session already ended");
  s.phase = SessionPhase::exited;
  s.active_minigame.reset();
  return s;
}

// ---------------------------------------------------------------------------
// Mini-game interaction while a game is active.

struct Match3ChainInput {
  std::vector<Cell> path;
};
struct MiniGameFinish {};  // player leaves the game (match-3 counts as done if the target was met)
struct GroundingSubmit {
  GroundingForm form;
};
using MiniGameInput = std::variant<BreathingEvent, Match3ChainInput, MiniGameFinish, GroundingSubmit>;

struct MiniGameStep {
  SessionState state;                    // active game advanced; result not yet applied
  std::optional<MiniGameResult> result;  // set once the game is over
  std::string risk_phrase;               // grounding answers hit the lexicon
  int eliminated = 0;
};

/// Advances the active game. Finished games are reported, not applied:
/// callers log the result and then call apply_minigame_result.
inline MiniGameStep step_minigame(SessionState s, const MiniGameInput& input, GroundingEvaluator& evaluator) {
  detail::require_phase(s, SessionPhase::mini_game_active, "step_minigame");
  auto& game = *s.active_minigame;
  MiniGameStep out;

  auto mismatch = [&](const char* what) {
    return SessionError(SessionError::Code::GameMismatch,
                        std::string(what) + " is not valid for active game '" + std::string(to_string(game.kind)) + "'");
  };

  if (std::holds_alternative<MiniGameFinish>(input)) {
    switch (game.kind) {
      case MiniGameKind::breathing: out.result = breathing_result(std::get<BreathingState>(game.state)); break;
      case MiniGameKind::match3: out.result = match3_result(std::get<Match3Game>(game.state)); break;
      default: out.result = abandoned_result(game.kind); break;
    }
  } else if (const auto* ev = std::get_if<BreathingEvent>(&input)) {
    if (game.kind != MiniGameKind::breathing) throw mismatch("breathing event");
    auto& b = std::get<BreathingState>(game.state);
    b = breathing_step(b, *ev);
    if (b.done()) out.result = breathing_result(b);
  } else if (const auto* chain = std::get_if<Match3ChainInput>(&input)) {
    if (game.kind != MiniGameKind::match3) throw mismatch("match-3 chain");
    auto& m = std::get<Match3Game>(game.state);
    out.eliminated = match3_play(m, chain->path);
    if (m.done()) out.result = match3_result(m);
  } else if (const auto* submit = std::get_if<GroundingSubmit>(&input)) {
    if (game.kind != MiniGameKind::five_senses) throw mismatch("grounding form");
    auto graded = grounding_evaluate(submit->form, evaluator, &s.config.lexicon);
    out.risk_phrase = graded.risk_phrase;
    out.result = graded.result;
  }
  out.state = std::move(s);
  return out;
}

// ---------------------------------------------------------------------------
// JSON views.

inline nlohmann::json to_json_value(const PlayerProfile& p) {
  return {{"age", p.age}, {"gender", p.gender}, {"identity", p.identity}, {"stressor_text", p.stressor_text}};
}

inline PlayerProfile profile_from_json(const nlohmann::json& j) {
  PlayerProfile p;
  p.age = j.value("age", 0);
  p.gender = j.value("gender", "");
  p.identity = j.value("identity", "");
  p.stressor_text = j.value("stressor_text", "");
  return p;
}

inline nlohmann::json to_json_value(const SceneSpec& s) {
  return {{"name", s.name}, {"description", s.description}, {"image_ref", s.image_ref}};
}

inline SceneSpec scene_from_json(const nlohmann::json& j) {
  return {j.value("name", ""), j.value("description", ""), j.value("image_ref", "")};
}

inline nlohmann::json to_json_value(const EngineConfig& c) {
  return {{"pass_threshold", c.pass_threshold},     {"cooldown_rounds", c.cooldown_rounds},
          {"breathing_cycles", c.breathing_cycles}, {"match3_width", c.match3_width},
          {"match3_height", c.match3_height},       {"match3_kinds", c.match3_kinds},
          {"match3_target_tiles", c.match3_target_tiles}, {"lexicon", c.lexicon.phrases()}};
}

inline EngineConfig engine_config_from_json(const nlohmann::json& j) {
  EngineConfig c;
  c.pass_threshold = j.value("pass_threshold", c.pass_threshold);
  c.cooldown_rounds = j.value("cooldown_rounds", c.cooldown_rounds);
  c.breathing_cycles = j.value("breathing_cycles", c.breathing_cycles);
  c.match3_width = j.value("match3_width", c.match3_width);
  c.match3_height = j.value("match3_height", c.match3_height);
  c.match3_kinds = j.value("match3_kinds", c.match3_kinds);
  c.match3_target_tiles = j.value("match3_target_tiles", c.match3_target_tiles);
  if (auto it = j.find("lexicon"); it != j.end()) c.lexicon = RiskLexicon(it->get<std::vector<std::string>>());
  return c;
}

inline nlohmann::json to_json_value(const Match3Board& b) {
  return {{"width", b.width}, {"height", b.height}, {"kinds", b.kinds}, {"cells", b.cells}, {"score", b.score}};
}

inline nlohmann::json to_json_value(const ActiveMiniGame& g) {
  nlohmann::json j{{"game", std::string(to_string(g.kind))}, {"started_round", g.started_round}};
  if (!g.image_ref.empty()) j["image_ref"] = g.image_ref;
  if (const auto* b = std::get_if<BreathingState>(&g.state)) {
    j["breathing"] = {{"phase", std::string(to_string(b->phase))},
                      {"completed_cycles", b->completed_cycles},
                      {"target_cycles", b->target_cycles}};
  } else if (const auto* m = std::get_if<Match3Game>(&g.state)) {
    j["match3"] = {{"board", to_json_value(m->board)},
                   {"eliminated_total", m->eliminated_total},
                   {"target_tiles", m->target_tiles}};
  } else {
    j["grounding"] = {{"counts", kGroundingCounts}, {"senses", kGroundingSenses}};
  }
  return j;
}

inline nlohmann::json to_json_value(const DialogueRound& r) {
  return {{"round_index", r.round_index},
          {"npc_prompt", r.npc_prompt},
          {"player_input", r.player_input},
          {"turn", to_json_value(r.turn)},
          {"score_awarded", r.score_awarded},
          {"minigame_bonus", r.minigame_bonus},
          {"minigame_suppressed", r.minigame_suppressed}};
}

/// Full state dump, including the mini-game generator state, so that two
/// dumps compare equal only when the states are identical.
inline nlohmann::json to_json_value(const SessionState& s) {
  nlohmann::json j{{"session_id", s.session_id},
                   {"phase", std::string(to_string(s.phase))},
                   {"profile", to_json_value(s.profile)},
                   {"round_index", s.round_index},
                   {"cumulative_score", s.cumulative_score},
                   {"config", to_json_value(s.config)},
                   {"rng_seed", s.rng_seed},
                   {"pending_npc_prompt", s.pending_npc_prompt},
                   {"safety_reason", s.safety_reason},
                   {"minigames_started", s.minigames_started},
                   {"minigames_suppressed", s.minigames_suppressed}};
  j["scene"] = s.scene ? to_json_value(*s.scene) : nlohmann::json();
  j["last_minigame_round"] = s.last_minigame_round ? nlohmann::json(*s.last_minigame_round) : nlohmann::json();
  if (s.active_minigame) {
    j["active_minigame"] = to_json_value(*s.active_minigame);
    if (const auto* m = std::get_if<Match3Game>(&s.active_minigame->state)) {
      j["active_minigame"]["rng_state"] = rng_state_string(m->board.rng);
    }
  } else {
    j["active_minigame"] = nullptr;
  }
  auto& rounds = j["transcript"] = nlohmann::json::array();
  for (const auto& r : s.transcript) rounds.push_back(to_json_value(r));
  j["safety_round"] = s.safety_round ? to_json_value(*s.safety_round) : nlohmann::json();
  return j;
}

}  // namespace reverie
