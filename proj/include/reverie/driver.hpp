#pragma once

// Runs one session end to end: calls the agents, feeds their results into the
// state machine, and records every input to the event log in the order that
// replay_session consumes them.

#include <memory>
#include <optional>
#include <string>

#include "reverie/agents.hpp"
#include "reverie/event_log.hpp"
#include "reverie/session.hpp"

namespace reverie {

struct TurnReport {
  bool repaired = false;
  bool score_corrected = false;
  bool safe_mode = false;
  bool local_screen = false;
  bool minigame_suppressed = false;
  std::optional<MiniGameKind> minigame_started;
  bool completed = false;
  double score_awarded = 0.0;
};

struct MiniGameReport {
  std::optional<MiniGameResult> result;
  double bonus = 0.0;
  int eliminated = 0;
  bool safe_mode = false;
  bool completed = false;
};

class SessionDriver {
 public:
  SessionDriver(std::shared_ptr<AgentGateway> gateway, std::shared_ptr<EventSink> sink, Clock clock = utc_now_iso8601)
      : gateway_(std::move(gateway)), sink_(std::move(sink)), clock_(std::move(clock)) {}

  /// Collects the profile, designs and illustrates the scene, and opens the
  /// dialogue.
  const SessionState& start(const PlayerProfile& profile, const EngineConfig& config, std::uint64_t seed,
                            std::string session_id) {
    auto state = create_session(profile, config, seed, std::move(session_id));
    SceneSpec scene = gateway_->generate_scene(profile);
    scene.image_ref = gateway_->request_scene_image(scene.description);
    const std::string opening = gateway_->prompts().render(
        "opening", {{"scene_name", scene.name}, {"scene_description", scene.description}});

    record(state.session_id, event_kind::created,
           {{"profile", to_json_value(profile)}, {"config", to_json_value(config)}, {"seed", seed}});
    state_ = enter_scene(std::move(state), scene, opening);
    record(event_kind::scene, {{"scene", to_json_value(scene)}, {"opening", opening}});
    return state_;
  }

  /// Continues a session rebuilt from its log.
  void resume(SessionState state) { state_ = std::move(state); }

  const SessionState& state() const noexcept { return state_; }

  TurnReport turn(const std::string& text) {
    detail::require_phase(state_, SessionPhase::dialogue, "turn");
    if (detail::blank(text)) throw SessionError(SessionError::Code::EmptyInput, "player input is empty");

    TurnReport report;
    std::string raw;
    if (!state_.config.lexicon.match(text).empty()) {
      // High-risk input never reaches the provider.
      NpcTurn gated;
      gated.npc_reply = gateway_->prompts().render("safety_message");
      gated.safety_gate = 0;
      gated.safe_mode = true;
      raw = serialize_npc_turn(gated);
      report.local_screen = true;
    } else {
      auto bundle = build_npc_system_prompt(gateway_->prompts(), state_.profile, *state_.scene,
                                            state_.round_index + 1, state_.transcript, state_.config.cooldown_rounds);
      auto response = gateway_->request_npc_turn(std::move(bundle), text);
      raw = std::move(response.raw);
      report.repaired = response.repaired;
    }

    auto reconciled = reconcile_turn(parse_npc_turn(raw));
    report.score_corrected = reconciled.score_corrected;
    record(event_kind::player_input, {{"text", text}});
    record(event_kind::npc_turn, {{"raw", raw}, {"repaired", report.repaired}, {"local_screen", report.local_screen}});

    auto outcome = submit_player_input(state_, text, std::move(reconciled));
    state_ = std::move(outcome.state);
    report.safe_mode = outcome.safe_mode_triggered;
    report.minigame_suppressed = outcome.minigame_suppressed;
    report.minigame_started = outcome.minigame_started;
    report.completed = outcome.completed;
    if (!state_.transcript.empty() && !report.safe_mode) report.score_awarded = state_.transcript.back().score_awarded;

    if (outcome.safe_mode_triggered) {
      record(event_kind::safe_mode,
             {{"source", "turn"}, {"reason", state_.safety_reason}, {"phrase", outcome.risk_phrase}});
    }
    if (outcome.minigame_started && state_.phase == SessionPhase::mini_game_active) {
      if (*outcome.minigame_started == MiniGameKind::five_senses) {
        std::string image;
        try {
          image = gateway_->request_grounding_image();
        } catch (const std::exception&) {
          image = placeholder_image_ref("grounding");
        }
        state_ = attach_minigame_image(std::move(state_), image);
      }
      record(event_kind::minigame_start, {{"game", std::string(to_string(*outcome.minigame_started))},
                                          {"round", state_.round_index},
                                          {"image_ref", state_.active_minigame->image_ref}});
    }
    if (outcome.minigame_suppressed) {
      // Suppressed calls are logged for audit only; replay re-derives them.
      record(event_kind::minigame_start,
             {{"game", std::string(to_string(state_.transcript.back().turn.turn.mini_game_call))},
              {"round", state_.round_index},
              {"suppressed", true}});
    }
    if (outcome.completed) record(event_kind::completed, {{"cumulative_score", state_.cumulative_score}});
    return report;
  }

  // Transitions take a copy of the state so a rejected input leaves the
  // session untouched.
  MiniGameReport minigame(const MiniGameInput& input) {
    AgentGroundingEvaluator evaluator(*gateway_);
    auto step = step_minigame(state_, input, evaluator);
    state_ = std::move(step.state);
    MiniGameReport report;
    report.eliminated = step.eliminated;

    if (!step.risk_phrase.empty()) {
      record(event_kind::safe_mode, {{"source", "minigame"}, {"reason", "minigame_screen"}, {"phrase", step.risk_phrase}});
      state_ = escalate_to_safe_mode(std::move(state_), "minigame_screen");
      report.safe_mode = true;
      return report;
    }
    if (step.result) {
      record(event_kind::minigame_result, to_json_value(*step.result));
      state_ = apply_minigame_result(std::move(state_), *step.result);
      report.result = step.result;
      report.bonus = minigame_bonus(*step.result);
      if (state_.phase == SessionPhase::completed) {
        report.completed = true;
        record(event_kind::completed, {{"cumulative_score", state_.cumulative_score}});
      }
    }
    return report;
  }

  const SessionState& exit() {
    state_ = exit_session(state_);
    record(event_kind::exited, nlohmann::json::object());
    return state_;
  }

 private:
  void record(const char* kind, nlohmann::json payload) { record(state_.session_id, kind, std::move(payload)); }
  void record(const std::string& session_id, const char* kind, nlohmann::json payload) {
    sink_->append({clock_(), session_id, kind, std::move(payload)});
  }

  std::shared_ptr<AgentGateway> gateway_;
  std::shared_ptr<EventSink> sink_;
  Clock clock_;
  SessionState state_;
};

}  // namespace reverie
