#pragma once

// Session service behind the HTTP API: owns live sessions, serializes
// mutations per session, persists one JSONL log per session and restores
// sessions from those logs at startup.

#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "reverie/config.hpp"
#include "reverie/driver.hpp"
#include "reverie/event_log.hpp"

namespace reverie {

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BadRequest : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::size_t kDedupWindow = 100;

/// Client-facing projection of a session. Never carries prompts or keys.
inline nlohmann::json session_view(const SessionState& s) {
  nlohmann::json v{{"session_id", s.session_id},
                   {"phase", std::string(to_string(s.phase))},
                   {"progress_fraction", progress_fraction(s)},
                   {"cumulative_score", s.cumulative_score},
                   {"pass_threshold", s.config.pass_threshold},
                   {"round_index", s.round_index},
                   {"safe_mode", s.safe_mode()}};
  std::string reply = s.pending_npc_prompt;
  std::vector<std::string> suggestions;
  if (s.safety_round) {
    reply = s.safety_round->turn.turn.npc_reply;
  } else if (!s.transcript.empty()) {
    suggestions = s.transcript.back().turn.turn.suggested_replies;
  }
  v["npc_reply"] = reply;
  v["suggested_replies"] = suggestions;
  v["active_minigame"] = s.active_minigame ? to_json_value(*s.active_minigame) : nlohmann::json();
  v["scene"] = s.scene ? to_json_value(*s.scene) : nlohmann::json();
  if (!s.transcript.empty()) {
    const auto& last = s.transcript.back();
    v["last_round"] = {{"round_index", last.round_index},
                       {"score_awarded", last.score_awarded},
                       {"minigame_bonus", last.minigame_bonus},
                       {"minigame_suppressed", last.minigame_suppressed},
                       {"Ct", last.turn.turn.ct},
                       {"Et", last.turn.turn.et},
                       {"Pt", last.turn.turn.pt}};
  }
  return v;
}

inline nlohmann::json transcript_view(const SessionState& s) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : s.transcript) rounds.push_back(to_json_value(r));
  nlohmann::json out{{"session_id", s.session_id}, {"rounds", std::move(rounds)}};
  out["safety_round"] = s.safety_round ? to_json_value(*s.safety_round) : nlohmann::json();
  return out;
}

/// Decodes {game, event_kind, timestamp | path | form}.
inline MiniGameInput minigame_input_from_json(const nlohmann::json& body, const SessionState& s) {
  if (!body.is_object()) throw BadRequest("event body must be an object");
  const std::string kind = body.value("event_kind", "");
  if (body.contains("game") && s.active_minigame &&
      body.at("game").get<std::string>() != to_string(s.active_minigame->kind)) {
    throw SessionError(SessionError::Code::GameMismatch, "event is for a different mini-game");
  }
  if (kind == "press" || kind == "release" || kind == "tick") {
    if (!body.contains("timestamp") || !body.at("timestamp").is_number()) throw BadRequest("timestamp required");
    const double t = body.at("timestamp").get<double>();
    auto k = kind == "press" ? BreathingEvent::Kind::press
                             : (kind == "release" ? BreathingEvent::Kind::release : BreathingEvent::Kind::tick);
    return BreathingEvent{k, t};
  }
  if (kind == "chain") {
    Match3ChainInput chain;
    for (const auto& c : body.at("path")) {
      if (c.is_array() && c.size() == 2) {
        chain.path.push_back({c[0].get<int>(), c[1].get<int>()});
      } else {
        chain.path.push_back({c.at("row").get<int>(), c.at("col").get<int>()});
      }
    }
    return chain;
  }
  if (kind == "submit") return GroundingSubmit{grounding_form_from_json(body.at("form"))};
  if (kind == "finish" || kind == "abandon") return MiniGameFinish{};
  throw BadRequest("unknown event_kind '" + kind + "'");
}

class SessionService {
 public:
  SessionService(AppConfig config, std::shared_ptr<AgentGateway> gateway, Clock clock = utc_now_iso8601)
      : config_(std::move(config)),
        gateway_(std::move(gateway)),
        clock_(std::move(clock)),
        sessions_dir_(std::filesystem::path(config_.data_dir) / "sessions"),
        id_rng_(std::random_device{}()) {
    std::filesystem::create_directories(sessions_dir_);
  }

  /// Rebuilds every session found under data_dir/sessions. Returns warnings
  /// for logs that ended in a truncated or unreadable line.
  std::vector<std::string> restore() {
    std::vector<std::string> warnings;
    for (const auto& entry : std::filesystem::directory_iterator(sessions_dir_)) {
      if (entry.path().extension() != ".jsonl") continue;
      try {
        auto replay = replay_file(entry.path());
        if (!replay.warning.empty()) warnings.push_back(entry.path().filename().string() + ": " + replay.warning);
        auto e = make_entry(entry.path());
        e->driver.resume(std::move(replay.state));
        std::unique_lock lock(map_mu_);
        sessions_[e->driver.state().session_id] = std::move(e);
      } catch (const std::exception& ex) {
        warnings.push_back(entry.path().filename().string() + ": not restored (" + ex.what() + ")");
      }
    }
    return warnings;
  }

  nlohmann::json create(const nlohmann::json& body) {
    if (!body.is_object()) throw BadRequest("body must be an object");
    const auto profile = profile_from_json(body.contains("profile") ? body.at("profile") : body);
    std::string id;
    std::uint64_t seed = 0;
    {
      std::lock_guard lock(id_mu_);
      id = hex64(id_rng_());
      seed = id_rng_();
    }
    auto e = make_entry(sessions_dir_ / (id + ".jsonl"));
    std::lock_guard session_lock(e->mu);
    try {
      e->driver.start(profile, config_.engine, seed, id);
    } catch (...) {
      std::error_code ec;
      std::filesystem::remove(sessions_dir_ / (id + ".jsonl"), ec);
      throw;
    }
    auto view = session_view(e->driver.state());
    std::unique_lock lock(map_mu_);
    sessions_[id] = e;
    return view;
  }

  nlohmann::json turn(const std::string& id, const nlohmann::json& body) {
    if (!body.is_object() || !body.contains("text") || !body.at("text").is_string()) {
      throw BadRequest("body must contain a text field");
    }
    auto e = find(id);
    std::lock_guard lock(e->mu);
    const std::string request_id = body.value("request_id", "");
    if (!request_id.empty()) {
      for (const auto& [rid, cached] : e->recent) {
        if (rid == request_id) return cached;
      }
    }
    const auto report = e->driver.turn(body.at("text").get<std::string>());
    auto view = session_view(e->driver.state());
    view["turn"] = {{"repaired", report.repaired},
                    {"score_corrected", report.score_corrected},
                    {"minigame_suppressed", report.minigame_suppressed}};
    if (!request_id.empty()) {
      e->recent.emplace_back(request_id, view);
      if (e->recent.size() > kDedupWindow) e->recent.pop_front();
    }
    return view;
  }

  nlohmann::json minigame_event(const std::string& id, const nlohmann::json& body) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    if (e->driver.state().phase != SessionPhase::mini_game_active) {
      throw SessionError(SessionError::Code::WrongPhase, "no active mini-game");
    }
    auto input = minigame_input_from_json(body, e->driver.state());
    auto report = e->driver.minigame(input);
    auto view = session_view(e->driver.state());
    nlohmann::json step{{"eliminated", report.eliminated}, {"bonus", report.bonus}};
    step["result"] = report.result ? to_json_value(*report.result) : nlohmann::json();
    view["minigame_step"] = std::move(step);
    return view;
  }

  nlohmann::json exit(const std::string& id) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    e->driver.exit();
    return session_view(e->driver.state());
  }

  nlohmann::json view(const std::string& id) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    return session_view(e->driver.state());
  }

  nlohmann::json transcript(const std::string& id) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    return transcript_view(e->driver.state());
  }

  /// Daily stress rating, stored as a vas.csv-compatible row (id,day,vas).
  nlohmann::json record_vas(const std::string& id, const nlohmann::json& body) {
    auto e = find(id);
    if (!body.is_object() || !body.contains("value") || !body.at("value").is_number()) {
      throw BadRequest("body must contain a numeric value");
    }
    const double value = body.at("value").get<double>();
    const int day = body.value("day", 1);
    if (value < 0.0 || value > 10.0) throw BadRequest("vas value must be within [0, 10]");
    if (day < 1 || day > 14) throw BadRequest("day must be within [1, 14]");
    const std::string participant = body.value("participant_id", id);
    if (participant.find_first_of(",\"\n\r") != std::string::npos) throw BadRequest("invalid participant_id");

    std::lock_guard lock(vas_mu_);
    const auto path = std::filesystem::path(config_.data_dir) / "vas.csv";
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw StorageError("cannot write " + path.string());
    if (fresh) out << "id,day,vas\n";
    out << participant << ',' << day << ',' << nlohmann::json(value).dump() << '\n';
    out.flush();
    return {{"participant_id", participant}, {"day", day}, {"vas", value}};
  }

  std::size_t size() const {
    std::shared_lock lock(map_mu_);
    return sessions_.size();
  }

 private:
  struct Entry {
    Entry(std::shared_ptr<AgentGateway> gw, std::shared_ptr<EventSink> sink, Clock clock)
        : driver(std::move(gw), std::move(sink), std::move(clock)) {}
    std::mutex mu;
    SessionDriver driver;
    std::deque<std::pair<std::string, nlohmann::json>> recent;
  };

  std::shared_ptr<Entry> make_entry(const std::filesystem::path& log_path) {
    return std::make_shared<Entry>(gateway_, std::make_shared<JsonlEventLog>(log_path), clock_);
  }

  std::shared_ptr<Entry> find(const std::string& id) {
    std::shared_lock lock(map_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session " + id);
    return it->second;
  }

  AppConfig config_;
  std::shared_ptr<AgentGateway> gateway_;
  Clock clock_;
  std::filesystem::path sessions_dir_;
  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mutex id_mu_;
  std::mt19937_64 id_rng_;
  std::mutex vas_mu_;
};

}  // namespace reverie
