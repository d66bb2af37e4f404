#pragma once

// Append-only JSON Lines session log and replay. Each line is one event:
// {"ts": ISO-8601, "session_id", "kind", "payload"}.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reverie/contract.hpp"
#include "reverie/session.hpp"

namespace reverie {

namespace event_kind {
inline constexpr const char* created = "created";
inline constexpr const char* scene = "scene";
inline constexpr const char* player_input = "player_input";
inline constexpr const char* npc_turn = "npc_turn";
inline constexpr const char* minigame_start = "minigame_start";
inline constexpr const char* minigame_result = "minigame_result";
inline constexpr const char* safe_mode = "safe_mode";
inline constexpr const char* completed = "completed";
inline constexpr const char* exited = "exited";
}  // namespace event_kind

struct SessionEvent {
  std::string ts;
  std::string session_id;
  std::string kind;
  nlohmann::json payload = nlohmann::json::object();

  bool operator==(const SessionEvent&) const = default;
};

inline nlohmann::json to_json_value(const SessionEvent& e) {
  return {{"ts", e.ts}, {"session_id", e.session_id}, {"kind", e.kind}, {"payload", e.payload}};
}

inline SessionEvent event_from_json(const nlohmann::json& j) {
  return {j.at("ts").get<std::string>(), j.at("session_id").get<std::string>(), j.at("kind").get<std::string>(),
          j.value("payload", nlohmann::json::object())};
}

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Clock = std::function<std::string()>;

inline std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

/// Deterministic clock for simulations: one second per event from a fixed epoch.
class LogicalClock {
 public:
  explicit LogicalClock(std::int64_t start_epoch_s = 1767225600) : next_(start_epoch_s) {}
  std::string operator()() {
    const std::time_t t = static_cast<std::time_t>(next_++);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[96];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

 private:
  std::int64_t next_;
};

class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void append(const SessionEvent& event) = 0;
};

class MemoryEventLog final : public EventSink {
 public:
  void append(const SessionEvent& event) override { events_.push_back(event); }
  const std::vector<SessionEvent>& events() const noexcept { return events_; }

 private:
  std::vector<SessionEvent> events_;
};

/// One line per event, flushed before append() returns.
class JsonlEventLog final : public EventSink {
 public:
  explicit JsonlEventLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw StorageError("cannot open event log " + path_.string());
  }

  void append(const SessionEvent& event) override {
    std::lock_guard lock(mu_);
    const std::string line = to_json_value(event).dump() + "\n";
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw StorageError("write to " + path_.string() + " failed");
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

struct LoadedLog {
  std::vector<SessionEvent> events;
  std::string warning;  // set when reading stopped before end of file
};

/// Reads complete events. A final line without its newline, or any line that
/// does not parse, ends reading with a warning.
inline LoadedLog read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read event log " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  LoadedLog out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    ++line_no;
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) {
      out.warning = "line " + std::to_string(line_no) + " is truncated; replay stops at the last complete event";
      break;
    }
    const std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    try {
      out.events.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      out.warning = "line " + std::to_string(line_no) + " is unreadable (" + e.what() +
                    "); replay stops at the last complete event";
      break;
    }
  }
  return out;
}

struct ReplayResult {
  SessionState state;
  std::size_t applied = 0;
  std::string warning;
};

/// Rebuilds a session from its events. Derived events (completed, and
/// safe_mode raised by a dialogue turn) are checked implicitly by the
/// transitions that produce them and are not re-applied.
inline ReplayResult replay_session(const std::vector<SessionEvent>& events) {
  ReplayResult r;
  bool created = false;
  std::string pending_input;
  for (const auto& e : events) {
    const auto& p = e.payload;
    if (e.kind == event_kind::created) {
      if (created) throw StorageError("duplicate 'created' event");
      r.state = create_session(profile_from_json(p.at("profile")), engine_config_from_json(p.at("config")),
                               p.at("seed").get<std::uint64_t>(), e.session_id);
      created = true;
    } else if (!created) {
      throw StorageError("event '" + e.kind + "' precedes 'created'");
    } else if (e.kind == event_kind::scene) {
      r.state = enter_scene(std::move(r.state), scene_from_json(p.at("scene")), p.value("opening", ""));
    } else if (e.kind == event_kind::player_input) {
      pending_input = p.at("text").get<std::string>();
    } else if (e.kind == event_kind::npc_turn) {
      auto turn = reconcile_turn(parse_npc_turn(p.at("raw").get<std::string>()));
      r.state = submit_player_input(std::move(r.state), pending_input, std::move(turn)).state;
      pending_input.clear();
    } else if (e.kind == event_kind::minigame_start) {
      const std::string image = p.value("image_ref", "");
      if (!image.empty() && r.state.phase == SessionPhase::mini_game_active) {
        r.state = attach_minigame_image(std::move(r.state), image);
      }
    } else if (e.kind == event_kind::minigame_result) {
      r.state = apply_minigame_result(std::move(r.state), minigame_result_from_json(p));
    } else if (e.kind == event_kind::safe_mode) {
      if (p.value("source", "") == "minigame") {
        r.state = escalate_to_safe_mode(std::move(r.state), p.value("reason", "minigame_screen"));
      }
    } else if (e.kind == event_kind::exited) {
      r.state = exit_session(std::move(r.state));
    } else if (e.kind != event_kind::completed) {
      throw StorageError("unknown event kind '" + e.kind + "'");
    }
    ++r.applied;
  }
  if (!created) throw StorageError("log has no 'created' event");
  return r;
}

inline ReplayResult replay_file(const std::filesystem::path& path) {
  auto loaded = read_event_log(path);
  auto r = replay_session(loaded.events);
  r.warning = loaded.warning;
  return r;
}

}  // namespace reverie
