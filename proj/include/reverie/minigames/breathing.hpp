#pragma once

// 4-7-8 breathing. The player holds a key through inhale (4 s) and breath
// hold (7 s), then releases and exhales (8 s). Only press and release are
// observable, so a cycle is judged on the press duration (inhale + hold)
// and on the gap until the next press or tick (exhale).

#include <optional>
#include <stdexcept>
#include <string>

#include "reverie/minigames/result.hpp"

namespace reverie {

enum class BreathingPhase { idle, inhale, hold, exhale, cycle_done };

inline std::string_view to_string(BreathingPhase p) {
  switch (p) {
    case BreathingPhase::idle: return "idle";
    case BreathingPhase::inhale: return "inhale";
    case BreathingPhase::hold: return "hold";
    case BreathingPhase::exhale: return "exhale";
    case BreathingPhase::cycle_done: return "cycle_done";
  }
  return "idle";
}

struct BreathingTiming {
  double inhale_s = 4.0;
  double hold_s = 7.0;
  double exhale_s = 8.0;
  double tolerance_s = 1.0;

  double min_press() const { return inhale_s + hold_s - tolerance_s; }
  double max_press() const { return inhale_s + hold_s + tolerance_s; }
  double min_exhale() const { return exhale_s - tolerance_s; }

  bool operator==(const BreathingTiming&) const = default;
};

struct BreathingState {
  BreathingPhase phase = BreathingPhase::idle;
  double phase_started_at = 0.0;
  double pressed_at = 0.0;
  int completed_cycles = 0;
  int target_cycles = kBreathingMaxCycles;
  int resets = 0;
  std::optional<double> last_event_at;
  BreathingTiming timing{};

  bool done() const { return completed_cycles >= target_cycles; }
  bool operator==(const BreathingState&) const = default;
};

struct BreathingEvent {
  enum class Kind { press, release, tick };
  Kind kind;
  double t;
};

class OutOfOrderEvent : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void breathing_reset(BreathingState& s, double t) {
  s.phase = BreathingPhase::idle;
  s.phase_started_at = t;
  ++s.resets;
}

inline void breathing_start_inhale(BreathingState& s, double t) {
  s.phase = BreathingPhase::inhale;
  s.phase_started_at = t;
  s.pressed_at = t;
}

inline void breathing_count_cycle(BreathingState& s, double t) {
  ++s.completed_cycles;
  s.phase = BreathingPhase::cycle_done;
  s.phase_started_at = t;
}

}  // namespace detail

inline BreathingState breathing_step(BreathingState s, const BreathingEvent& ev) {
  if (s.last_event_at && ev.t < *s.last_event_at) {
    throw OutOfOrderEvent("breathing event at " + std::to_string(ev.t) + " precedes " +
                          std::to_string(*s.last_event_at));
  }
  s.last_event_at = ev.t;
  if (s.done()) return s;

  const auto& tm = s.timing;
  const bool holding = s.phase == BreathingPhase::inhale || s.phase == BreathingPhase::hold;

  if (holding) {
    const double held = ev.t - s.pressed_at;
    switch (ev.kind) {
      case BreathingEvent::Kind::tick:
        if (held > tm.max_press()) {
          detail::breathing_reset(s, ev.t);
        } else if (s.phase == BreathingPhase::inhale && held >= tm.inhale_s) {
          s.phase = BreathingPhase::hold;
          s.phase_started_at = s.pressed_at + tm.inhale_s;
        }
        return s;
      case BreathingEvent::Kind::release:
        if (held >= tm.min_press() && held <= tm.max_press()) {
          s.phase = BreathingPhase::exhale;
          s.phase_started_at = ev.t;
        } else {
          detail::breathing_reset(s, ev.t);
        }
        return s;
      case BreathingEvent::Kind::press:
        return s;  // already held
    }
  }

  if (s.phase == BreathingPhase::exhale) {
    const double exhaled = ev.t - s.phase_started_at;
    switch (ev.kind) {
      case BreathingEvent::Kind::tick:
        if (exhaled >= tm.min_exhale()) detail::breathing_count_cycle(s, ev.t);
        return s;
      case BreathingEvent::Kind::press:
        if (exhaled >= tm.min_exhale()) {
          detail::breathing_count_cycle(s, ev.t);
          if (s.done()) return s;
        } else {
          detail::breathing_reset(s, ev.t);
        }
        detail::breathing_start_inhale(s, ev.t);
        return s;
      case BreathingEvent::Kind::release:
        return s;
    }
  }

  // idle or cycle_done
  if (ev.kind == BreathingEvent::Kind::press) detail::breathing_start_inhale(s, ev.t);
  return s;
}

inline MiniGameResult breathing_result(const BreathingState& s) {
  if (!s.done()) return abandoned_result(MiniGameKind::breathing);
  const int cycles = std::min(s.completed_cycles, kBreathingMaxCycles);
  return {MiniGameKind::breathing, true, kBreathingPointsPerCycle * cycles};
}

}  // namespace reverie
