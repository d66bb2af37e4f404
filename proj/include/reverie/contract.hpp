#pragma once

// NPC turn contract: parsing and validation of the structured record the
// dialogue model returns each round, plus the authoritative round-score model.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace reverie {

enum class MiniGameKind { none, breathing, match3, five_senses };

inline std::string_view to_string(MiniGameKind k) {
  switch (k) {
    case MiniGameKind::none: return "none";
    case MiniGameKind::breathing: return "breathing";
    case MiniGameKind::match3: return "match3";
    case MiniGameKind::five_senses: return "five_senses";
  }
  return "none";
}

inline std::optional<MiniGameKind> mini_game_from_string(std::string_view s) {
  if (s == "none") return MiniGameKind::none;
  if (s == "breathing") return MiniGameKind::breathing;
  if (s == "match3") return MiniGameKind::match3;
  if (s == "five_senses") return MiniGameKind::five_senses;
  return std::nullopt;
}

/// Allowed difficulty multipliers. Anything else is a contract error.
inline constexpr std::array<double, 3> kDifficultyFactors{0.8, 1.0, 1.2};
inline constexpr int kRubricMax = 5;
inline constexpr double kEvaluationCap = 10.0;
inline constexpr std::size_t kMaxSuggestedReplies = 3;
inline constexpr std::size_t kMaxSuggestedReplyChars = 200;

struct ScoreComponents {
  int safety_gate = 1;
  double difficulty_factor = 1.0;
  int penalty_score = 1;
  int ct = 0;
  int et = 0;
  int pt = 0;

  bool operator==(const ScoreComponents&) const = default;
};

struct NpcTurn {
  std::string npc_reply;
  int safety_gate = 1;
  double difficulty_factor = 1.0;
  int penalty_score = 1;
  int ct = 0;
  int et = 0;
  int pt = 0;
  double round_score = 0.0;
  MiniGameKind mini_game_call = MiniGameKind::none;
  bool safe_mode = false;
  std::vector<std::string> suggested_replies;

  ScoreComponents components() const {
    return {safety_gate, difficulty_factor, penalty_score, ct, et, pt};
  }

  bool operator==(const NpcTurn&) const = default;
};

class ContractError : public std::runtime_error {
 public:
  enum class Kind { MalformedDocument, MissingField, OutOfDomain };

  ContractError(Kind kind, std::string field, std::string detail, std::string fragment)
      : std::runtime_error(describe(kind, field, detail)),
        kind_(kind),
        field_(std::move(field)),
        detail_(std::move(detail)),
        fragment_(std::move(fragment)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }
  /// Offending value (OutOfDomain) or parser message (MalformedDocument).
  const std::string& detail() const noexcept { return detail_; }
  /// Raw provider text the error was raised on, kept for logging.
  const std::string& fragment() const noexcept { return fragment_; }

 private:
  static std::string describe(Kind kind, const std::string& field, const std::string& detail) {
    switch (kind) {
      case Kind::MalformedDocument: return "malformed turn document: " + detail;
      case Kind::MissingField: return "missing field '" + field + "'";
      case Kind::OutOfDomain: return "field '" + field + "' out of domain: " + detail;
    }
    return "contract error";
  }

  Kind kind_;
  std::string field_;
  std::string detail_;
  std::string fragment_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

inline std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(
      s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

// Strips one level of markdown fencing and any prose around the outermost
// object braces.
inline std::string_view unwrap_document(std::string_view raw) {
  std::string_view s = trim(raw);
  if (s.substr(0, 3) == "```") {
    auto first_nl = s.find('\n');
    auto close = s.rfind("```");
    if (first_nl != std::string_view::npos && close != std::string_view::npos && close > first_nl) {
      s = trim(s.substr(first_nl + 1, close - first_nl - 1));
    }
  }
  if (!s.empty() && s.front() != '{') {
    auto open = s.find('{');
    auto close = s.rfind('}');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
      s = s.substr(open, close - open + 1);
    }
  }
  return s;
}

inline bool integral_value(const nlohmann::json& v, long long& out) {
  if (v.is_number_integer()) {
    out = v.get<long long>();
    return true;
  }
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 1e15) {
      out = static_cast<long long>(d);
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Parses and validates one NPC turn. Unknown fields are ignored.
inline NpcTurn parse_npc_turn(std::string_view raw) {
  using Kind = ContractError::Kind;
  const std::string fragment(raw.substr(0, 2048));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::unwrap_document(raw));
  } catch (const nlohmann::json::parse_error& e) {
    throw ContractError(Kind::MalformedDocument, "", e.what(), fragment);
  }
  if (!doc.is_object()) {
    throw ContractError(Kind::MalformedDocument, "", "top-level value is not an object", fragment);
  }

  auto require = [&](const char* name) -> const nlohmann::json& {
    auto it = doc.find(name);
    if (it == doc.end() || it->is_null()) throw ContractError(Kind::MissingField, name, "", fragment);
    return *it;
  };
  auto out_of_domain = [&](const char* name, const nlohmann::json& v) {
    return ContractError(Kind::OutOfDomain, name, v.dump(), fragment);
  };
  auto int_in = [&](const char* name, long long lo, long long hi) {
    const auto& v = require(name);
    long long x = 0;
    if (!detail::integral_value(v, x) || x < lo || x > hi) throw out_of_domain(name, v);
    return static_cast<int>(x);
  };

  NpcTurn t;
  {
    const auto& v = require("npc_reply");
    if (!v.is_string() || detail::trim(v.get_ref<const std::string&>()).empty()) {
      throw out_of_domain("npc_reply", v);
    }
    t.npc_reply = v.get<std::string>();
  }
  t.safety_gate = int_in("safety_gate", 0, 1);
  {
    const auto& v = require("difficulty_factor");
    if (!v.is_number()) throw out_of_domain("difficulty_factor", v);
    const double d = v.get<double>();
    auto match = std::find_if(kDifficultyFactors.begin(), kDifficultyFactors.end(),
                              [d](double f) { return std::fabs(d - f) < 1e-9; });
    if (match == kDifficultyFactors.end()) throw out_of_domain("difficulty_factor", v);
    t.difficulty_factor = *match;
  }
  t.penalty_score = int_in("penalty_score", 0, 1);
  t.ct = int_in("Ct", 0, kRubricMax);
  t.et = int_in("Et", 0, kRubricMax);
  t.pt = int_in("Pt", 0, kRubricMax);
  {
    const auto& v = require("round_score");
    if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < 0.0) {
      throw out_of_domain("round_score", v);
    }
    t.round_score = v.get<double>();
  }
  {
    const auto& v = require("mini_game_call");
    std::optional<MiniGameKind> k;
    if (v.is_string()) k = mini_game_from_string(v.get_ref<const std::string&>());
    if (!k) throw out_of_domain("mini_game_call", v);
    t.mini_game_call = *k;
  }
  {
    const auto& v = require("safe_mode");
    if (!v.is_boolean()) throw out_of_domain("safe_mode", v);
    t.safe_mode = v.get<bool>();
  }
  if (auto it = doc.find("suggested_replies"); it != doc.end() && !it->is_null()) {
    const auto& v = *it;
    if (!v.is_array() || v.size() > kMaxSuggestedReplies) throw out_of_domain("suggested_replies", v);
    for (const auto& item : v) {
      if (!item.is_string() ||
          detail::utf8_length(item.get_ref<const std::string&>()) > kMaxSuggestedReplyChars) {
        throw out_of_domain("suggested_replies", v);
      }
      t.suggested_replies.push_back(item.get<std::string>());
    }
  }
  return t;
}

inline nlohmann::json to_json_value(const NpcTurn& t) {
  nlohmann::json j{{"npc_reply", t.npc_reply},
                   {"safety_gate", t.safety_gate},
                   {"difficulty_factor", t.difficulty_factor},
                   {"penalty_score", t.penalty_score},
                   {"Ct", t.ct},
                   {"Et", t.et},
                   {"Pt", t.pt},
                   {"round_score", t.round_score},
                   {"mini_game_call", std::string(to_string(t.mini_game_call))},
                   {"safe_mode", t.safe_mode}};
  if (!t.suggested_replies.empty()) j["suggested_replies"] = t.suggested_replies;
  return j;
}

inline std::string serialize_npc_turn(const NpcTurn& t) { return to_json_value(t).dump(); }

/// Evaluation = 1 + F * (C + E + P), in [1, 16].
inline double evaluation_score(const ScoreComponents& c) {
  return 1.0 + static_cast<double>(c.penalty_score) * static_cast<double>(c.ct + c.et + c.pt);
}

/// Score = gate * difficulty * min(Evaluation, 10). Either 0 or in [0.8, 12].
inline double compute_round_score(const ScoreComponents& c) {
  return static_cast<double>(c.safety_gate) * c.difficulty_factor *
         std::min(evaluation_score(c), kEvaluationCap);
}

struct ReconciledTurn {
  NpcTurn turn;                  // round_score holds the locally computed value
  double reported_score = 0.0;   // what the provider claimed
  bool score_corrected = false;
  bool safety_normalized = false;  // gate/safe_mode/mini-game fields were made consistent

  bool operator==(const ReconciledTurn&) const = default;
};

/// Recomputes the round score locally and makes the safety fields agree.
/// A turn that signals danger through either safety_gate or safe_mode is
/// treated as gated.
inline ReconciledTurn reconcile_turn(const NpcTurn& turn) {
  ReconciledTurn r;
  r.turn = turn;
  r.reported_score = turn.round_score;

  if (turn.safety_gate == 0 || turn.safe_mode) {
    if (turn.safety_gate != 0 || !turn.safe_mode || turn.mini_game_call != MiniGameKind::none) {
      r.safety_normalized = true;
    }
    r.turn.safety_gate = 0;
    r.turn.safe_mode = true;
    r.turn.mini_game_call = MiniGameKind::none;
  }

  const double local = compute_round_score(r.turn.components());
  if (std::fabs(local - turn.round_score) > 1e-9) r.score_corrected = true;
  r.turn.round_score = local;
  return r;
}

inline nlohmann::json to_json_value(const ReconciledTurn& r) {
  return {{"turn", to_json_value(r.turn)},
          {"reported_score", r.reported_score},
          {"score_corrected", r.score_corrected},
          {"safety_normalized", r.safety_normalized}};
}

}  // namespace reverie
