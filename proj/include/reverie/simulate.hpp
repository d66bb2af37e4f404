#pragma once

// Offline batch play: persona-driven sessions against scripted providers.
// Every random choice flows from the run seed, so identical arguments give
// identical summaries and logs.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reverie/agents.hpp"
#include "reverie/driver.hpp"
#include "reverie/event_log.hpp"
#include "reverie/minigames/match3.hpp"

namespace reverie {

struct PersonaStyle {
  int ct_lo = 0, ct_hi = 5;
  int et_lo = 0, et_hi = 5;
  int pt_lo = 0, pt_hi = 5;
  double penalty_zero_rate = 0.0;
};

struct Persona {
  std::string name;
  PlayerProfile profile;
  std::vector<std::string> lines;
  PersonaStyle style;
  double minigame_rate = 0.2;
  double malformed_rate = 0.0;
  double misreport_rate = 0.0;
  double abandon_rate = 0.0;
  int risk_round = 0;  // 0: never
  std::string risk_via = "provider";
  std::string risk_line;
};

struct PersonaSet {
  std::vector<std::string> scene_fixtures;  // raw scene-agent outputs
  std::vector<Persona> personas;
};

inline PersonaSet personas_from_json(const nlohmann::json& j) {
  PersonaSet set;
  for (const auto& s : j.at("scenes")) set.scene_fixtures.push_back(s.dump());
  for (const auto& p : j.at("personas")) {
    Persona x;
    x.name = p.at("name").get<std::string>();
    x.profile = profile_from_json(p.at("profile"));
    x.lines = p.at("lines").get<std::vector<std::string>>();
    if (x.lines.empty()) throw std::invalid_argument("persona " + x.name + " has no lines");
    const auto& st = p.at("style");
    auto range = [&](const char* key, int& lo, int& hi) {
      if (auto it = st.find(key); it != st.end()) {
        lo = (*it)[0].get<int>();
        hi = (*it)[1].get<int>();
        if (lo < 0 || hi > kRubricMax || lo > hi) throw std::invalid_argument("bad rubric range in " + x.name);
      }
    };
    range("ct", x.style.ct_lo, x.style.ct_hi);
    range("et", x.style.et_lo, x.style.et_hi);
    range("pt", x.style.pt_lo, x.style.pt_hi);
    x.style.penalty_zero_rate = st.value("penalty_zero_rate", 0.0);
    x.minigame_rate = p.value("minigame_rate", x.minigame_rate);
    x.malformed_rate = p.value("malformed_rate", x.malformed_rate);
    x.misreport_rate = p.value("misreport_rate", x.misreport_rate);
    x.abandon_rate = p.value("abandon_rate", x.abandon_rate);
    x.risk_round = p.value("risk_round", 0);
    x.risk_via = p.value("risk_via", x.risk_via);
    x.risk_line = p.value("risk_line", "");
    set.personas.push_back(std::move(x));
  }
  if (set.personas.empty() || set.scene_fixtures.empty()) throw std::invalid_argument("persona file needs scenes and personas");
  return set;
}

inline PersonaSet load_personas(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read persona file " + path.string());
  return personas_from_json(nlohmann::json::parse(in));
}

/// Offline provider from a fixture file:
///   {"scenes": [{scene_name, scene_description}, ...], "npc": [turn, ...]}
/// NPC entries are raw strings (sent verbatim, malformed ones included) or
/// objects (serialized). Scenes are chosen by hashing the request.
inline std::shared_ptr<ChatProvider> scripted_provider_from_json(const nlohmann::json& j) {
  std::vector<std::string> scenes, npc;
  for (const auto& s : j.at("scenes")) scenes.push_back(s.is_string() ? s.get<std::string>() : s.dump());
  for (const auto& t : j.at("npc")) npc.push_back(t.is_string() ? t.get<std::string>() : t.dump());
  auto router = std::make_shared<RoutingProvider>();
  router->route("scene", std::make_shared<KeyedFixtureProvider>(std::move(scenes)))
      .route("npc", std::make_shared<ScriptedProvider>(std::move(npc)));
  return router;
}

inline std::shared_ptr<ChatProvider> scripted_provider_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read fixture file " + path.string());
  return scripted_provider_from_json(nlohmann::json::parse(in));
}

struct SimulationOptions {
  int sessions = 50;
  std::uint64_t seed = 7;
  EngineConfig engine;
  std::string prompts_dir = REVERIE_PROMPT_DIR;
  std::filesystem::path log_dir;  // empty: keep logs in memory
  int max_rounds = 200;
};

struct SimulatedSession {
  std::string persona;
  SessionState final_state;
  std::vector<SessionEvent> events;
  std::filesystem::path log_path;
  int provider_calls = 0;
  int repaired_turns = 0;
  int score_corrections = 0;
};

struct SimulationRun {
  nlohmann::json summary;
  std::vector<SimulatedSession> sessions;
};

namespace detail {

class SimRng {
 public:
  explicit SimRng(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  int between(int lo, int hi) { return lo + draw_below(rng_, hi - lo + 1); }
  bool chance(double p) { return uniform() < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[static_cast<std::size_t>(draw_below(rng_, static_cast<int>(v.size())))]; }

 private:
  std::mt19937_64 rng_;
};

inline std::string malformed_fixture(SimRng& rng) {
  static const std::vector<std::string> variants{
      "Sure! Here is my reply: I hear you, that sounds hard.",
      "{\"npc_reply\": \"That sounds difficult\", \"safety_gate\": 1, \"difficulty_factor\": 1.0",
      "{\"npc_reply\": \"Let's look at that thought.\", \"safety_gate\": 1, \"difficulty_factor\": 0.9, "
      "\"penalty_score\": 1, \"Ct\": 3, \"Et\": 3, \"Pt\": 3, \"round_score\": 9, \"mini_game_call\": \"none\", "
      "\"safe_mode\": false}",
      "{\"npc_reply\": \"Tell me more.\", \"safety_gate\": 1, \"difficulty_factor\": 1.0, \"penalty_score\": 1, "
      "\"Ct\": 7, \"Et\": 3, \"Pt\": 2, \"round_score\": 10, \"mini_game_call\": \"none\", \"safe_mode\": false}"};
  return rng.pick(variants);
}

/// NPC outputs for one session, in the order the provider will be asked.
inline std::vector<std::string> npc_fixtures(const Persona& p, SimRng& rng, int max_rounds) {
  static const std::vector<std::string> replies{
      "That sounds like a lot to carry. What goes through your mind when it feels heaviest?",
      "I notice a strong thought there. What evidence supports it, and what evidence doesn't?",
      "You are already seeing it from a new angle. What would you tell a friend in the same spot?",
      "That is a balanced way to put it. What is one small step you could take today?",
      "Let's slow down for a moment. How does your body feel right now?"};
  static const std::vector<double> factors{0.8, 1.0, 1.2};
  static const std::vector<MiniGameKind> games{MiniGameKind::breathing, MiniGameKind::match3,
                                               MiniGameKind::five_senses};
  std::vector<std::string> out;
  for (int round = 1; round <= max_rounds; ++round) {
    if (rng.chance(p.malformed_rate)) out.push_back(malformed_fixture(rng));
    NpcTurn t;
    t.npc_reply = rng.pick(replies);
    t.difficulty_factor = rng.pick(factors);
    t.penalty_score = rng.chance(p.style.penalty_zero_rate) ? 0 : 1;
    t.ct = rng.between(p.style.ct_lo, p.style.ct_hi);
    t.et = rng.between(p.style.et_lo, p.style.et_hi);
    t.pt = round == 1 ? 2 : rng.between(p.style.pt_lo, p.style.pt_hi);
    if (rng.chance(p.minigame_rate)) t.mini_game_call = rng.pick(games);
    t.suggested_replies = {"I think I can try that.", "I'm not sure where to start."};
    if (p.risk_round == round && p.risk_via == "provider") {
      t.safety_gate = 0;
      t.safe_mode = true;
      t.mini_game_call = MiniGameKind::none;
      t.npc_reply = "I'm really glad you told me. Please reach out to a local hospital or mental health service now.";
    }
    t.round_score = compute_round_score(t.components());
    if (rng.chance(p.misreport_rate)) {
      // Typical provider slip: forgetting the cap, or dropping the multiplier.
      t.round_score = rng.chance(0.5) ? t.difficulty_factor * evaluation_score(t.components())
                                      : std::min(evaluation_score(t.components()), kEvaluationCap);
    }
    out.push_back(serialize_npc_turn(t));
  }
  return out;
}

inline std::vector<BreathingEvent> breathing_timeline(SimRng& rng, int cycles) {
  std::vector<BreathingEvent> evs;
  double t = 0.0;
  for (int c = 0; c < cycles; ++c) {
    evs.push_back({BreathingEvent::Kind::press, t});
    const double release = t + 11.0 + (rng.uniform() * 1.8 - 0.9);
    evs.push_back({BreathingEvent::Kind::release, release});
    t = release + 8.0 + (rng.uniform() * 1.8 - 0.9);
  }
  evs.push_back({BreathingEvent::Kind::tick, t});
  return evs;
}

inline GroundingForm grounding_answers(SimRng& rng) {
  static const std::vector<std::string> seen{"a blue kite", "an oak tree", "a red bench", "clouds", "a cat", "a lamp post", "a fountain"};
  static const std::vector<std::string> touch{"rough bark", "cool grass", "a warm mug", "smooth stone", "soft wool"};
  static const std::vector<std::string> hear{"birdsong", "wind", "distant traffic", "rustling leaves"};
  static const std::vector<std::string> smell{"fresh bread", "rain", "cut grass"};
  static const std::vector<std::string> taste{"mint tea", "an apple"};
  GroundingForm f;
  for (int i = 0; i < 5; ++i) f.see_items.push_back(rng.pick(seen));
  for (int i = 0; i < 4; ++i) f.touch_items.push_back(rng.pick(touch));
  for (int i = 0; i < 3; ++i) f.hear_items.push_back(rng.pick(hear));
  for (int i = 0; i < 2; ++i) f.smell_items.push_back(rng.pick(smell));
  f.taste_items.push_back(rng.pick(taste));
  return f;
}

inline void play_minigame(SessionDriver& driver, SimRng& rng, double abandon_rate) {
  const auto kind = driver.state().active_minigame->kind;
  if (rng.chance(abandon_rate)) {
    driver.minigame(MiniGameFinish{});
    return;
  }
  switch (kind) {
    case MiniGameKind::breathing: {
      const int cycles = std::get<BreathingState>(driver.state().active_minigame->state).target_cycles;
      for (const auto& ev : breathing_timeline(rng, cycles)) {
        if (driver.state().phase != SessionPhase::mini_game_active) break;
        driver.minigame(ev);
      }
      break;
    }
    case MiniGameKind::match3:
      while (driver.state().phase == SessionPhase::mini_game_active) {
        const auto& game = std::get<Match3Game>(driver.state().active_minigame->state);
        auto path = match3_find_chain(game.board);
        if (path.empty()) break;
        driver.minigame(Match3ChainInput{std::move(path)});
      }
      break;
    case MiniGameKind::five_senses: {
      GroundingForm form = grounding_answers(rng);
      form.image_ref = driver.state().active_minigame->image_ref;
      driver.minigame(GroundingSubmit{std::move(form)});
      break;
    }
    case MiniGameKind::none:
      break;
  }
  if (driver.state().phase == SessionPhase::mini_game_active) driver.minigame(MiniGameFinish{});
}

class CountingProvider final : public ChatProvider {
 public:
  explicit CountingProvider(std::shared_ptr<ChatProvider> inner) : inner_(std::move(inner)) {}
  std::string complete(const ChatRequest& r) override {
    ++calls;
    return inner_->complete(r);
  }
  int calls = 0;

 private:
  std::shared_ptr<ChatProvider> inner_;
};

}  // namespace detail

inline SimulationRun run_simulation(const PersonaSet& personas, const SimulationOptions& opt) {
  if (opt.sessions < 0) throw std::invalid_argument("sessions must be >= 0");
  const auto prompts = PromptLibrary::load(opt.prompts_dir);
  auto scenes = std::make_shared<KeyedFixtureProvider>(personas.scene_fixtures);
  if (!opt.log_dir.empty()) std::filesystem::create_directories(opt.log_dir);

  SimulationRun run;
  for (int i = 0; i < opt.sessions; ++i) {
    const Persona& persona = personas.personas[static_cast<std::size_t>(i) % personas.personas.size()];
    const std::uint64_t session_seed = detail::splitmix64(opt.seed ^ detail::splitmix64(static_cast<std::uint64_t>(i) + 1));
    detail::SimRng rng(session_seed);

    auto npc = std::make_shared<detail::CountingProvider>(
        std::make_shared<ScriptedProvider>(detail::npc_fixtures(persona, rng, opt.max_rounds)));
    auto router = std::make_shared<RoutingProvider>();
    router->route("npc", npc).route("scene", scenes);
    ProviderConfig pc;
    pc.max_retries = 0;
    auto gateway = std::make_shared<AgentGateway>(router, pc, prompts, [](double) {});

    SimulatedSession sim;
    sim.persona = persona.name;
    const std::string id = "sim-" + hex64(session_seed);
    std::shared_ptr<EventSink> sink;
    auto memory = std::make_shared<MemoryEventLog>();
    if (opt.log_dir.empty()) {
      sink = memory;
    } else {
      sim.log_path = opt.log_dir / (id + ".jsonl");
      std::filesystem::remove(sim.log_path);
      sink = std::make_shared<JsonlEventLog>(sim.log_path);
    }
    SessionDriver driver(gateway, sink, LogicalClock());
    driver.start(persona.profile, opt.engine, session_seed, id);

    int rounds = 0;
    while (!is_terminal(driver.state().phase)) {
      if (driver.state().phase == SessionPhase::mini_game_active) {
        detail::play_minigame(driver, rng, persona.abandon_rate);
        continue;
      }
      if (rounds >= opt.max_rounds) {
        driver.exit();
        break;
      }
      ++rounds;
      std::string text = persona.lines[static_cast<std::size_t>(rounds - 1) % persona.lines.size()];
      if (persona.risk_via == "lexicon" && persona.risk_round == rounds && !persona.risk_line.empty()) {
        text = persona.risk_line;
      }
      const auto report = driver.turn(text);
      sim.repaired_turns += report.repaired ? 1 : 0;
      sim.score_corrections += report.score_corrected ? 1 : 0;
    }
    sim.provider_calls = npc->calls;
    sim.final_state = driver.state();
    if (opt.log_dir.empty()) {
      sim.events = memory->events();
    } else {
      sim.events = read_event_log(sim.log_path).events;
    }
    run.sessions.push_back(std::move(sim));
  }

  // Summary
  int completed = 0, safe = 0, exited = 0;
  int zero_score_safe = 0;
  std::vector<int> rounds_to_completion;
  std::map<std::string, int> started, results_completed, results_abandoned;
  int suppressed = 0, repaired = 0, corrections = 0;
  std::map<std::string, nlohmann::json> per_persona;
  for (const auto& s : run.sessions) {
    const auto& st = s.final_state;
    switch (st.phase) {
      case SessionPhase::completed:
        ++completed;
        rounds_to_completion.push_back(st.round_index);
        break;
      case SessionPhase::safe_mode_terminated:
        ++safe;
        if (st.safety_round && st.safety_round->score_awarded == 0.0) ++zero_score_safe;
        break;
      default: ++exited; break;
    }
    suppressed += st.minigames_suppressed;
    repaired += s.repaired_turns;
    corrections += s.score_corrections;
    for (const auto& e : s.events) {
      if (e.kind == event_kind::minigame_start && !e.payload.value("suppressed", false)) {
        ++started[e.payload.at("game").get<std::string>()];
      } else if (e.kind == event_kind::minigame_result) {
        auto& bucket = e.payload.at("completed").get<bool>() ? results_completed : results_abandoned;
        ++bucket[e.payload.at("game").get<std::string>()];
      }
    }
    auto& pp = per_persona[s.persona];
    if (pp.is_null()) pp = {{"sessions", 0}, {"completed", 0}, {"safe_mode", 0}};
    pp["sessions"] = pp["sessions"].get<int>() + 1;
    if (st.phase == SessionPhase::completed) pp["completed"] = pp["completed"].get<int>() + 1;
    if (st.phase == SessionPhase::safe_mode_terminated) pp["safe_mode"] = pp["safe_mode"].get<int>() + 1;
  }

  nlohmann::json rounds = nullptr;
  if (!rounds_to_completion.empty()) {
    auto sorted = rounds_to_completion;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0;
    for (int r : sorted) sum += r;
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    rounds = {{"mean", sum / static_cast<double>(n)}, {"median", median}, {"min", sorted.front()}, {"max", sorted.back()}};
  }
  const double total = opt.sessions > 0 ? static_cast<double>(opt.sessions) : 1.0;
  run.summary = {{"sessions", opt.sessions},
                 {"seed", opt.seed},
                 {"pass_threshold", opt.engine.pass_threshold},
                 {"completed", completed},
                 {"safe_mode", safe},
                 {"safe_mode_zero_score", zero_score_safe},
                 {"exited_or_unfinished", exited},
                 {"safe_mode_rate", safe / total},
                 {"rounds_to_completion", rounds},
                 {"minigames",
                  {{"started", started},
                   {"completed", results_completed},
                   {"abandoned", results_abandoned},
                   {"suppressed_by_cooldown", suppressed}}},
                 {"repaired_turns", repaired},
                 {"score_corrections", corrections},
                 {"per_persona", per_persona}};
  return run;
}

}  // namespace reverie
