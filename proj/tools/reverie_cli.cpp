// reverie: play, simulate, analyze, serve and score questionnaires.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

// Eigen before httplib: <resolv.h> defines a macro that collides with
// Eigen parameter names.
#include "reverie/stats/analysis.hpp"
#include "reverie/stats/synthetic.hpp"

#include <httplib.h>

#include "reverie/config.hpp"
#include "reverie/http_api.hpp"
#include "reverie/http_provider.hpp"
#include "reverie/service.hpp"
#include "reverie/simulate.hpp"

namespace {

using namespace reverie;

AppConfig app_config(const std::string& path) {
  if (path.empty()) {
    KeyValues none;
    return config_from_key_values(none);
  }
  return load_config(path);
}

std::shared_ptr<AgentGateway> make_gateway(const AppConfig& cfg, const std::string& scripted) {
  std::shared_ptr<ChatProvider> provider;
  const std::string fixtures = scripted.empty() ? cfg.scripted_fixtures : scripted;
  if (!fixtures.empty()) {
    provider = scripted_provider_from_file(fixtures);
  } else {
    provider = std::make_shared<HttpChatProvider>(cfg.provider);
  }
  return std::make_shared<AgentGateway>(provider, cfg.provider, PromptLibrary::load(cfg.prompts_dir));
}

// ---------------------------------------------------------------------------
// play

void print_board(const Match3Board& b) {
  std::cout << "   ";
  for (int c = 0; c < b.width; ++c) std::cout << ' ' << c;
  std::cout << '\n';
  for (int r = 0; r < b.height; ++r) {
    std::cout << ' ' << r << ' ';
    for (int c = 0; c < b.width; ++c) std::cout << ' ' << static_cast<char>('A' + b.at({r, c}));
    std::cout << '\n';
  }
}

void print_status(const SessionState& s) {
  std::cout << "[round " << s.round_index << " | score " << s.cumulative_score << "/" << s.config.pass_threshold
            << " | progress " << static_cast<int>(progress_fraction(s) * 100.0) << "%]\n";
}

bool read_line(const std::string& prompt, std::string& line) {
  std::cout << prompt << std::flush;
  return static_cast<bool>(std::getline(std::cin, line));
}

void play_minigame(SessionDriver& driver) {
  const auto& game = *driver.state().active_minigame;
  std::string line;
  switch (game.kind) {
    case MiniGameKind::breathing:
      std::cout << "Breathing exercise: enter 'press T', 'release T' or 'tick T' (seconds), or 'quit'.\n"
                   "Hold while you inhale (4 s) and hold your breath (7 s), release to exhale (8 s).\n";
      break;
    case MiniGameKind::match3:
      std::cout << "Match-3: enter a chain as row col pairs, e.g. '0 0 0 1 0 2', or 'quit'.\n";
      break;
    case MiniGameKind::five_senses:
      std::cout << "Grounding: name 5 things you see, 4 you touch, 3 you hear, 2 you smell, 1 you taste.\n";
      break;
    case MiniGameKind::none:
      return;
  }
  while (driver.state().phase == SessionPhase::mini_game_active) {
    const auto& active = *driver.state().active_minigame;
    try {
      if (active.kind == MiniGameKind::five_senses) {
        GroundingForm form;
        form.image_ref = active.image_ref;
        const std::pair<const char*, int> groups[] = {{"see", 5}, {"touch", 4}, {"hear", 3}, {"smell", 2}, {"taste", 1}};
        std::vector<std::string>* lists[] = {&form.see_items, &form.touch_items, &form.hear_items, &form.smell_items,
                                             &form.taste_items};
        for (std::size_t g = 0; g < 5; ++g) {
          for (int i = 0; i < groups[g].second; ++i) {
            if (!read_line(std::string("  ") + groups[g].first + " " + std::to_string(i + 1) + ": ", line)) {
              driver.minigame(MiniGameFinish{});
              return;
            }
            lists[g]->push_back(line);
          }
        }
        const auto rep = driver.minigame(GroundingSubmit{std::move(form)});
        if (rep.result) std::cout << "Grounding bonus: " << rep.bonus << '\n';
        continue;
      }
      if (active.kind == MiniGameKind::match3) print_board(std::get<Match3Game>(active.state).board);
      if (!read_line("game> ", line) || line == "quit") {
        const auto rep = driver.minigame(MiniGameFinish{});
        if (rep.result) std::cout << (rep.result->completed ? "Completed" : "Left early") << ", bonus " << rep.bonus << '\n';
        return;
      }
      std::istringstream in(line);
      if (active.kind == MiniGameKind::breathing) {
        std::string kind;
        double t = 0;
        if (!(in >> kind >> t) || (kind != "press" && kind != "release" && kind != "tick")) {
          std::cout << "expected press/release/tick and a time\n";
          continue;
        }
        auto k = kind == "press" ? BreathingEvent::Kind::press
                                 : (kind == "release" ? BreathingEvent::Kind::release : BreathingEvent::Kind::tick);
        const auto rep = driver.minigame(BreathingEvent{k, t});
        if (driver.state().active_minigame) {
          const auto& st = std::get<BreathingState>(driver.state().active_minigame->state);
          std::cout << "phase " << to_string(st.phase) << ", cycles " << st.completed_cycles << "/" << st.target_cycles << '\n';
        }
        if (rep.result) std::cout << "Breathing bonus: " << rep.bonus << '\n';
      } else {
        Match3ChainInput chain;
        int r = 0, c = 0;
        while (in >> r >> c) chain.path.push_back({r, c});
        const auto rep = driver.minigame(chain);
        std::cout << (rep.eliminated ? "cleared " + std::to_string(rep.eliminated) : std::string("not a valid chain")) << '\n';
        if (rep.result) std::cout << "Match-3 bonus: " << rep.bonus << '\n';
      }
    } catch (const std::exception& e) {
      std::cout << "rejected: " << e.what() << '\n';
    }
  }
}

int run_play(const std::string& config_path, const std::string& scripted, const std::string& log_path, std::uint64_t seed) {
  const auto cfg = app_config(config_path);
  auto gateway = make_gateway(cfg, scripted);
  std::shared_ptr<EventSink> sink = std::make_shared<MemoryEventLog>();
  if (!log_path.empty()) sink = std::make_shared<JsonlEventLog>(log_path);
  SessionDriver driver(gateway, sink);

  PlayerProfile profile;
  std::string line;
  if (!read_line("Age: ", line)) return 0;
  profile.age = std::stoi(line);
  if (!read_line("Gender: ", line)) return 0;
  profile.gender = line;
  if (!read_line("Identity (e.g. student): ", line)) return 0;
  profile.identity = line;
  if (!read_line("What has been stressing you lately? ", line)) return 0;
  profile.stressor_text = line;

  driver.start(profile, cfg.engine, seed, "cli-" + hex64(seed));
  const auto& scene = *driver.state().scene;
  std::cout << "\n== " << scene.name << " ==\n" << scene.description << "\n\n" << driver.state().pending_npc_prompt << "\n";

  while (!is_terminal(driver.state().phase)) {
    if (driver.state().phase == SessionPhase::mini_game_active) {
      play_minigame(driver);
      continue;
    }
    if (!read_line("> ", line) || line == "/exit") {
      driver.exit();
      break;
    }
    try {
      driver.turn(line);
    } catch (const SessionError& e) {
      std::cout << "(" << e.what() << ")\n";
      continue;
    }
    const auto& s = driver.state();
    if (s.safety_round) {
      std::cout << "\n" << s.safety_round->turn.turn.npc_reply << "\n";
      break;
    }
    const auto& last = s.transcript.back();
    std::cout << "\n" << last.turn.turn.npc_reply << "\n";
    for (const auto& sug : last.turn.turn.suggested_replies) std::cout << "  * " << sug << '\n';
    print_status(s);
  }
  std::cout << "Session ended: " << to_string(driver.state().phase) << " with score " << driver.state().cumulative_score << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int run_simulate(const std::string& personas, int sessions, std::uint64_t seed, const std::string& log_dir,
                 const std::string& out, const std::string& config_path) {
  SimulationOptions opt;
  opt.sessions = sessions;
  opt.seed = seed;
  opt.log_dir = log_dir;
  if (!config_path.empty()) {
    const auto cfg = load_config(config_path);
    opt.engine = cfg.engine;
    opt.prompts_dir = cfg.prompts_dir;
  } else {
    opt.engine.lexicon = RiskLexicon::load(std::string(REVERIE_DATA_DIR) + "/safety_lexicon.txt");
  }
  const auto run = run_simulation(load_personas(personas), opt);
  const std::string text = run.summary.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << text;
  }
  return 0;
}

int run_replay(const std::string& log) {
  const auto r = replay_file(log);
  if (!r.warning.empty()) std::cerr << "warning: " << r.warning << '\n';
  std::cout << to_json_value(r.state).dump(2) << '\n';
  return 0;
}

int run_analyze(const std::string& data, const std::string& out) {
  const auto ds = stats::load_dataset(data);
  const auto report = stats::analyze_trial(ds);
  stats::write_report(report, out);
  std::cout << "wrote " << (std::filesystem::path(out) / "report.json").string() << " and report.md\n";
  return 0;
}

int run_synth(const std::string& out, std::uint64_t seed) {
  stats::write_dataset(stats::generate_trial_dataset(seed), out);
  std::cout << "wrote synthetic trial data to " << out << '\n';
  return 0;
}

/// CSV: header row, then one respondent per row: id followed by the items.
int run_score_scales(const std::string& instrument, const std::string& csv) {
  const auto& spec = stats::instrument_spec(instrument);
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot read " + csv);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(csv + ": missing header row");
  bool header_written = false;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = stats::detail::split_csv_line(line, csv, row);
    if (static_cast<int>(fields.size()) != spec.items + 1) {
      throw stats::DatasetError(csv, row, "", "expected id plus " + std::to_string(spec.items) + " items");
    }
    std::vector<int> items;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      items.push_back(stats::detail::parse_number<int>(fields[i], csv, row, "item" + std::to_string(i)));
    }
    std::map<std::string, double> scores;
    try {
      scores = stats::score_instrument(instrument, items);
    } catch (const stats::StatsError& e) {
      throw stats::DatasetError(csv, row, "", e.what());
    }
    if (!header_written) {
      std::cout << "id";
      for (const auto& [k, v] : scores) std::cout << ',' << k;
      std::cout << '\n';
      header_written = true;
    }
    std::cout << fields[0];
    for (const auto& [k, v] : scores) std::cout << ',' << nlohmann::json(v).dump();
    std::cout << '\n';
  }
  return 0;
}

httplib::Server* g_server = nullptr;

int run_serve(const std::string& config_path, const std::string& scripted) {
  const auto cfg = app_config(config_path);
  SessionService service(cfg, make_gateway(cfg, scripted));
  for (const auto& w : service.restore()) std::cerr << "restore: " << w << '\n';
  httplib::Server server;
  mount_routes(server, service);
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  std::cerr << "listening on " << cfg.host << ":" << cfg.port << " (" << service.size() << " sessions restored)\n";
  if (!server.listen(cfg.host, cfg.port)) {
    std::cerr << "error: cannot listen on " << cfg.host << ":" << cfg.port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reverie: LLM-driven stress-relief role-play game and trial analysis"};
  app.require_subcommand(1);

  std::string config, scripted, log, personas, log_dir, out, data, instrument, csv;
  std::uint64_t seed = 7;
  int sessions = 50;

  auto* play = app.add_subcommand("play", "Play a session in the terminal");
  play->add_option("--config", config, "Configuration file")->check(CLI::ExistingFile);
  play->add_option("--scripted", scripted, "Offline fixture file instead of the live provider")->check(CLI::ExistingFile);
  play->add_option("--log", log, "Append the session's events to this JSONL file");
  play->add_option("--seed", seed, "Session seed");

  auto* sim = app.add_subcommand("simulate", "Run persona-driven sessions against scripted agents");
  sim->add_option("--personas", personas, "Persona file")->required()->check(CLI::ExistingFile);
  sim->add_option("--sessions", sessions, "Number of sessions")->check(CLI::NonNegativeNumber);
  sim->add_option("--seed", seed, "Run seed");
  sim->add_option("--log-dir", log_dir, "Write one JSONL log per session here");
  sim->add_option("--out", out, "Write the summary here instead of stdout");
  sim->add_option("--config", config, "Configuration file (engine and prompts)")->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("replay", "Rebuild a session from its event log and print the state");
  rep->add_option("--log", log, "Session log")->required()->check(CLI::ExistingFile);

  auto* ana = app.add_subcommand("analyze", "Analyze trial data");
  ana->add_option("--data", data, "Directory with participants.csv, scales.csv, vas.csv")->required()->check(CLI::ExistingDirectory);
  ana->add_option("--out", out, "Output directory")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--config", config, "Configuration file")->check(CLI::ExistingFile);
  serve->add_option("--scripted", scripted, "Offline fixture file")->check(CLI::ExistingFile);

  auto* score = app.add_subcommand("score-scales", "Score questionnaire responses");
  score->add_option("--instrument", instrument, "pss10, cerq, geq, sus or paesis")
      ->required()
      ->check(CLI::IsMember({"pss10", "cerq", "geq", "sus", "paesis"}));
  score->add_option("--csv", csv, "CSV with id followed by item columns")->required()->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("synth-data", "Write a synthetic trial dataset");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--seed", seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*play) return run_play(config, scripted, log, seed);
    if (*sim) return run_simulate(personas, sessions, seed, log_dir, out, config);
    if (*rep) return run_replay(log);
    if (*ana) return run_analyze(data, out);
    if (*serve) return run_serve(config, scripted);
    if (*score) return run_score_scales(instrument, csv);
    if (*synth) return run_synth(out, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
