// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Numeric checks compare against the oracles in oracles.hpp.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "reverie/stats/analysis.hpp"
#include "reverie/stats/linear_model.hpp"
#include "reverie/stats/lmm.hpp"
#include "reverie/stats/scales.hpp"
#include "reverie/stats/synthetic.hpp"

#include "reverie/contract.hpp"
#include "reverie/minigames/breathing.hpp"
#include "reverie/minigames/match3.hpp"
#include "reverie/session.hpp"
#include "reverie/simulate.hpp"

using namespace reverie;
using namespace reverie::stats;
using Steady = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void run(const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
  Outcome out;
  const auto t0 = Steady::now();
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Steady::now() - t0).count();
  if (secs >= limit_seconds) {
    out.ok = false;
    out.detail += " [over time limit " + std::to_string(limit_seconds) + " s]";
  }
  if (!out.ok) ++failures;
  std::printf("%s  %-28s %10.3f ms  %s\n", out.ok ? "PASS" : "FAIL", name.c_str(), secs * 1e3, out.detail.c_str());
  std::fflush(stdout);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome reference_turn() {
  static const std::string doc = read_file(REVERIE_TEST_DATA "/reference_turn.json");
  Outcome o;
  const auto t0 = Steady::now();
  const auto turn = parse_npc_turn(doc);
  const double recomputed = compute_round_score(turn.components());
  const auto rec = reconcile_turn(turn);
  const double us = std::chrono::duration<double, std::micro>(Steady::now() - t0).count();
  o.ok = recomputed == 10.0 && rec.turn.round_score == 10.0 && !rec.score_corrected && !rec.turn.safe_mode &&
         rec.turn.mini_game_call == MiniGameKind::none && us < 1000.0;
  o.detail = "score=" + fmt("%.17g", recomputed) + " safe_mode=" + (rec.turn.safe_mode ? "true" : "false") +
             " call=" + std::string(to_string(rec.turn.mini_game_call)) + " parse+score " + fmt("%.1f us", us);
  return o;
}

Outcome score_grid() {
  int combos = 0, violations = 0;
  for (int gate : {0, 1}) {
    for (double d : kDifficultyFactors) {
      for (int f : {0, 1}) {
        for (int c = 0; c <= 5; ++c) {
          for (int e = 0; e <= 5; ++e) {
            for (int p = 0; p <= 5; ++p) {
              ++combos;
              const ScoreComponents sc{gate, d, f, c, e, p};
              const double s = compute_round_score(sc);
              const bool in_range = s == 0.0 || (s >= 0.8 && s <= 12.0);
              if (!in_range || ((s == 0.0) != (gate == 0))) ++violations;
              if (f == 1) {
                for (int axis = 0; axis < 3; ++axis) {
                  ScoreComponents up = sc;
                  int& v = axis == 0 ? up.ct : axis == 1 ? up.et : up.pt;
                  if (v == 5) continue;
                  ++v;
                  if (compute_round_score(up) < s) ++violations;
                }
              }
            }
          }
        }
      }
    }
  }
  return {combos == 2592 && violations == 0,
          std::to_string(combos) + " combinations, " + std::to_string(violations) + " violations"};
}

NpcTurn scripted_turn(int c, int e, int p, MiniGameKind call) {
  NpcTurn t;
  t.npc_reply = "Go on.";
  t.ct = c;
  t.et = e;
  t.pt = p;
  t.mini_game_call = call;
  t.round_score = compute_round_score(t.components());
  return t;
}

Outcome cooldown() {
  std::mt19937_64 rng(77);
  long starts = 0, suppressed = 0, violations = 0;
  const PlayerProfile profile{21, "female", "student", "Exams next week."};
  for (int seq = 0; seq < 10000; ++seq) {
    EngineConfig cfg;
    cfg.pass_threshold = 1e9;
    auto s = enter_scene(create_session(profile, cfg, static_cast<std::uint64_t>(seq), "acc"), {"Room", "A room.", ""});
    std::optional<int> last;
    const int rounds = 10 + static_cast<int>(rng() % 30);
    for (int r = 0; r < rounds; ++r) {
      const auto call = static_cast<MiniGameKind>(rng() % 4);
      auto out = submit_player_input(s, "x", reconcile_turn(scripted_turn(rng() % 6, rng() % 6, rng() % 6, call)));
      s = std::move(out.state);
      if (out.minigame_suppressed) ++suppressed;
      if (!out.minigame_started) continue;
      if (last && s.round_index - *last < 6) ++violations;
      last = s.round_index;
      ++starts;
      s = apply_minigame_result(s, abandoned_result(*out.minigame_started));
    }
  }
  return {violations == 0 && starts > 0 && suppressed > 0,
          "10000 sequences, " + std::to_string(starts) + " starts, " + std::to_string(suppressed) +
              " suppressed, " + std::to_string(violations) + " gap violations"};
}

Outcome sus_fixture() {
  // Target mean per-item contributions; each times 10 is
  // the contribution total across ten respondents.
  const std::array<double, 10> target{3.8, 2.2, 3.7, 1.6, 3.6, 1.9, 3.0, 1.5, 3.3, 1.6};
  std::vector<std::vector<int>> responses(10, std::vector<int>(10));
  for (std::size_t item = 0; item < 10; ++item) {
    const int total = static_cast<int>(std::lround(target[item] * 10));
    for (int r = 0; r < 10; ++r) {
      const int contribution = total / 10 + (r < total % 10 ? 1 : 0);
      responses[r][item] = item % 2 == 0 ? contribution + 1 : 5 - contribution;
    }
  }
  // Through the trial pipeline: replace the SUS answers of the ten
  // intervention participants.
  auto ds = generate_trial_dataset(1);
  std::erase_if(ds.scale_responses, [](const ScaleResponse& r) { return r.instrument == "sus"; });
  int k = 0;
  for (const auto& p : ds.participants) {
    if (p.group == "intervention") ds.scale_responses.push_back({p.id, "T2", "sus", responses[k++]});
  }
  const auto rep = analyze_trial(ds);
  bool means_ok = true;
  for (std::size_t i = 0; i < 10; ++i) means_ok &= std::fabs(rep.sus.contribution_means[i] - target[i]) < 1e-12;
  const auto direct = sus_from_contributions(target);
  const double total = std::accumulate(target.begin(), target.end(), 0.0) * 2.5;
  const bool ok = means_ok && rep.sus.n == 10 && std::fabs(rep.sus.usability - 71.875) <= 1e-9 &&
                  std::fabs(rep.sus.learnability - 40.0) <= 1e-9 && std::fabs(direct.usability - 71.875) <= 1e-9 &&
                  std::fabs(direct.learnability - 40.0) <= 1e-9 && std::fabs(direct.total - 65.5) <= 1e-9 &&
                  std::fabs(total - 65.5) <= 1e-9 && std::fabs(direct.total - 71.5) > 1.0;
  return {ok, "usability=" + fmt("%.12g", rep.sus.usability) + " learnability=" + fmt("%.12g", rep.sus.learnability) +
                  " total=" + fmt("%.12g", direct.total) + " (71.5 is not reachable from these item means)"};
}

Outcome cronbach() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  bool exact = true;
  std::string detail;
  for (int k : {2, 4, 8}) {
    for (int rep = 0; rep < 20; ++rep) {
      const int n = 5 + rep * 7;
      Eigen::MatrixXd m(n, k);
      for (int i = 0; i < n; ++i) {
        const double v = static_cast<double>(1 + rng() % 5);
        for (int j = 0; j < k; ++j) m(i, j) = v;
      }
      if ((m.col(0).array() == m(0, 0)).all()) m(0, Eigen::all).setConstant(m(0, 0) + 1.0);
      exact &= cronbach_alpha(m) == 1.0;
    }
  }
  Eigen::MatrixXd ind(5000, 6);
  for (Eigen::Index i = 0; i < ind.rows(); ++i)
    for (Eigen::Index j = 0; j < ind.cols(); ++j) ind(i, j) = z(rng);
  const double a = cronbach_alpha(ind);
  return {exact && std::fabs(a) < 0.05, std::string("duplicated items alpha==1.0: ") + (exact ? "yes" : "no") +
                                            "; independent 5000x6 alpha=" + fmt("%.4f", a)};
}

Outcome ols_oracle() {
  Gaussian g(2024);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int p = 2 + rep % 4, n = p + 3 + rep % 17;
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    std::vector<std::vector<double>> rows(n, std::vector<double>(p));
    std::vector<double> yv(n);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      for (int j = 1; j < p; ++j) X(i, j) = g(0.0, 1.0 + j);
      y(i) = g(2.0, 1.5);
      for (int j = 1; j < p; ++j) y(i) += 0.4 * j * X(i, j);
      for (int j = 0; j < p; ++j) rows[i][j] = X(i, j);
      yv[i] = y(i);
    }
    const auto f = ols_fit(X, y);
    const auto beta = oracle::normal_equation_solution(rows, yv);
    for (int j = 0; j < p; ++j) worst = std::max(worst, std::fabs(f.coefficients[j] - beta[j]) / (1.0 + std::fabs(beta[j])));
  }
  // Null ANCOVA: post score unrelated to group.
  Gaussian h(99);
  int rejections = 0;
  const int replicates = 5000;
  for (int rep = 0; rep < replicates; ++rep) {
    std::vector<double> t0, t2;
    std::vector<int> grp;
    for (int i = 0; i < 20; ++i) {
      grp.push_back(i < 10);
      t0.push_back(h(29.0, 3.5));
      t2.push_back(0.7 * t0.back() + h(8.0, 2.5));
    }
    rejections += ancova(t2, grp, t0).p("group") < 0.05;
  }
  const double rate = static_cast<double>(rejections) / replicates;
  return {worst <= 1e-8 && rate >= 0.03 && rate <= 0.07,
          "max coefficient deviation " + fmt("%.2e", worst) + "; type-I rate " + fmt("%.4f", rate)};
}

double grid_best(const ClusteredData& d, int points) {
  double best = -std::numeric_limits<double>::infinity();
  const double lo = std::log(kThetaMin), hi = std::log(kThetaMax);
  for (int i = 0; i < points; ++i) {
    const double theta = std::exp(lo + (hi - lo) * i / (points - 1));
    best = std::max(best, lmm_profile(d, theta).log_likelihood);
  }
  return best;
}

Outcome lmm_recovery() {
  const int seeds = 500;
  int covered = 0, detected = 0, grid_ok = 0, dense_ok = 0, dense_checked = 0;
  int coef_within[4] = {0, 0, 0, 0};
  const VasModel m;  // 10 + 10 persons x 14 days, beta3 = -0.12, sigma_u 0.5, sigma_e 0.4
  for (int seed = 0; seed < seeds; ++seed) {
    Gaussian g(50000 + static_cast<std::uint64_t>(seed));
    const auto s = simulate_vas(g, m);
    const auto f = fit_lmm_random_intercept(s.records, s.group);
    bool all = true;
    for (std::size_t k = 0; k < 4; ++k) {
      const bool in = std::fabs(f.coefficients[k] - m.beta[k]) <= 3.0 * f.standard_errors[k];
      coef_within[k] += in;
      all &= in;
    }
    covered += all;
    detected += f.p("group:day") < 0.05 && f.coef("group:day") < 0.0;

    const auto d = vas_design(s.records, s.group);
    grid_ok += *f.log_likelihood >= grid_best(d, 1000) - 1e-6;
    if (seed % 25 == 0) {
      // The profile itself against a dense-covariance evaluation.
      ++dense_checked;
      bool same = true;
      for (double theta : {0.01, 1.0, 100.0}) {
        const double a = lmm_profile(d, theta).log_likelihood;
        const double b = oracle::dense_profile_loglik(d.X, d.y, d.cluster, theta);
        same &= std::fabs(a - b) <= 1e-8 * std::fabs(b);
      }
      dense_ok += same;
    }
  }
  bool each = true;
  for (int c : coef_within) each &= c >= seeds * 9 / 10;
  const bool ok = each && detected >= seeds * 9 / 10 && grid_ok == seeds && dense_ok == dense_checked;
  std::string d = "within 3 SE per coefficient: ";
  for (int k = 0; k < 4; ++k) d += std::to_string(coef_within[k]) + (k < 3 ? "/" : "");
  d += " of 500 (all four: " + std::to_string(covered) + "); interaction detected " + std::to_string(detected) +
       "; beats 1000-point grid " + std::to_string(grid_ok) + "; dense profile agreement " +
       std::to_string(dense_ok) + "/" + std::to_string(dense_checked);
  return {ok, d};
}

Outcome sigma_u_zero() {
  double worst = 0.0;
  for (int seed = 0; seed < 50; ++seed) {
    Gaussian g(700 + static_cast<std::uint64_t>(seed));
    VasModel m;
    m.sigma_u = 0.0;
    const auto s = simulate_vas(g, m);
    const auto d = vas_design(s.records, s.group);
    const auto lmm = fit_random_intercept(d);
    const auto ols = ols_fit(d.X, d.y);
    for (std::size_t k = 0; k < 4; ++k) worst = std::max(worst, std::fabs(lmm.coefficients[k] - ols.coefficients[k]));
  }
  return {worst <= 1e-6, "50 datasets, max |beta_lmm - beta_ols| = " + fmt("%.2e", worst)};
}

Outcome calibrated_trend() {
  const int sims = 1000;
  int both = 0, ancova_neg = 0, lmm_neg = 0;
  for (int seed = 0; seed < sims; ++seed) {
    const auto rep = analyze_trial(generate_trial_dataset(90000 + static_cast<std::uint64_t>(seed)));
    const bool a = !rep.pss_ancova.skipped && rep.pss_ancova.fit.coef("group") < 0.0;
    const bool l = !rep.vas_lmm.skipped && rep.vas_lmm.fit.coef("group:day") < 0.0;
    ancova_neg += a;
    lmm_neg += l;
    both += a && l;
  }
  return {both >= sims * 95 / 100, "negative ANCOVA group " + std::to_string(ancova_neg) + ", negative LMM group:day " +
                                       std::to_string(lmm_neg) + ", both " + std::to_string(both) + " of 1000"};
}

Outcome match3() {
  std::mt19937_64 rng(31);
  int disagreements = 0;
  for (int i = 0; i < 10000; ++i) {
    Match3Board b;
    b.width = 1 + static_cast<int>(rng() % 4);
    b.height = 1 + static_cast<int>(rng() % 4);
    b.kinds = 2 + static_cast<int>(rng() % 5);
    b.cells.resize(static_cast<std::size_t>(b.width * b.height));
    for (auto& c : b.cells) c = static_cast<int>(rng() % b.kinds);
    if (rng() % 5 == 0) b.cells[rng() % b.cells.size()] = kEmptyTile;
    disagreements += match3_has_moves(b) != oracle::has_chain_by_enumeration(b);
  }
  int occupancy_errors = 0, determinism_errors = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    Match3Game a{match3_generate(seed)}, b{match3_generate(seed)};
    for (int move = 0; move < 25; ++move) {
      const auto chain = match3_find_chain(a.board);
      const int ea = match3_play(a, chain), eb = match3_play(b, chain);
      occupancy_errors += ea != static_cast<int>(chain.size());
      occupancy_errors += static_cast<int>(a.board.cells.size()) != a.board.width * a.board.height;
      for (int v : a.board.cells) occupancy_errors += v < 0 || v >= a.board.kinds;
      determinism_errors += ea != eb;
    }
    determinism_errors += to_json_value(a.board).dump() != to_json_value(b.board).dump();
    determinism_errors += rng_state_string(a.board.rng) != rng_state_string(b.board.rng);
  }
  return {disagreements == 0 && occupancy_errors == 0 && determinism_errors == 0,
          "10000 boards, " + std::to_string(disagreements) + " disagreements; occupancy errors " +
              std::to_string(occupancy_errors) + "; determinism errors " + std::to_string(determinism_errors)};
}

Outcome breathing() {
  int matched = 0, total = 0;
  std::string bad;
  for (const auto& tl : oracle::breathing_timelines()) {
    ++total;
    BreathingState s;
    for (const auto& e : tl.events) s = breathing_step(s, e);
    if (s.completed_cycles == tl.expected_cycles) {
      ++matched;
    } else {
      bad += " [" + tl.name + "]";
    }
  }
  return {total == 20 && matched == 20, std::to_string(matched) + "/" + std::to_string(total) + " timelines" + bad};
}

Outcome end_to_end() {
  const auto dir = std::filesystem::temp_directory_path() / "reverie_acceptance_logs";
  std::filesystem::remove_all(dir);
  SimulationOptions opt;
  opt.sessions = 50;
  opt.seed = 7;
  opt.log_dir = dir;
  opt.engine.lexicon = RiskLexicon::load(REVERIE_DATA_DIR "/safety_lexicon.txt");
  const auto run = run_simulation(load_personas(REVERIE_DATA_DIR "/personas.json"), opt);
  int completed = 0, safe = 0, other = 0, replay_mismatch = 0, safe_scored = 0;
  for (const auto& s : run.sessions) {
    const auto& st = s.final_state;
    if (st.phase == SessionPhase::completed) {
      ++completed;
    } else if (st.phase == SessionPhase::safe_mode_terminated) {
      ++safe;
      double sum = 0.0;
      for (const auto& r : st.transcript) sum += r.score_awarded + r.minigame_bonus;
      if (!st.safety_round || st.safety_round->score_awarded != 0.0 || st.safety_round->minigame_bonus != 0.0 ||
          std::fabs(st.cumulative_score - sum) > 1e-9) {
        ++safe_scored;
      }
    } else {
      ++other;
    }
    const auto replayed = replay_session(read_event_log(s.log_path).events);
    if (!(replayed.state == st) || to_json_value(replayed.state).dump() != to_json_value(st).dump()) ++replay_mismatch;
  }
  std::filesystem::remove_all(dir);
  return {run.sessions.size() == 50 && other == 0 && replay_mismatch == 0 && safe_scored == 0,
          std::to_string(completed) + " passed, " + std::to_string(safe) + " safe mode, " + std::to_string(other) +
              " unfinished; replay mismatches " + std::to_string(replay_mismatch) + "; safe-mode rounds scored " +
              std::to_string(safe_scored)};
}

}  // namespace

int main() {
  run("reference-turn", 5.0, reference_turn);
  run("score-grid", 1.0, score_grid);
  run("cooldown", 10.0, cooldown);
  run("sus-fixture", 5.0, sus_fixture);
  run("cronbach-alpha", 10.0, cronbach);
  run("ols-ancova-oracle", 60.0, ols_oracle);
  run("lmm-recovery", 120.0, lmm_recovery);
  run("lmm-sigma-u-zero", 10.0, sigma_u_zero);
  run("calibrated-trend", 120.0, calibrated_trend);
  run("match3-oracle", 30.0, match3);
  run("breathing-timelines", 1.0, breathing);
  run("end-to-end-simulate", 60.0, end_to_end);
  std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
