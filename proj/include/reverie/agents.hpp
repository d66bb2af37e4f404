#pragma once

// The three agents: scene design, scene image, and the main NPC. Each is a
// prompt assembled from versioned template files plus a call through a
// pluggable chat provider.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "reverie/contract.hpp"
#include "reverie/minigames/grounding.hpp"
#include "reverie/session.hpp"

namespace reverie {

// ---------------------------------------------------------------------------
// Wire types

struct ChatMessage {
  std::string role;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  std::string purpose;  // "npc", "scene" or "grounding"; local routing only, never sent
};

inline nlohmann::json to_json_value(const ChatRequest& r) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : r.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", r.model}, {"messages", std::move(msgs)}, {"temperature", r.temperature}};
}

class ProviderError : public std::runtime_error {
 public:
  enum class Kind { Transport, Timeout, Status, EmptyScene, BadResponse, ScriptExhausted, MissingKey };

  ProviderError(Kind kind, const std::string& what, int status = 0)
      : std::runtime_error(what), kind_(kind), status_(status) {}

  Kind kind() const noexcept { return kind_; }
  int status() const noexcept { return status_; }

  /// Transport faults, timeouts, 429 and 5xx are worth retrying.
  bool retryable() const noexcept {
    switch (kind_) {
      case Kind::Transport:
      case Kind::Timeout: return true;
      case Kind::Status: return status_ == 429 || status_ >= 500;
      default: return false;
    }
  }

 private:
  Kind kind_;
  int status_;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  /// Returns the content of the first choice's message.
  virtual std::string complete(const ChatRequest& request) = 0;
  /// Returns an opaque image reference for the prompt.
  virtual std::string generate_image(const std::string& prompt);
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return out;
}

inline std::string placeholder_image_ref(std::string_view description) {
  return "placeholder:" + hex64(fnv1a64(description));
}

inline std::string ChatProvider::generate_image(const std::string& prompt) { return placeholder_image_ref(prompt); }

/// Replays fixture texts in order and records every request.
class ScriptedProvider final : public ChatProvider {
 public:
  explicit ScriptedProvider(std::vector<std::string> fixtures) : fixtures_(std::move(fixtures)) {}

  std::string complete(const ChatRequest& request) override {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
    if (next_ >= fixtures_.size()) {
      throw ProviderError(ProviderError::Kind::ScriptExhausted,
                          "scripted provider exhausted after " + std::to_string(fixtures_.size()) + " fixtures");
    }
    return fixtures_[next_++];
  }

  std::vector<ChatRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }
  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return requests_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> fixtures_;
  std::size_t next_ = 0;
  std::vector<ChatRequest> requests_;
};

/// Chooses a fixture by hashing the last message of the request, so the
/// same input always yields the same output (used for scene design).
class KeyedFixtureProvider final : public ChatProvider {
 public:
  explicit KeyedFixtureProvider(std::vector<std::string> fixtures) : fixtures_(std::move(fixtures)) {
    if (fixtures_.empty()) throw std::invalid_argument("KeyedFixtureProvider needs at least one fixture");
  }

  std::string complete(const ChatRequest& request) override {
    const std::string key = request.messages.empty() ? std::string() : request.messages.back().content;
    return fixtures_[fnv1a64(key) % fixtures_.size()];
  }

 private:
  std::vector<std::string> fixtures_;
};

/// Dispatches requests to a provider per agent purpose.
class RoutingProvider final : public ChatProvider {
 public:
  RoutingProvider& route(const std::string& purpose, std::shared_ptr<ChatProvider> provider) {
    routes_[purpose] = std::move(provider);
    return *this;
  }

  std::string complete(const ChatRequest& request) override {
    auto it = routes_.find(request.purpose);
    if (it == routes_.end()) {
      throw ProviderError(ProviderError::Kind::BadResponse, "no provider for purpose '" + request.purpose + "'");
    }
    return it->second->complete(request);
  }

 private:
  std::map<std::string, std::shared_ptr<ChatProvider>> routes_;
};

// ---------------------------------------------------------------------------
// Retry with exponential backoff

struct RetryPolicy {
  int max_retries = 3;
  double base_delay_s = 0.5;
  double factor = 2.0;
  double jitter = 0.25;  // fraction of the nominal delay, drawn uniformly in [0, jitter)
};

using Sleeper = std::function<void(double seconds)>;

inline void real_sleep(double seconds) {
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

/// Delay before retry k is base * factor^k * (1 + u), u in [0, jitter).
/// With jitter < factor - 1 the schedule is non-decreasing.
inline double backoff_delay(const RetryPolicy& p, int retry, std::mt19937_64& rng) {
  const double nominal = p.base_delay_s * std::pow(p.factor, retry);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return nominal * (1.0 + p.jitter * u);
}

template <typename F>
auto with_retries(F&& call, const RetryPolicy& policy, const Sleeper& sleep, std::mt19937_64& rng,
                  int* attempts_out = nullptr) -> decltype(call()) {
  for (int attempt = 0;; ++attempt) {
    if (attempts_out) *attempts_out = attempt + 1;
    try {
      return call();
    } catch (const ProviderError& e) {
      if (!e.retryable() || attempt >= policy.max_retries) throw;
      sleep(backoff_delay(policy, attempt, rng));
    }
  }
}

// ---------------------------------------------------------------------------
// Prompt templates

#ifndef REVERIE_PROMPT_DIR
#define REVERIE_PROMPT_DIR "prompts/v1"
#endif

class PromptLibrary {
 public:
  static PromptLibrary load(const std::filesystem::path& dir = REVERIE_PROMPT_DIR) {
    PromptLibrary lib;
    if (!std::filesystem::is_directory(dir)) {
      throw std::runtime_error("prompt directory not found: " + dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() != ".txt") continue;
      std::ifstream in(entry.path());
      std::stringstream ss;
      ss << in.rdbuf();
      lib.templates_[entry.path().stem().string()] = ss.str();
    }
    for (const char* required : {"npc_system", "progress_first_round", "progress_later_round", "session_context",
                                 "player_turn", "repair_reminder", "scene_system", "scene_request", "scene_image",
                                 "grounding_image", "grounding_eval", "safety_message", "opening"}) {
      if (!lib.templates_.count(required)) {
        throw std::runtime_error(std::string("prompt template missing: ") + required);
      }
    }
    return lib;
  }

  const std::string& raw(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw std::out_of_range("unknown prompt template: " + name);
    return it->second;
  }

  /// Substitutes {{key}} placeholders. Values are inserted verbatim and are
  /// never rescanned, so player text cannot inject placeholders.
  std::string render(const std::string& name, const std::map<std::string, std::string>& vars = {}) const {
    const std::string& tpl = raw(name);
    std::string out;
    out.reserve(tpl.size());
    std::size_t pos = 0;
    while (pos < tpl.size()) {
      auto open = tpl.find("{{", pos);
      if (open == std::string::npos) {
        out.append(tpl, pos);
        break;
      }
      auto close = tpl.find("}}", open + 2);
      if (close == std::string::npos) throw std::runtime_error("unterminated placeholder in " + name);
      out.append(tpl, pos, open - pos);
      const std::string key = tpl.substr(open + 2, close - open - 2);
      auto v = vars.find(key);
      if (v == vars.end()) throw std::runtime_error("no value for placeholder '" + key + "' in " + name);
      out += v->second;
      pos = close + 2;
    }
    while (!out.empty() && (out.back() == '\n' || out.back() == ' ')) out.pop_back();
    return out;
  }

 private:
  std::map<std::string, std::string> templates_;
};

struct PromptBundle {
  std::string system_text;
  std::vector<ChatMessage> context_messages;
  std::string user_text;
};

/// NPC prompt for the round about to be played (1-based round_number).
inline PromptBundle build_npc_system_prompt(const PromptLibrary& lib, const PlayerProfile& profile,
                                            const SceneSpec& scene, int round_number,
                                            const std::vector<DialogueRound>& history = {},
                                            int cooldown_rounds = 5) {
  PromptBundle b;
  const std::string progress = lib.render(round_number <= 1 ? "progress_first_round" : "progress_later_round");
  b.system_text = lib.render("npc_system", {{"progress_rule", progress},
                                            {"cooldown_rounds", std::to_string(cooldown_rounds)}});
  b.context_messages.push_back(
      {"user", lib.render("session_context", {{"age", std::to_string(profile.age)},
                                              {"gender", profile.gender},
                                              {"identity", profile.identity},
                                              {"stressor_text", profile.stressor_text},
                                              {"scene_name", scene.name},
                                              {"scene_description", scene.description}})});
  for (const auto& r : history) {
    b.context_messages.push_back({"user", lib.render("player_turn", {{"player_input", r.player_input}})});
    b.context_messages.push_back({"assistant", serialize_npc_turn(r.turn.turn)});
  }
  return b;
}

// ---------------------------------------------------------------------------
// Gateway

struct ProviderConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-5.2";
  std::string image_model = "gpt-image-1";
  std::string api_key_env = "REVERIE_API_KEY";
  double timeout_s = 30.0;
  int max_retries = 3;
  double temperature = 0.7;

  void validate() const {
    if (!(timeout_s > 0.0)) throw std::invalid_argument("provider.timeout_s must be positive");
    if (max_retries < 0) throw std::invalid_argument("provider.max_retries must be >= 0");
  }
};

struct NpcTurnResponse {
  std::string raw;  // the text that parsed
  NpcTurn turn;
  bool repaired = false;
  int provider_calls = 0;
};

class AgentGateway {
 public:
  AgentGateway(std::shared_ptr<ChatProvider> provider, ProviderConfig config, PromptLibrary prompts,
               Sleeper sleeper = real_sleep, std::uint64_t jitter_seed = 0x5eed)
      : provider_(std::move(provider)),
        config_(std::move(config)),
        prompts_(std::move(prompts)),
        sleeper_(std::move(sleeper)),
        jitter_seed_(jitter_seed) {
    config_.validate();
  }

  const PromptLibrary& prompts() const noexcept { return prompts_; }
  const ProviderConfig& config() const noexcept { return config_; }
  ChatProvider& provider() noexcept { return *provider_; }

  RetryPolicy retry_policy() const {
    RetryPolicy p;
    p.max_retries = config_.max_retries;
    return p;
  }

  /// Scene name and description derived from the player's background.
  SceneSpec generate_scene(const PlayerProfile& profile) {
    ChatRequest req{config_.model_name,
                    {{"system", prompts_.render("scene_system")},
                     {"user", prompts_.render("scene_request", {{"age", std::to_string(profile.age)},
                                                                {"gender", profile.gender},
                                                                {"identity", profile.identity},
                                                                {"stressor_text", profile.stressor_text}})}},
                    config_.temperature,
                    "scene"};
    const std::string raw = call(req);
    SceneSpec scene;
    try {
      auto doc = nlohmann::json::parse(detail::unwrap_document(raw));
      scene.name = doc.value("scene_name", "");
      scene.description = doc.value("scene_description", "");
    } catch (const nlohmann::json::exception&) {
    }
    if (detail::trim(scene.name).empty() || detail::trim(scene.description).empty()) {
      throw ProviderError(ProviderError::Kind::EmptyScene, "scene agent returned no usable scene");
    }
    return scene;
  }

  std::string request_scene_image(const std::string& description) {
    if (detail::trim(description).empty()) throw std::invalid_argument("scene description must not be empty");
    const std::string prompt = prompts_.render("scene_image", {{"description", description}});
    auto rng = next_rng();
    return with_retries([&] { return provider_->generate_image(prompt); }, retry_policy(), sleeper_, rng);
  }

  std::string request_grounding_image() {
    const std::string prompt = prompts_.render("grounding_image");
    auto rng = next_rng();
    return with_retries([&] { return provider_->generate_image(prompt); }, retry_policy(), sleeper_, rng);
  }

  /// One NPC round: the model's text is parsed here; a malformed reply gets
  /// exactly one repair request before the ContractError surfaces.
  NpcTurnResponse request_npc_turn(PromptBundle bundle, const std::string& player_input) {
    bundle.user_text = prompts_.render("player_turn", {{"player_input", player_input}});
    ChatRequest req{config_.model_name, {}, config_.temperature, "npc"};
    req.messages.push_back({"system", bundle.system_text});
    for (const auto& m : bundle.context_messages) req.messages.push_back(m);
    req.messages.push_back({"user", bundle.user_text});

    NpcTurnResponse out;
    std::string raw = call(req);
    ++out.provider_calls;
    try {
      out.turn = parse_npc_turn(raw);
      out.raw = std::move(raw);
      return out;
    } catch (const ContractError&) {
    }
    req.messages.push_back({"assistant", raw});
    req.messages.push_back({"user", prompts_.render("repair_reminder")});
    raw = call(req);
    ++out.provider_calls;
    out.turn = parse_npc_turn(raw);  // second failure propagates
    out.raw = std::move(raw);
    out.repaired = true;
    return out;
  }

  /// 0-5 quality rating of a grounding form from the NPC agent.
  double grade_grounding(const GroundingForm& form) {
    nlohmann::json answers = to_json_value(form);
    answers.erase("image_ref");
    ChatRequest req{config_.model_name,
                    {{"system", prompts_.render("grounding_eval")}, {"user", answers.dump()}},
                    config_.temperature,
                    "grounding"};
    auto doc = nlohmann::json::parse(detail::unwrap_document(call(req)));
    const auto& q = doc.at("quality");
    if (!q.is_number()) throw ProviderError(ProviderError::Kind::BadResponse, "quality is not a number");
    return std::clamp(q.get<double>(), 0.0, kGroundingPointsCap);
  }

 private:
  std::string call(const ChatRequest& req) {
    auto rng = next_rng();
    return with_retries([&] { return provider_->complete(req); }, retry_policy(), sleeper_, rng);
  }

  // Each call draws jitter from its own stream so the gateway can be shared
  // across sessions.
  std::mt19937_64 next_rng() { return std::mt19937_64(jitter_seed_ ^ detail::splitmix64(calls_++)); }

  std::shared_ptr<ChatProvider> provider_;
  ProviderConfig config_;
  PromptLibrary prompts_;
  Sleeper sleeper_;
  std::uint64_t jitter_seed_;
  std::atomic<std::uint64_t> calls_{0};
};

/// Grounding rating by the NPC agent, falling back to the offline heuristic
/// when the provider fails or answers out of contract.
class AgentGroundingEvaluator final : public GroundingEvaluator {
 public:
  explicit AgentGroundingEvaluator(AgentGateway& gateway) : gateway_(gateway) {}

  double quality(const GroundingForm& form) override {
    try {
      return gateway_.grade_grounding(form);
    } catch (const std::exception&) {
      HeuristicGroundingEvaluator fallback;
      return fallback.quality(form);
    }
  }

 private:
  AgentGateway& gateway_;
};

}  // namespace reverie
