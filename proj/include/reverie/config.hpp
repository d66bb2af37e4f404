#pragma once

// Flat key/value configuration. Keys are dotted ("provider.base_url") or
// grouped under [section] headers; '#' starts a comment; values may be quoted.

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "reverie/agents.hpp"
#include "reverie/safety.hpp"
#include "reverie/session.hpp"

#ifndef REVERIE_DATA_DIR
#define REVERIE_DATA_DIR "data"
#endif

namespace reverie {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& in, const std::string& source = "config") {
  KeyValues kv;
  std::string line;
  std::string section;
  int line_no = 0;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(source + ":" + std::to_string(line_no) + ": bad section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (!value.empty() && (value.front() == '"' || value.front() == '\'')) {
      const char q = value.front();
      auto close = value.find(q, 1);
      if (close == std::string::npos) throw ConfigError(source + ":" + std::to_string(line_no) + ": unterminated string");
      value = value.substr(1, close - 1);
    } else if (auto hash = value.find(" #"); hash != std::string::npos) {
      value = trim(value.substr(0, hash));
    }
    if (!section.empty()) key = section + "." + key;
    kv[key] = value;
  }
  return kv;
}

struct AppConfig {
  ProviderConfig provider;
  EngineConfig engine;
  std::string lexicon_path = std::string(REVERIE_DATA_DIR) + "/safety_lexicon.txt";
  std::string prompts_dir = REVERIE_PROMPT_DIR;
  std::string data_dir = "reverie-data";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string scripted_fixtures;  // non-empty: run offline against this fixture file

  void validate() const {
    try {
      provider.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!(engine.pass_threshold > 0.0)) throw ConfigError("engine.pass_threshold must be positive");
    if (engine.cooldown_rounds < 0) throw ConfigError("engine.cooldown_rounds must be >= 0");
    if (port <= 0 || port > 65535) throw ConfigError("service.port out of range");
  }
};

/// Builds a validated configuration and loads the safety lexicon.
inline AppConfig config_from_key_values(const KeyValues& kv) {
  AppConfig c;
  auto get = [&](const char* key, auto& field) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    using T = std::decay_t<decltype(field)>;
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        field = it->second;
      } else if constexpr (std::is_same_v<T, int>) {
        std::size_t used = 0;
        field = std::stoi(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing characters");
      } else {
        std::size_t used = 0;
        field = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing characters");
      }
    } catch (const std::logic_error&) {
      throw ConfigError(std::string("bad value for ") + key + ": '" + it->second + "'");
    }
  };
  get("provider.base_url", c.provider.base_url);
  get("provider.model", c.provider.model_name);
  get("provider.image_model", c.provider.image_model);
  get("provider.api_key_env", c.provider.api_key_env);
  get("provider.timeout_s", c.provider.timeout_s);
  get("provider.max_retries", c.provider.max_retries);
  get("provider.temperature", c.provider.temperature);
  get("provider.scripted_fixtures", c.scripted_fixtures);
  get("engine.pass_threshold", c.engine.pass_threshold);
  get("engine.cooldown_rounds", c.engine.cooldown_rounds);
  get("safety.lexicon_path", c.lexicon_path);
  get("prompts.dir", c.prompts_dir);
  get("service.data_dir", c.data_dir);
  get("service.host", c.host);
  get("service.port", c.port);
  c.validate();
  try {
    c.engine.lexicon = RiskLexicon::load(c.lexicon_path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return config_from_key_values(parse_key_values(in, path.string()));
}

}  // namespace reverie
