#pragma once

// Chat-completion provider over HTTP(S). The API key is read from the
// configured environment variable and only ever sent as the Authorization
// header to the configured base URL.

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "reverie/agents.hpp"

namespace reverie {

struct BaseUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix without trailing slash, e.g. "/v1"
};

inline BaseUrl split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("base_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  BaseUrl b;
  b.origin = url.substr(0, path_start);
  b.path = path_start == std::string::npos ? std::string() : url.substr(path_start);
  while (!b.path.empty() && b.path.back() == '/') b.path.pop_back();
  return b;
}

class HttpChatProvider final : public ChatProvider {
 public:
  explicit HttpChatProvider(ProviderConfig config) : config_(std::move(config)), base_(split_base_url(config_.base_url)) {
    config_.validate();
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key && *key) api_key_ = key;
  }

  std::string complete(const ChatRequest& request) override {
    auto body = post("/chat/completions", to_json_value(request));
    try {
      const auto& content = body.at("choices").at(0).at("message").at("content");
      if (!content.is_string()) throw ProviderError(ProviderError::Kind::BadResponse, "message content is not text");
      return content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(ProviderError::Kind::BadResponse, std::string("unexpected completion shape: ") + e.what());
    }
  }

  std::string generate_image(const std::string& prompt) override {
    auto body = post("/images/generations", {{"model", config_.image_model}, {"prompt", prompt}, {"n", 1}});
    try {
      const auto& item = body.at("data").at(0);
      if (item.contains("url")) return "url:" + item.at("url").get<std::string>();
      const auto& b64 = item.at("b64_json").get_ref<const std::string&>();
      return "b64sha:" + hex64(fnv1a64(b64));
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(ProviderError::Kind::BadResponse, std::string("unexpected image response: ") + e.what());
    }
  }

 private:
  nlohmann::json post(const std::string& endpoint, const nlohmann::json& payload) {
    if (api_key_.empty()) {
      throw ProviderError(ProviderError::Kind::MissingKey, "environment variable " + config_.api_key_env + " is not set");
    }
    httplib::Client client(base_.origin);
    const auto secs = static_cast<time_t>(config_.timeout_s);
    const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};

    auto res = client.Post(base_.path + endpoint, headers, payload.dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      throw ProviderError(timed_out ? ProviderError::Kind::Timeout : ProviderError::Kind::Transport,
                          "request to " + base_.origin + " failed: " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300) {
      throw ProviderError(ProviderError::Kind::Status, "provider returned HTTP " + std::to_string(res->status),
                          res->status);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProviderError(ProviderError::Kind::BadResponse, std::string("provider body is not JSON: ") + e.what());
    }
  }

  ProviderConfig config_;
  BaseUrl base_;
  std::string api_key_;
};

}  // namespace reverie
