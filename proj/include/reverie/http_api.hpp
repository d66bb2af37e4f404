#pragma once

#include <functional>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "reverie/service.hpp"

namespace reverie {

/// HTTP status for an exception escaping a handler.
inline int status_for(const std::exception& e) {
  if (dynamic_cast<const NotFound*>(&e)) return 404;
  if (const auto* se = dynamic_cast<const SessionError*>(&e)) {
    return se->code() == SessionError::Code::WrongPhase ? 409 : 400;
  }
  // A turn that stays malformed after the repair request is the provider's fault.
  if (dynamic_cast<const ProviderError*>(&e) || dynamic_cast<const ContractError*>(&e)) return 502;
  if (dynamic_cast<const StorageError*>(&e)) return 500;
  if (dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e) ||
      dynamic_cast<const std::out_of_range*>(&e)) {
    return 400;
  }
  return 500;
}

namespace detail {

inline void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline nlohmann::json body_json(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  return nlohmann::json::parse(req.body);
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, 200, f(req));
    } catch (const std::exception& e) {
      const int status = status_for(e);
      reply(res, status, {{"error", status == 500 ? std::string("internal error") : std::string(e.what())}});
    }
  };
}

}  // namespace detail

inline void mount_routes(httplib::Server& server, SessionService& service) {
  using detail::body_json;
  using detail::guarded;
  using Req = httplib::Request;

  server.Get("/healthz", guarded([&](const Req&) { return nlohmann::json{{"status", "ok"}, {"sessions", service.size()}}; }));
  server.Post("/sessions", guarded([&](const Req& r) { return service.create(body_json(r)); }));
  server.Get(R"(/sessions/([^/]+))", guarded([&](const Req& r) { return service.view(r.matches[1]); }));
  server.Get(R"(/sessions/([^/]+)/transcript)",
             guarded([&](const Req& r) { return service.transcript(r.matches[1]); }));
  server.Post(R"(/sessions/([^/]+)/turn)",
              guarded([&](const Req& r) { return service.turn(r.matches[1], body_json(r)); }));
  server.Post(R"(/sessions/([^/]+)/minigame/event)",
              guarded([&](const Req& r) { return service.minigame_event(r.matches[1], body_json(r)); }));
  server.Post(R"(/sessions/([^/]+)/exit)", guarded([&](const Req& r) { return service.exit(r.matches[1]); }));
  server.Post(R"(/sessions/([^/]+)/vas)",
              guarded([&](const Req& r) { return service.record_vas(r.matches[1], body_json(r)); }));
}

}  // namespace reverie
