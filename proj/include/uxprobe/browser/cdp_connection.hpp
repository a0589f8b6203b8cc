#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "uxprobe/net/websocket.hpp"

namespace uxprobe::browser {

// Resolves a browser endpoint to its websocket debugger URL. ws:// URLs pass
// through; http:// endpoints are queried at /json/version.
// Errors: kConnectionRefused, kHandshakeFailure (bad discovery document or an
// unsupported protocol major version).
std::string resolve_debugger_url(std::string_view endpoint, std::chrono::milliseconds timeout);

// One websocket connection speaking the DevTools command/response/event
// protocol. Single-threaded: events are delivered to the handler from inside
// call() and pump_until(), on the caller's thread.
class CdpConnection {
 public:
  using EventHandler = std::function<void(const nlohmann::json& event)>;

  static CdpConnection open(std::string_view ws_url, std::chrono::milliseconds timeout);

  CdpConnection(CdpConnection&&) noexcept = default;
  CdpConnection& operator=(CdpConnection&&) noexcept = default;

  void set_event_handler(EventHandler handler) { handler_ = std::move(handler); }

  // Sends one command and waits for its reply, dispatching events that
  // arrive meanwhile. Error replies throw Error(kProtocolError) carrying the
  // protocol message; a missing reply throws Error(kTimeout).
  nlohmann::json call(std::string_view method, nlohmann::json params, std::string_view session_id,
                      std::chrono::milliseconds timeout);

  // Dispatches incoming events until `done()` holds (true) or the deadline
  // passes (false).
  bool pump_until(const std::function<bool()>& done, std::chrono::steady_clock::time_point deadline);

  bool is_open() const { return socket_.is_open(); }
  void close() { socket_.close(); }

 private:
  explicit CdpConnection(net::WebSocket socket) : socket_(std::move(socket)) {}
  void dispatch(nlohmann::json message);

  net::WebSocket socket_;
  EventHandler handler_;
  long next_id_ = 1;
  std::map<long, nlohmann::json> replies_;
};

}  // namespace uxprobe::browser
