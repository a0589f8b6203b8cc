#include "uxprobe/browser/cdp_connection.hpp"

#include <sys/socket.h>

#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/url.hpp"

namespace uxprobe::browser {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string http_get_body(const Url& url, std::chrono::milliseconds timeout) {
  net::Socket sock = net::tcp_connect(url.host, url.effective_port(), timeout);
  try {
    sock.send_all("GET " + url.path_and_query() + " HTTP/1.1\r\nHost: " + url.authority() +
                  "\r\nConnection: close\r\nAccept: application/json\r\n\r\n");
    std::string body;
    std::string head = net::read_http_head(sock, body, timeout);
    if (!head.starts_with("HTTP/1.1 200") && !head.starts_with("HTTP/1.0 200")) {
      throw Error(ErrorCode::kHandshakeFailure, "discovery request failed: " + head.substr(0, head.find("\r\n")));
    }
    std::size_t expected = std::string::npos;
    std::string lower = to_lower(head);
    if (auto pos = lower.find("content-length:"); pos != std::string::npos) {
      expected = std::stoul(lower.substr(pos + 15));
    }
    auto deadline = Clock::now() + timeout;
    while (body.size() < expected) {
      auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (remaining.count() <= 0 || !sock.wait_readable(remaining)) break;
      char buf[4096];
      ssize_t n = ::recv(sock.fd(), buf, sizeof(buf), 0);
      if (n <= 0) break;
      body.append(buf, static_cast<std::size_t>(n));
    }
    return body;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kHandshakeFailure) throw;
    throw Error(ErrorCode::kHandshakeFailure, e.what());
  }
}

}  // namespace

std::string resolve_debugger_url(std::string_view endpoint, std::chrono::milliseconds timeout) {
  auto url = Url::parse(endpoint);
  if (!url || url->host.empty()) throw Error(ErrorCode::kConfigError, "invalid browser endpoint '" + std::string(endpoint) + "'");
  if (url->scheme == "ws") return url->to_string();
  if (url->scheme != "http") {
    throw Error(ErrorCode::kConfigError, "browser endpoint must be ws:// or http://, got '" + std::string(endpoint) + "'");
  }
  Url version = *url;
  version.path = "/json/version";
  version.has_query = false;
  version.query.clear();
  version.has_fragment = false;
  json doc = json::parse(http_get_body(version, timeout), nullptr, false);
  if (!doc.is_object() || !doc.contains("webSocketDebuggerUrl") || !doc["webSocketDebuggerUrl"].is_string()) {
    throw Error(ErrorCode::kHandshakeFailure, "no webSocketDebuggerUrl at " + version.to_string());
  }
  std::string protocol = doc.value("Protocol-Version", "");
  if (!protocol.starts_with("1.")) {
    throw Error(ErrorCode::kHandshakeFailure, "unsupported protocol version '" + protocol + "'");
  }
  return doc["webSocketDebuggerUrl"].get<std::string>();
}

CdpConnection CdpConnection::open(std::string_view ws_url, std::chrono::milliseconds timeout) {
  return CdpConnection(net::WebSocket::connect(ws_url, timeout));
}

void CdpConnection::dispatch(json message) {
  if (auto id = message.find("id"); id != message.end() && id->is_number_integer()) {
    long key = id->get<long>();
    replies_[key] = std::move(message);
    return;
  }
  if (message.contains("method") && handler_) handler_(message);
}

json CdpConnection::call(std::string_view method, json params, std::string_view session_id,
                         std::chrono::milliseconds timeout) {
  long id = next_id_++;
  json command;
  command["id"] = id;
  command["method"] = method;
  command["params"] = params.is_null() ? json::object() : std::move(params);
  if (!session_id.empty()) command["sessionId"] = session_id;
  socket_.send_text(command.dump());

  auto deadline = Clock::now() + timeout;
  bool replied = pump_until([&] { return replies_.contains(id); }, deadline);
  if (!replied) throw Error(ErrorCode::kTimeout, std::string(method) + " got no reply");
  json reply = std::move(replies_[id]);
  replies_.erase(id);
  if (auto error = reply.find("error"); error != reply.end()) {
    throw Error(ErrorCode::kProtocolError, std::string(method) + ": " + error->value("message", error->dump()));
  }
  return reply.value("result", json::object());
}

bool CdpConnection::pump_until(const std::function<bool()>& done, Clock::time_point deadline) {
  while (!done()) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (remaining.count() <= 0) return done();
    auto text = socket_.receive(remaining);
    if (!text) continue;
    json message = json::parse(*text, nullptr, false);
    if (message.is_discarded()) throw Error(ErrorCode::kProtocolError, "malformed protocol frame");
    dispatch(std::move(message));
  }
  return true;
}

}  // namespace uxprobe::browser
