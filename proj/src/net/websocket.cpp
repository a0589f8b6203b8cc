#include "uxprobe/net/websocket.hpp"

#include <sys/socket.h>

#include <cerrno>
#include <random>

#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/url.hpp"

namespace uxprobe::net {
namespace {

constexpr std::string_view kAcceptGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
constexpr std::size_t kMaxMessageBytes = 512u * 1024 * 1024;

constexpr int kOpContinuation = 0x0;
constexpr int kOpText = 0x1;
constexpr int kOpBinary = 0x2;
constexpr int kOpClose = 0x8;
constexpr int kOpPing = 0x9;
constexpr int kOpPong = 0xA;

std::string accept_key(std::string_view client_key) {
  std::string digest = sha1_raw(std::string(client_key) + std::string(kAcceptGuid));
  return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(digest.data()), digest.size()));
}

// Case-insensitive header lookup in a raw HTTP head.
std::string header_value(std::string_view head, std::string_view name) {
  std::string lower_head = to_lower(head);
  std::string needle = "\r\n" + to_lower(name) + ":";
  auto pos = lower_head.find(needle);
  if (pos == std::string::npos) return {};
  pos += needle.size();
  auto end = head.find("\r\n", pos);
  return trim(head.substr(pos, end - pos));
}

std::mt19937& rng() {
  thread_local std::mt19937 engine{std::random_device{}()};
  return engine;
}

}  // namespace

WebSocket::WebSocket(Socket socket, Role role, std::string leftover)
    : socket_(std::move(socket)),
      role_(role),
      buffer_(std::move(leftover)),
      open_(true),
      send_mutex_(std::make_unique<std::mutex>()) {}

WebSocket::WebSocket(WebSocket&& other) noexcept
    : socket_(std::move(other.socket_)),
      role_(other.role_),
      buffer_(std::move(other.buffer_)),
      partial_(std::move(other.partial_)),
      open_(other.open_.exchange(false)),
      send_mutex_(std::move(other.send_mutex_)) {}

WebSocket& WebSocket::operator=(WebSocket&& other) noexcept {
  if (this != &other) {
    close();
    socket_ = std::move(other.socket_);
    role_ = other.role_;
    buffer_ = std::move(other.buffer_);
    partial_ = std::move(other.partial_);
    open_ = other.open_.exchange(false);
    send_mutex_ = std::move(other.send_mutex_);
  }
  return *this;
}

WebSocket::~WebSocket() {
  if (open_ && socket_.valid()) {
    try {
      close();
    } catch (...) {
    }
  }
}

WebSocket WebSocket::connect(std::string_view ws_url, std::chrono::milliseconds timeout) {
  auto url = Url::parse(ws_url);
  if (!url || (url->scheme != "ws" && url->scheme != "http") || url->host.empty()) {
    throw Error(ErrorCode::kHandshakeFailure, "not a ws:// URL: " + std::string(ws_url));
  }
  Socket sock = tcp_connect(url->host, url->effective_port(), timeout);

  std::uint8_t nonce[16];
  for (auto& b : nonce) b = static_cast<std::uint8_t>(rng()() & 0xFF);
  std::string key = base64_encode(nonce);
  std::string request = "GET " + url->path_and_query() + " HTTP/1.1\r\n" + "Host: " + url->authority() +
                        "\r\n" + "Upgrade: websocket\r\nConnection: Upgrade\r\n" + "Sec-WebSocket-Key: " + key +
                        "\r\nSec-WebSocket-Version: 13\r\n\r\n";
  try {
    sock.send_all(request);
  } catch (const Error& e) {
    throw Error(ErrorCode::kHandshakeFailure, e.what());
  }
  std::string leftover;
  std::string head = read_http_head(sock, leftover, timeout);
  if (!head.starts_with("HTTP/1.1 101")) {
    throw Error(ErrorCode::kHandshakeFailure, "upgrade rejected: " + head.substr(0, head.find("\r\n")));
  }
  if (header_value(head, "Sec-WebSocket-Accept") != accept_key(key)) {
    throw Error(ErrorCode::kHandshakeFailure, "bad Sec-WebSocket-Accept");
  }
  return WebSocket(std::move(sock), Role::kClient, std::move(leftover));
}

WebSocket WebSocket::accept(Socket socket, std::string_view request_head, std::string leftover) {
  std::string key = header_value(request_head, "Sec-WebSocket-Key");
  if (key.empty()) throw Error(ErrorCode::kHandshakeFailure, "missing Sec-WebSocket-Key");
  std::string response =
      "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
      "Sec-WebSocket-Accept: " +
      accept_key(key) + "\r\n\r\n";
  socket.send_all(response);
  return WebSocket(std::move(socket), Role::kServer, std::move(leftover));
}

void WebSocket::send_frame(int opcode, std::string_view payload) {
  std::string frame;
  frame.reserve(payload.size() + 14);
  frame += static_cast<char>(0x80 | opcode);
  std::uint8_t mask_bit = role_ == Role::kClient ? 0x80 : 0x00;
  if (payload.size() < 126) {
    frame += static_cast<char>(mask_bit | payload.size());
  } else if (payload.size() <= 0xFFFF) {
    frame += static_cast<char>(mask_bit | 126);
    frame += static_cast<char>((payload.size() >> 8) & 0xFF);
    frame += static_cast<char>(payload.size() & 0xFF);
  } else {
    frame += static_cast<char>(mask_bit | 127);
    for (int shift = 56; shift >= 0; shift -= 8) {
      frame += static_cast<char>((static_cast<std::uint64_t>(payload.size()) >> shift) & 0xFF);
    }
  }
  if (role_ == Role::kClient) {
    std::uint8_t mask[4];
    for (auto& b : mask) b = static_cast<std::uint8_t>(rng()() & 0xFF);
    frame.append(reinterpret_cast<const char*>(mask), 4);
    std::size_t start = frame.size();
    frame.append(payload);
    for (std::size_t i = 0; i < payload.size(); ++i) frame[start + i] = static_cast<char>(frame[start + i] ^ mask[i % 4]);
  } else {
    frame.append(payload);
  }
  std::lock_guard lock(*send_mutex_);
  socket_.send_all(frame);
}

void WebSocket::send_text(std::string_view payload) {
  if (!open_) throw Error(ErrorCode::kProtocolError, "websocket is closed");
  send_frame(kOpText, payload);
}

std::optional<WebSocket::Frame> WebSocket::take_frame() {
  auto at = [this](std::size_t i) { return static_cast<std::uint8_t>(buffer_[i]); };
  if (buffer_.size() < 2) return std::nullopt;
  bool fin = (at(0) & 0x80) != 0;
  int opcode = at(0) & 0x0F;
  bool masked = (at(1) & 0x80) != 0;
  std::uint64_t length = at(1) & 0x7F;
  std::size_t pos = 2;
  if (length == 126) {
    if (buffer_.size() < 4) return std::nullopt;
    length = (static_cast<std::uint64_t>(at(2)) << 8) | at(3);
    pos = 4;
  } else if (length == 127) {
    if (buffer_.size() < 10) return std::nullopt;
    length = 0;
    for (int i = 0; i < 8; ++i) length = (length << 8) | at(2 + i);
    pos = 10;
  }
  if (length > kMaxMessageBytes) throw Error(ErrorCode::kProtocolError, "websocket frame too large");
  std::uint8_t mask[4] = {0, 0, 0, 0};
  if (masked) {
    if (buffer_.size() < pos + 4) return std::nullopt;
    for (int i = 0; i < 4; ++i) mask[i] = at(pos + i);
    pos += 4;
  }
  if (buffer_.size() < pos + length) return std::nullopt;
  Frame frame;
  frame.fin = fin;
  frame.opcode = opcode;
  frame.payload = buffer_.substr(pos, length);
  if (masked) {
    for (std::size_t i = 0; i < frame.payload.size(); ++i) {
      frame.payload[i] = static_cast<char>(frame.payload[i] ^ mask[i % 4]);
    }
  }
  buffer_.erase(0, pos + length);
  return frame;
}

std::optional<std::string> WebSocket::receive(std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    while (auto frame = take_frame()) {
      switch (frame->opcode) {
        case kOpPing:
          send_frame(kOpPong, frame->payload);
          continue;
        case kOpPong:
          continue;
        case kOpClose:
          if (open_) {
            try {
              send_frame(kOpClose, frame->payload.substr(0, 2));
            } catch (...) {
            }
          }
          open_ = false;
          throw Error(ErrorCode::kProtocolError, "websocket closed by peer");
        case kOpText:
        case kOpBinary:
          partial_ = std::move(frame->payload);
          break;
        case kOpContinuation:
          partial_ += frame->payload;
          break;
        default:
          throw Error(ErrorCode::kProtocolError, "unknown websocket opcode");
      }
      if (partial_.size() > kMaxMessageBytes) throw Error(ErrorCode::kProtocolError, "websocket message too large");
      if (frame->fin) {
        std::string message = std::move(partial_);
        partial_.clear();
        return message;
      }
    }
    if (!open_ || !socket_.valid()) throw Error(ErrorCode::kProtocolError, "websocket is closed");
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() < 0) remaining = std::chrono::milliseconds(0);
    if (!socket_.wait_readable(remaining)) return std::nullopt;
    char buf[64 * 1024];
    ssize_t n = ::recv(socket_.fd(), buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      open_ = false;
      throw Error(ErrorCode::kProtocolError, "websocket connection lost");
    }
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

void WebSocket::close() {
  if (open_ && socket_.valid()) {
    open_ = false;
    try {
      send_frame(kOpClose, std::string("\x03\xe8", 2));
    } catch (...) {
    }
  }
  open_ = false;
  socket_.shutdown();
  socket_.close();
}

void WebSocket::shutdown() { socket_.shutdown(); }

}  // namespace uxprobe::net
