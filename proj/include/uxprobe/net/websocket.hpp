#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "uxprobe/net/socket.hpp"

namespace uxprobe::net {

// RFC 6455 text-message endpoint. Client endpoints mask outgoing frames,
// server endpoints do not. Reads are single-threaded; sends are serialized
// internally so a server may push events from more than one thread.
class WebSocket {
 public:
  enum class Role { kClient, kServer };

  // Performs the opening handshake against ws://host:port/path.
  // Errors: kConnectionRefused (TCP), kHandshakeFailure (upgrade rejected).
  static WebSocket connect(std::string_view ws_url, std::chrono::milliseconds timeout);

  // Completes a server-side handshake for an already-read upgrade request.
  static WebSocket accept(Socket socket, std::string_view request_head, std::string leftover);

  WebSocket(WebSocket&& other) noexcept;
  WebSocket& operator=(WebSocket&& other) noexcept;
  ~WebSocket();

  void send_text(std::string_view payload);

  // Next complete text message, or nullopt when `timeout` elapses first.
  // Throws Error(kProtocolError) once the peer has closed the connection.
  std::optional<std::string> receive(std::chrono::milliseconds timeout);

  bool is_open() const { return open_; }
  void close();
  // Unblocks a concurrent receive() from another thread.
  void shutdown();

 private:
  WebSocket(Socket socket, Role role, std::string leftover);

  struct Frame {
    bool fin = false;
    int opcode = 0;
    std::string payload;
  };
  std::optional<Frame> take_frame();
  void send_frame(int opcode, std::string_view payload);

  Socket socket_;
  Role role_ = Role::kClient;
  std::string buffer_;
  std::string partial_;
  std::atomic<bool> open_{false};
  std::unique_ptr<std::mutex> send_mutex_;
};

}  // namespace uxprobe::net
