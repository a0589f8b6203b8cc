#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace uxprobe::net {

// Owning wrapper around a connected or listening TCP socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();
  // Half-closes both directions, waking any thread blocked in poll/recv.
  void shutdown();

  // Blocks until every byte is written. Throws Error(kProtocolError) on failure.
  void send_all(std::string_view bytes);
  // Returns false on timeout; true when the socket is readable (or closed).
  bool wait_readable(std::chrono::milliseconds timeout) const;

 private:
  int fd_ = -1;
};

// Throws Error(kConnectionRefused) when nothing accepts within `timeout`.
Socket tcp_connect(const std::string& host, int port, std::chrono::milliseconds timeout);

// Binds 127.0.0.1:port (0 picks a free port). Throws Error(kPortInUse).
Socket tcp_listen(int port, int* bound_port = nullptr);

// Reads an HTTP message head up to and including the blank line. Anything read
// past the head is appended to `leftover`. Throws on timeout or EOF.
std::string read_http_head(Socket& socket, std::string& leftover, std::chrono::milliseconds timeout);

}  // namespace uxprobe::net
