#include "uxprobe/net/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "uxprobe/common/error.hpp"

namespace uxprobe::net {

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::send_all(std::string_view bytes) {
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    ssize_t n = ::send(fd_, bytes.data() + offset, bytes.size() - offset, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kProtocolError, std::string("socket send failed: ") + std::strerror(errno));
    }
    offset += static_cast<std::size_t>(n);
  }
}

bool Socket::wait_readable(std::chrono::milliseconds timeout) const {
  pollfd pfd{fd_, POLLIN, 0};
  int ms = static_cast<int>(std::max<std::chrono::milliseconds::rep>(0, timeout.count()));
  for (;;) {
    int rc = ::poll(&pfd, 1, ms);
    if (rc < 0 && errno == EINTR) continue;
    return rc != 0;
  }
}

Socket tcp_connect(const std::string& host, int port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* results = nullptr;
  std::string port_text = std::to_string(port);
  if (::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &results) != 0 || results == nullptr) {
    throw Error(ErrorCode::kConnectionRefused, "cannot resolve " + host);
  }
  std::string last_error = "no addresses";
  for (addrinfo* ai = results; ai != nullptr; ai = ai->ai_next) {
    Socket sock(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!sock.valid()) continue;
    int flags = ::fcntl(sock.fd(), F_GETFL, 0);
    ::fcntl(sock.fd(), F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(sock.fd(), ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{sock.fd(), POLLOUT, 0};
      rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
      if (rc == 1) {
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(sock.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
        errno = err;
      } else {
        rc = -1;
        errno = ETIMEDOUT;
      }
    }
    if (rc == 0) {
      ::fcntl(sock.fd(), F_SETFL, flags);
      int one = 1;
      ::setsockopt(sock.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      ::freeaddrinfo(results);
      return sock;
    }
    last_error = std::strerror(errno);
  }
  ::freeaddrinfo(results);
  throw Error(ErrorCode::kConnectionRefused, host + ":" + port_text + ": " + last_error);
}

Socket tcp_listen(int port, int* bound_port) {
  Socket sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock.valid()) throw Error(ErrorCode::kPortInUse, "socket() failed");
  int one = 1;
  ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(sock.fd(), 64) != 0) {
    throw Error(ErrorCode::kPortInUse, "cannot listen on port " + std::to_string(port) + ": " + std::strerror(errno));
  }
  if (bound_port != nullptr) {
    socklen_t len = sizeof(addr);
    ::getsockname(sock.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    *bound_port = ntohs(addr.sin_port);
  }
  return sock;
}

std::string read_http_head(Socket& socket, std::string& leftover, std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  std::string data = std::move(leftover);
  leftover.clear();
  for (;;) {
    if (auto end = data.find("\r\n\r\n"); end != std::string::npos) {
      leftover = data.substr(end + 4);
      data.resize(end + 4);
      return data;
    }
    if (data.size() > 64 * 1024) throw Error(ErrorCode::kHandshakeFailure, "HTTP head too large");
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0 || !socket.wait_readable(remaining)) {
      throw Error(ErrorCode::kHandshakeFailure, "timed out reading HTTP head");
    }
    char buf[4096];
    ssize_t n = ::recv(socket.fd(), buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::kHandshakeFailure, "connection closed during HTTP head");
    data.append(buf, static_cast<std::size_t>(n));
  }
}

}  // namespace uxprobe::net
