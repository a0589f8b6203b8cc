#include "uxprobe/browser/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <thread>

#include "uxprobe/common/error.hpp"

namespace uxprobe::browser {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr std::string_view kListening = "DevTools listening on ";

}  // namespace

BrowserProcess BrowserProcess::launch(const fs::path& executable, std::chrono::milliseconds startup_timeout,
                                      std::vector<std::string> extra_args) {
  if (!fs::exists(executable)) throw Error(ErrorCode::kConfigError, "browser executable not found: " + executable.string());

  std::string templ = (fs::temp_directory_path() / "uxprobe-profile-XXXXXX").string();
  if (mkdtemp(templ.data()) == nullptr) throw Error(ErrorCode::kConfigError, "cannot create a browser profile directory");

  std::vector<std::string> args = {executable.string(),
                                   "--headless=new",
                                   "--no-sandbox",
                                   "--no-zygote",
                                   "--no-first-run",
                                   "--no-default-browser-check",
                                   "--disable-gpu",
                                   "--disable-dev-shm-usage",
                                   "--disable-extensions",
                                   "--disable-background-networking",
                                   "--mute-audio",
                                   "--hide-scrollbars",
                                   "--remote-debugging-address=127.0.0.1",
                                   "--remote-debugging-port=0",
                                   "--user-data-dir=" + templ};
  for (auto& a : extra_args) args.push_back(std::move(a));
  args.push_back("about:blank");

  int pipe_fds[2];
  if (pipe(pipe_fds) != 0) throw Error(ErrorCode::kConfigError, "pipe() failed");

  pid_t pid = fork();
  if (pid < 0) {
    close(pipe_fds[0]);
    close(pipe_fds[1]);
    throw Error(ErrorCode::kConfigError, "fork() failed");
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(pipe_fds[1], STDERR_FILENO);
    int devnull = open("/dev/null", O_RDWR);
    if (devnull >= 0) {
      dup2(devnull, STDIN_FILENO);
      dup2(devnull, STDOUT_FILENO);
    }
    close(pipe_fds[0]);
    close(pipe_fds[1]);
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    execv(argv[0], argv.data());
    _exit(127);
  }
  close(pipe_fds[1]);

  BrowserProcess process;
  process.pid_ = pid;
  process.profile_dir_ = templ;

  std::string buffered;
  auto deadline = Clock::now() + startup_timeout;
  while (process.endpoint_.empty()) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (remaining <= 0) break;
    pollfd pfd{pipe_fds[0], POLLIN, 0};
    if (poll(&pfd, 1, static_cast<int>(remaining)) <= 0) continue;
    char chunk[4096];
    ssize_t n = read(pipe_fds[0], chunk, sizeof chunk);
    if (n <= 0) break;
    buffered.append(chunk, static_cast<std::size_t>(n));
    if (auto at = buffered.find(kListening); at != std::string::npos) {
      auto end = buffered.find('\n', at);
      if (end != std::string::npos) {
        process.endpoint_ = buffered.substr(at + kListening.size(), end - at - kListening.size());
        while (!process.endpoint_.empty() && std::isspace(static_cast<unsigned char>(process.endpoint_.back()))) {
          process.endpoint_.pop_back();
        }
      }
    }
  }
  // Keep draining stderr so the browser never blocks on a full pipe.
  std::thread([fd = pipe_fds[0]] {
    char sink[4096];
    while (read(fd, sink, sizeof sink) > 0) {
    }
    close(fd);
  }).detach();

  if (process.endpoint_.empty()) {
    std::string tail = buffered.size() > 400 ? buffered.substr(buffered.size() - 400) : buffered;
    throw Error(ErrorCode::kHandshakeFailure, "browser did not announce a debugger endpoint: " + tail);
  }
  return process;
}

BrowserProcess::BrowserProcess(BrowserProcess&& other) noexcept
    : pid_(std::exchange(other.pid_, -1)),
      endpoint_(std::move(other.endpoint_)),
      profile_dir_(std::move(other.profile_dir_)) {}

BrowserProcess& BrowserProcess::operator=(BrowserProcess&& other) noexcept {
  if (this != &other) {
    terminate();
    pid_ = std::exchange(other.pid_, -1);
    endpoint_ = std::move(other.endpoint_);
    profile_dir_ = std::move(other.profile_dir_);
  }
  return *this;
}

BrowserProcess::~BrowserProcess() { terminate(); }

bool BrowserProcess::running() const {
  if (pid_ <= 0) return false;
  return waitpid(pid_, nullptr, WNOHANG) == 0;
}

void BrowserProcess::terminate() {
  if (pid_ > 0) {
    kill(-pid_, SIGTERM);
    kill(pid_, SIGTERM);
    auto deadline = Clock::now() + std::chrono::seconds(3);
    bool reaped = false;
    while (Clock::now() < deadline) {
      if (waitpid(pid_, nullptr, WNOHANG) != 0) {
        reaped = true;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    if (!reaped) {
      kill(-pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
    }
    pid_ = -1;
  }
  if (!profile_dir_.empty()) {
    std::error_code ec;
    fs::remove_all(profile_dir_, ec);
    profile_dir_.clear();
  }
}

}  // namespace uxprobe::browser
