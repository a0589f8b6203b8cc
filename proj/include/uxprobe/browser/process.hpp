#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace uxprobe::browser {

// A headless Chromium child process with remote debugging on an ephemeral
// port. The process and its profile directory go away with the object.
class BrowserProcess {
 public:
  // Errors: kConfigError when the executable is missing, kHandshakeFailure
  // when it never announces its debugger endpoint.
  static BrowserProcess launch(const std::filesystem::path& executable,
                               std::chrono::milliseconds startup_timeout = std::chrono::milliseconds(20000),
                               std::vector<std::string> extra_args = {});

  BrowserProcess(BrowserProcess&& other) noexcept;
  BrowserProcess& operator=(BrowserProcess&& other) noexcept;
  ~BrowserProcess();

  // ws://127.0.0.1:<port>/devtools/browser/<id>
  const std::string& endpoint() const { return endpoint_; }
  int pid() const { return pid_; }
  bool running() const;
  void terminate();

 private:
  BrowserProcess() = default;

  int pid_ = -1;
  std::string endpoint_;
  std::filesystem::path profile_dir_;
};

}  // namespace uxprobe::browser
