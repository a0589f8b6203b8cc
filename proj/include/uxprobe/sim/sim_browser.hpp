#pragma once

#include <chrono>
#include <memory>
#include <string>

namespace uxprobe::sim {

// In-process stand-in for a headless browser. It serves the discovery
// document and the subset of the debugging protocol BrowserSession uses,
// fetching pages over plain HTTP and rendering them with a fixed layout.
// Scripts do not run; Runtime.evaluate always reports an exception.
class SimBrowser {
 public:
  struct Options {
    int port = 0;  // 0 picks a free port
    std::chrono::milliseconds fetch_timeout{10000};
  };

  static std::unique_ptr<SimBrowser> start(Options options);
  static std::unique_ptr<SimBrowser> start() { return start(Options{}); }
  ~SimBrowser();

  // http://127.0.0.1:<port>
  std::string endpoint() const;
  int port() const;
  void stop();

  // Severs every protocol connection as a crashed browser would.
  void drop_connections();
  int open_tabs() const;

 private:
  struct State;
  explicit SimBrowser(std::shared_ptr<State> state) : state_(std::move(state)) {}
  std::shared_ptr<State> state_;
};

}  // namespace uxprobe::sim
