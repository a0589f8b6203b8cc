#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "uxprobe/browser/types.hpp"
#include "uxprobe/common/image.hpp"
#include "uxprobe/vlm/action.hpp"

namespace uxprobe::browser {

// One browser tab driven over the debugging protocol. Single owner: every
// call is issued and awaited in order. Distinct sessions own distinct
// connections and tabs and may be used from different threads.
//
// Methods other than close() throw Error(kSessionClosed) after close().
class BrowserSession {
 public:
  // Opens a fresh blank tab with the configured viewport.
  // Errors: kConnectionRefused, kHandshakeFailure, kConfigError.
  static BrowserSession open(const SessionConfig& config);

  BrowserSession(BrowserSession&&) noexcept;
  BrowserSession& operator=(BrowserSession&&) noexcept;
  ~BrowserSession();

  // Waits for the main frame to finish loading. Connection failures come back
  // as kNavigationFailed outcomes, not exceptions.
  ActionOutcome navigate(std::string_view url);

  // PNG of exactly the viewport. Errors: kProtocolError, kTimeout.
  ImageBlob capture_screenshot();

  // Visible interactive elements in document order, indexed from 1. Uses
  // DOM snapshot queries only; no script runs in the page.
  ElementMap extract_elements();

  // Throws Error(kPrecondition) when an element-targeting action names an
  // index missing from `map`. Everything else is reported in the outcome.
  ActionOutcome execute_action(const vlm::AgentAction& action, const ElementMap& map);

  // Evaluates `expression` in the page and returns the JSON-encoded result
  // value. Throws Error(kScriptEvaluationFailure) on exceptions or refusal.
  std::string evaluate(std::string_view expression);

  std::string current_url();

  // Idempotent; aborts in-flight loading by closing the tab.
  void close();

  bool is_open() const;
  // False once the protocol connection has failed irrecoverably.
  bool is_healthy() const;
  const SessionConfig& config() const;

 private:
  struct Impl;
  explicit BrowserSession(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace uxprobe::browser
