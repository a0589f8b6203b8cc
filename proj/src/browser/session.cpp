#include "uxprobe/browser/session.hpp"

#include <algorithm>
#include <thread>

#include "uxprobe/browser/cdp_connection.hpp"
#include "uxprobe/browser/snapshot.hpp"
#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/url.hpp"

namespace uxprobe::browser {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;
using vlm::ActionKind;
using vlm::AgentAction;

constexpr std::chrono::milliseconds kConnectTimeout{10000};
constexpr std::chrono::milliseconds kCloseTimeout{2000};

std::string console_text(const json& args) {
  std::string text;
  for (const auto& arg : args) {
    std::string piece;
    if (auto v = arg.find("value"); v != arg.end()) {
      piece = v->is_string() ? v->get<std::string>() : v->dump();
    } else if (auto d = arg.find("description"); d != arg.end() && d->is_string()) {
      piece = d->get<std::string>();
    }
    if (piece.empty()) continue;
    if (!text.empty()) text += ' ';
    text += piece;
  }
  return text;
}

// Splits UTF-8 text into code points; invalid bytes pass through singly.
std::vector<std::string> code_points(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size();) {
    auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xE ? 3 : (lead >> 3) == 0x1E ? 4 : 1;
    if (i + len > text.size()) len = 1;
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace

struct BrowserSession::Impl {
  SessionConfig config;
  CdpConnection conn;
  std::string target_id;
  std::string session_id;
  bool open = true;
  bool healthy = true;
  long event_seq = 0;
  long last_started = 0;
  long last_stopped = 0;
  int captures = 0;
  std::vector<std::string> console_errors;

  Impl(SessionConfig c, CdpConnection connection) : config(std::move(c)), conn(std::move(connection)) {}

  std::chrono::milliseconds command_timeout() const {
    return std::max(config.navigation_timeout, std::chrono::milliseconds(10000));
  }

  void ensure_open() const {
    if (!open) throw Error(ErrorCode::kSessionClosed, "session has been closed");
  }

  json call(std::string_view method, json params = json::object(),
            std::optional<std::chrono::milliseconds> timeout = std::nullopt) {
    try {
      return conn.call(method, std::move(params), session_id, timeout.value_or(command_timeout()));
    } catch (const Error&) {
      if (!conn.is_open()) healthy = false;
      throw;
    }
  }

  void on_event(const json& event) {
    std::string method = event.value("method", "");
    const json params = event.value("params", json::object());
    if (method == "Target.detachedFromTarget" || method == "Target.targetDestroyed") {
      if (params.value("sessionId", "") == session_id || params.value("targetId", "") == target_id) healthy = false;
      return;
    }
    if (event.value("sessionId", "") != session_id) return;
    if (method == "Page.frameStartedLoading") {
      if (params.value("frameId", "") == target_id) last_started = ++event_seq;
    } else if (method == "Page.frameStoppedLoading") {
      if (params.value("frameId", "") == target_id) last_stopped = ++event_seq;
    } else if (method == "Runtime.consoleAPICalled") {
      std::string type = params.value("type", "");
      if (type == "error" || type == "assert") {
        console_errors.push_back(console_text(params.value("args", json::array())));
      }
    } else if (method == "Runtime.exceptionThrown") {
      const json details = params.value("exceptionDetails", json::object());
      std::string text = details.value("text", "Uncaught exception");
      if (auto ex = details.find("exception"); ex != details.end() && ex->contains("description")) {
        text += " " + (*ex)["description"].get<std::string>();
      }
      console_errors.push_back(text);
    } else if (method == "Log.entryAdded") {
      const json entry = params.value("entry", json::object());
      if (entry.value("level", "") == "error" && entry.value("source", "") != "console-api") {
        std::string text = entry.value("text", "");
        std::string url = entry.value("url", "");
        if (!url.empty()) text += " (" + url + ")";
        console_errors.push_back(text);
      }
    } else if (method == "Inspector.detached" || method == "Inspector.targetCrashed") {
      healthy = false;
    }
  }

  bool load_settled() const { return last_stopped >= last_started; }

  // Waits out the settle delay, then for any load that started since `seq_before`.
  OutcomeStatus settle(long seq_before) {
    conn.pump_until([] { return false; }, Clock::now() + config.action_settle_delay);
    if (last_started > seq_before && !load_settled()) {
      if (!conn.pump_until([this] { return load_settled(); }, Clock::now() + config.navigation_timeout)) {
        return OutcomeStatus::kTimeout;
      }
    }
    return OutcomeStatus::kOk;
  }

  std::string current_url() {
    json history = call("Page.getNavigationHistory");
    int index = history.value("currentIndex", 0);
    const json& entries = history.at("entries");
    if (index < 0 || static_cast<std::size_t>(index) >= entries.size()) return {};
    return entries[static_cast<std::size_t>(index)].value("url", "");
  }

  ActionOutcome finish(ActionOutcome outcome) {
    try {
      std::string url = current_url();
      if (!url.empty()) outcome.resulting_url = url;
    } catch (const Error& e) {
      if (outcome.ok()) {
        outcome.status = OutcomeStatus::kProtocolError;
        outcome.detail = e.what();
      }
    }
    if (outcome.ok() && outcome.resulting_url.empty()) outcome.resulting_url = "about:blank";
    outcome.console_errors = std::move(console_errors);
    console_errors.clear();
    return outcome;
  }

  // Best effort: leaves a slow page where it is so later calls are not
  // racing a commit.
  void stop_loading() {
    try {
      call("Page.stopLoading", json::object(), std::chrono::milliseconds(2000));
    } catch (const Error&) {
    }
  }

  static ActionOutcome from_error(const Error& e) {
    ActionOutcome outcome;
    outcome.status = e.code() == ErrorCode::kTimeout ? OutcomeStatus::kTimeout : OutcomeStatus::kProtocolError;
    outcome.detail = e.what();
    return outcome;
  }

  ActionOutcome navigate(std::string_view url) {
    long seq_before = event_seq;
    ActionOutcome outcome;
    outcome.resulting_url = std::string(url);
    try {
      auto deadline = Clock::now() + config.navigation_timeout;
      json result = call("Page.navigate", {{"url", std::string(url)}}, config.navigation_timeout);
      std::string error_text = result.value("errorText", "");
      if (!error_text.empty()) {
        outcome.status = OutcomeStatus::kNavigationFailed;
        outcome.detail = error_text;
        // Let the error page commit so later calls see a quiescent frame.
        conn.pump_until([&] { return last_started > seq_before && load_settled(); },
                        Clock::now() + std::chrono::milliseconds(1000));
        return finish(std::move(outcome));
      }
      if (!result.contains("loaderId")) return finish(std::move(outcome));
      bool loaded = conn.pump_until([&] { return last_started > seq_before && load_settled(); }, deadline);
      if (!loaded) {
        stop_loading();
        outcome.status = OutcomeStatus::kTimeout;
        outcome.detail = "page did not finish loading within " + std::to_string(config.navigation_timeout.count()) + " ms";
      }
    } catch (const Error& e) {
      if (!conn.is_open()) healthy = false;
      if (e.code() == ErrorCode::kTimeout && conn.is_open()) stop_loading();
      outcome = from_error(e);
      outcome.resulting_url = std::string(url);
      if (!conn.is_open()) {
        outcome.console_errors = std::move(console_errors);
        console_errors.clear();
        return outcome;
      }
    }
    return finish(std::move(outcome));
  }

  ActionOutcome click(const ElementEntry& entry) {
    const BoundingBox& b = entry.bounding_box;
    double left = std::max(0.0, b.x);
    double top = std::max(0.0, b.y);
    double right = std::min<double>(config.viewport_width, b.x + b.width);
    double bottom = std::min<double>(config.viewport_height, b.y + b.height);
    double x = (left + right) / 2;
    double y = (top + bottom) / 2;

    ActionOutcome outcome;
    int hit = 0;
    try {
      json located = call("DOM.getNodeForLocation", {{"x", static_cast<int>(x)},
                                                      {"y", static_cast<int>(y)},
                                                      {"includeUserAgentShadowDOM", false},
                                                      {"ignorePointerEventsNone", true}});
      hit = located.value("backendNodeId", 0);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kProtocolError || !conn.is_open()) throw;
    }
    if (std::find(entry.hit_node_ids.begin(), entry.hit_node_ids.end(), hit) == entry.hit_node_ids.end()) {
      outcome.status = OutcomeStatus::kElementGone;
      outcome.detail = "element " + std::to_string(entry.index) + " is no longer at its recorded position";
      return outcome;
    }
    json base = {{"x", x}, {"y", y}, {"button", "left"}, {"clickCount", 1}};
    json move = base;
    move["type"] = "mouseMoved";
    move["button"] = "none";
    move["clickCount"] = 0;
    call("Input.dispatchMouseEvent", move);
    json press = base;
    press["type"] = "mousePressed";
    call("Input.dispatchMouseEvent", press);
    json release = base;
    release["type"] = "mouseReleased";
    call("Input.dispatchMouseEvent", release);
    return outcome;
  }

  ActionOutcome type(const ElementEntry& entry, std::string_view text) {
    ActionOutcome outcome;
    try {
      call("DOM.focus", {{"backendNodeId", entry.backend_node_id}});
    } catch (const Error& e) {
      if (!conn.is_open()) throw;
      outcome.status = OutcomeStatus::kElementGone;
      outcome.detail = e.what();
      return outcome;
    }
    for (const std::string& ch : code_points(text)) {
      json down = {{"type", "keyDown"}};
      json up = {{"type", "keyUp"}};
      if (ch == "\n" || ch == "\r") {
        for (json* ev : {&down, &up}) {
          (*ev)["key"] = "Enter";
          (*ev)["code"] = "Enter";
          (*ev)["windowsVirtualKeyCode"] = 13;
        }
        down["text"] = "\r";
      } else {
        down["key"] = ch;
        down["text"] = ch;
        down["unmodifiedText"] = ch;
        up["key"] = ch;
      }
      call("Input.dispatchKeyEvent", down);
      call("Input.dispatchKeyEvent", up);
    }
    return outcome;
  }

  ActionOutcome back() {
    ActionOutcome outcome;
    json history = call("Page.getNavigationHistory");
    int index = history.value("currentIndex", 0);
    if (index <= 0) {
      outcome.detail = "no earlier history entry";
      return outcome;
    }
    int entry_id = history.at("entries").at(static_cast<std::size_t>(index - 1)).value("id", 0);
    call("Page.navigateToHistoryEntry", {{"entryId", entry_id}});
    return outcome;
  }

  ActionOutcome execute(const AgentAction& action, const ElementMap& map) {
    vlm::validate(action);
    const ElementEntry* entry = nullptr;
    if (action.targets_element()) {
      entry = map.find(action.element_index);
      if (entry == nullptr) {
        throw Error(ErrorCode::kPrecondition, "element index " + std::to_string(action.element_index) +
                                                  " is not in the element map (" + std::to_string(map.size()) +
                                                  " entries)");
      }
    }
    if (action.kind == ActionKind::kNavigate) {
      ActionOutcome outcome = navigate(action.url);
      if (conn.is_open()) conn.pump_until([] { return false; }, Clock::now() + config.action_settle_delay);
      return outcome;
    }
    if (action.kind == ActionKind::kDone) return finish(ActionOutcome{});

    long seq_before = event_seq;
    ActionOutcome outcome;
    try {
      switch (action.kind) {
        case ActionKind::kClick: outcome = click(*entry); break;
        case ActionKind::kType: outcome = type(*entry, action.text); break;
        case ActionKind::kScroll: {
          double delta = action.direction == vlm::ScrollDirection::kDown ? config.viewport_height : -config.viewport_height;
          call("Input.dispatchMouseEvent", {{"type", "mouseWheel"},
                                            {"x", config.viewport_width / 2},
                                            {"y", config.viewport_height / 2},
                                            {"deltaX", 0},
                                            {"deltaY", delta}});
          break;
        }
        case ActionKind::kBack: outcome = back(); break;
        default: break;
      }
      OutcomeStatus settled = settle(seq_before);
      if (outcome.ok() && settled != OutcomeStatus::kOk) {
        outcome.status = settled;
        outcome.detail = "navigation triggered by the action did not finish loading";
      }
    } catch (const Error& e) {
      if (!conn.is_open()) {
        healthy = false;
        ActionOutcome failed = from_error(e);
        failed.console_errors = std::move(console_errors);
        console_errors.clear();
        return failed;
      }
      outcome = from_error(e);
    }
    return finish(std::move(outcome));
  }
};

BrowserSession::BrowserSession(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
BrowserSession::BrowserSession(BrowserSession&&) noexcept = default;
BrowserSession& BrowserSession::operator=(BrowserSession&& other) noexcept {
  if (this != &other) {
    close();
    impl_ = std::move(other.impl_);
  }
  return *this;
}

BrowserSession::~BrowserSession() { close(); }

BrowserSession BrowserSession::open(const SessionConfig& config) {
  config.validate();
  std::string ws_url = resolve_debugger_url(config.browser_endpoint, kConnectTimeout);
  CdpConnection conn = CdpConnection::open(ws_url, kConnectTimeout);
  auto impl = std::make_unique<Impl>(config, std::move(conn));
  Impl* self = impl.get();
  self->conn.set_event_handler([self](const json& event) { self->on_event(event); });

  try {
    json created = self->conn.call("Target.createTarget", {{"url", "about:blank"}}, "", kConnectTimeout);
    self->target_id = created.at("targetId").get<std::string>();
    json attached = self->conn.call("Target.attachToTarget", {{"targetId", self->target_id}, {"flatten", true}}, "",
                                    kConnectTimeout);
    self->session_id = attached.at("sessionId").get<std::string>();
    self->call("Page.enable");
    self->call("Runtime.enable");
    self->call("Log.enable");
    self->call("Emulation.setDeviceMetricsOverride", {{"width", config.viewport_width},
                                                      {"height", config.viewport_height},
                                                      {"deviceScaleFactor", 1},
                                                      {"mobile", false}});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kHandshakeFailure, std::string("unexpected target reply: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kProtocolError || e.code() == ErrorCode::kTimeout) {
      throw Error(ErrorCode::kHandshakeFailure, std::string("endpoint did not accept a new tab: ") + e.what());
    }
    throw;
  }
  return BrowserSession(std::move(impl));
}

ActionOutcome BrowserSession::navigate(std::string_view url) {
  impl_->ensure_open();
  if (!Url::parse(url)) throw Error(ErrorCode::kPrecondition, "malformed url '" + std::string(url) + "'");
  return impl_->navigate(url);
}

ImageBlob BrowserSession::capture_screenshot() {
  impl_->ensure_open();
  json result = impl_->call("Page.captureScreenshot", {{"format", "png"}, {"captureBeyondViewport", false}});
  auto image = ImageBlob::from_png(base64_decode(result.value("data", "")));
  if (!image) throw Error(ErrorCode::kProtocolError, "screenshot is not a PNG");
  return *image;
}

ElementMap BrowserSession::extract_elements() {
  impl_->ensure_open();
  json styles = json::array();
  for (const char* s : kSnapshotStyles) styles.push_back(s);
  json snapshot = impl_->call("DOMSnapshot.captureSnapshot", {{"computedStyles", styles}});
  ElementMap map = elements_from_snapshot(snapshot, impl_->config.viewport_width, impl_->config.viewport_height,
                                          ++impl_->captures);
  if (map.page_url.empty()) map.page_url = impl_->current_url();
  return map;
}

ActionOutcome BrowserSession::execute_action(const vlm::AgentAction& action, const ElementMap& map) {
  impl_->ensure_open();
  return impl_->execute(action, map);
}

std::string BrowserSession::evaluate(std::string_view expression) {
  impl_->ensure_open();
  json result;
  try {
    result = impl_->call("Runtime.evaluate",
                         {{"expression", std::string(expression)}, {"returnByValue", true}, {"awaitPromise", true}});
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kProtocolError) throw Error(ErrorCode::kScriptEvaluationFailure, e.what());
    throw;
  }
  if (auto details = result.find("exceptionDetails"); details != result.end()) {
    std::string text = details->value("text", "script threw");
    if (auto ex = details->find("exception"); ex != details->end() && ex->contains("description")) {
      text += ": " + (*ex)["description"].get<std::string>();
    }
    throw Error(ErrorCode::kScriptEvaluationFailure, text);
  }
  const json remote = result.value("result", json::object());
  return remote.contains("value") ? remote["value"].dump() : "null";
}

std::string BrowserSession::current_url() {
  impl_->ensure_open();
  return impl_->current_url();
}

void BrowserSession::close() {
  if (!impl_ || !impl_->open) return;
  impl_->open = false;
  if (impl_->conn.is_open()) {
    try {
      impl_->conn.call("Target.closeTarget", {{"targetId", impl_->target_id}}, "", kCloseTimeout);
    } catch (...) {
    }
    impl_->conn.close();
  }
}

bool BrowserSession::is_open() const { return impl_ && impl_->open; }
bool BrowserSession::is_healthy() const { return impl_ && impl_->open && impl_->healthy && impl_->conn.is_open(); }
const SessionConfig& BrowserSession::config() const { return impl_->config; }

}  // namespace uxprobe::browser
