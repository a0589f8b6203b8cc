#include "uxprobe/sim/sim_browser.hpp"

#include <sys/socket.h>

#include <atomic>
#include <list>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/url.hpp"
#include "uxprobe/net/socket.hpp"
#include "uxprobe/net/websocket.hpp"
#include "uxprobe/sim/page.hpp"

namespace uxprobe::sim {
namespace {

using nlohmann::json;
using namespace std::chrono_literals;

constexpr const char* kProduct = "UxprobeSim/1.0";
constexpr int kMaxRedirects = 10;

struct Fetched {
  std::string error;  // net::ERR_* when the request failed outright
  std::string final_url;
  int status = 0;
  std::string body;
  std::string content_type;
};

Fetched fetch(const std::string& start_url, std::chrono::milliseconds timeout) {
  Fetched out;
  std::string url = start_url;
  for (int hop = 0; hop <= kMaxRedirects; ++hop) {
    auto parsed = Url::parse(url);
    if (!parsed || (parsed->scheme != "http" && parsed->scheme != "https")) {
      out.error = "net::ERR_INVALID_URL";
      return out;
    }
    if (parsed->scheme == "https") {
      out.error = "net::ERR_SSL_PROTOCOL_ERROR";
      return out;
    }
    httplib::Client client(parsed->host, parsed->effective_port());
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout).count();
    client.set_connection_timeout(std::max<long>(1, secs));
    client.set_read_timeout(std::max<long>(1, secs));
    client.set_follow_location(false);
    httplib::Headers headers = {{"User-Agent", kProduct}};
    auto res = client.Get(parsed->path_and_query(), headers);
    if (!res) {
      out.error = res.error() == httplib::Error::Connection ? "net::ERR_CONNECTION_REFUSED"
                  : res.error() == httplib::Error::Read     ? "net::ERR_EMPTY_RESPONSE"
                                                           : "net::ERR_FAILED";
      return out;
    }
    if (res->status >= 300 && res->status < 400 && res->has_header("Location")) {
      auto next = resolve_http_url(url, res->get_header_value("Location"));
      if (!next) {
        out.error = "net::ERR_INVALID_REDIRECT";
        return out;
      }
      url = *next;
      continue;
    }
    out.final_url = url;
    out.status = res->status;
    out.body = res->body;
    out.content_type = to_lower(res->get_header_value("Content-Type"));
    return out;
  }
  out.error = "net::ERR_TOO_MANY_REDIRECTS";
  return out;
}

std::string escape_html(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

struct Connection {
  explicit Connection(net::WebSocket socket) : ws(std::move(socket)) {}
  net::WebSocket ws;

  void send(const json& message) {
    try {
      ws.send_text(message.dump());
    } catch (const Error&) {
    }
  }
};

struct HistoryEntry {
  int id;
  std::string url;
  std::string title;
};

struct Tab {
  std::string id;
  std::string session_id;
  std::shared_ptr<Connection> conn;
  std::unique_ptr<Page> page;
  std::vector<HistoryEntry> history;
  int current = -1;
  int next_entry_id = 1;
  long generation = 0;
  int loader_seq = 0;
  bool closed = false;
  int frame = 0;
  int viewport_width = 1280;
  int viewport_height = 1024;
  int focused = 0;
  int pressed = 0;

  void event(std::string method, json params) {
    if (closed || !conn) return;
    conn->send({{"method", std::move(method)}, {"params", std::move(params)}, {"sessionId", session_id}});
  }

  void console_error(const std::string& text) {
    event("Runtime.consoleAPICalled",
          {{"type", "error"},
           {"args", json::array({{{"type", "string"}, {"value", text}}})},
           {"executionContextId", 1},
           {"timestamp", now_seconds() * 1000}});
  }
};

// How a load finishes: a fresh navigation pushes an entry; history traversal
// replaces the current index.
struct LoadRequest {
  std::string url;
  std::optional<int> history_index;
  std::optional<json> reply_id;  // Page.navigate id awaiting the commit
};

}  // namespace

struct SimBrowser::State {
  Options options;
  mutable std::mutex mutex;
  std::map<std::string, std::shared_ptr<Tab>> tabs;
  std::list<std::shared_ptr<Connection>> connections;
  std::vector<std::thread> workers;
  std::atomic<bool> stopping{false};
  net::Socket listener;
  int port = 0;
  int next_target = 1;
  std::thread acceptor;

  std::shared_ptr<Tab> tab_for_session(const std::string& session_id) {
    for (auto& [id, tab] : tabs) {
      if (tab->session_id == session_id) return tab;
    }
    return nullptr;
  }

  // Caller holds the mutex.
  void start_load(const std::shared_ptr<Tab>& tab, LoadRequest request) {
    long generation = ++tab->generation;
    std::string loader = "L" + std::to_string(++tab->loader_seq);
    tab->event("Page.frameStartedLoading", {{"frameId", tab->id}});
    auto self = this;
    workers.emplace_back([self, tab, generation, loader, request = std::move(request)] {
      self->run_load(tab, generation, loader, request);
    });
  }

  void run_load(const std::shared_ptr<Tab>& tab, long generation, const std::string& loader, const LoadRequest& request) {
    Fetched fetched;
    if (request.url == "about:blank") {
      fetched.final_url = request.url;
      fetched.status = 200;
    } else {
      fetched = fetch(request.url, options.fetch_timeout);
    }

    std::unique_lock lock(mutex);
    auto reply = [&](json result) {
      if (request.reply_id && tab->conn) {
        tab->conn->send({{"id", *request.reply_id}, {"result", std::move(result)}, {"sessionId", tab->session_id}});
      }
    };
    if (tab->closed || generation != tab->generation) {
      reply({{"frameId", tab->id}, {"loaderId", loader}, {"errorText", "net::ERR_ABORTED"}});
      return;
    }
    std::string url = fetched.error.empty() ? fetched.final_url : request.url;
    std::string html;
    if (!fetched.error.empty()) {
      html = "<html><head><title>" + escape_html(request.url) + "</title></head><body><h1>This site can't be reached</h1><p>" +
             escape_html(fetched.error) + "</p></body></html>";
    } else if (fetched.content_type.empty() || fetched.content_type.find("html") != std::string::npos) {
      html = fetched.body;
    } else {
      html = "<html><body><pre>" + escape_html(fetched.body) + "</pre></body></html>";
    }
    tab->page = std::make_unique<Page>(url, html, tab->viewport_width, tab->viewport_height);
    tab->focused = 0;
    if (request.history_index && *request.history_index < static_cast<int>(tab->history.size())) {
      tab->current = *request.history_index;
      tab->history[static_cast<std::size_t>(tab->current)].url = url;
      tab->history[static_cast<std::size_t>(tab->current)].title = tab->page->title();
    } else {
      tab->history.resize(static_cast<std::size_t>(tab->current + 1));
      tab->history.push_back({tab->next_entry_id++, url, tab->page->title()});
      tab->current = static_cast<int>(tab->history.size()) - 1;
    }
    json committed = {{"frameId", tab->id}, {"loaderId", loader}};
    if (!fetched.error.empty()) committed["errorText"] = fetched.error;
    reply(committed);
    tab->event("Page.frameNavigated", {{"frame", {{"id", tab->id}, {"loaderId", loader}, {"url", url}}}});
    if (!fetched.error.empty()) {
      tab->event("Page.frameStoppedLoading", {{"frameId", tab->id}});
      return;
    }
    if (fetched.status >= 400) {
      tab->event("Log.entryAdded", {{"entry",
                                     {{"source", "network"},
                                      {"level", "error"},
                                      {"text", "Failed to load resource: the server responded with a status of " +
                                                   std::to_string(fetched.status)},
                                      {"url", url},
                                      {"timestamp", now_seconds() * 1000}}}});
    }

    std::vector<std::string> images = tab->page->image_urls();
    lock.unlock();
    std::vector<std::pair<std::string, std::string>> broken;
    for (const auto& image : images) {
      Fetched sub = fetch(image, options.fetch_timeout);
      if (!sub.error.empty()) {
        broken.emplace_back(image, "Failed to load resource: " + sub.error);
      } else if (sub.status >= 400) {
        broken.emplace_back(image, "Failed to load resource: the server responded with a status of " +
                                       std::to_string(sub.status));
      }
    }
    lock.lock();
    if (tab->closed || generation != tab->generation) return;
    for (const auto& [image, text] : broken) {
      tab->page->mark_broken_image(image);
      tab->event("Log.entryAdded", {{"entry",
                                     {{"source", "network"},
                                      {"level", "error"},
                                      {"text", text},
                                      {"url", image},
                                      {"timestamp", now_seconds() * 1000}}}});
    }
    for (const auto& message : tab->page->script_errors()) {
      if (message.starts_with("Uncaught ")) {
        tab->event("Runtime.exceptionThrown",
                   {{"timestamp", now_seconds() * 1000},
                    {"exceptionDetails", {{"exceptionId", 1}, {"text", message}, {"lineNumber", 0}, {"columnNumber", 0}}}});
      } else {
        tab->console_error(message);
      }
    }
    tab->event("Page.domContentEventFired", {{"timestamp", now_seconds()}});
    tab->event("Page.loadEventFired", {{"timestamp", now_seconds()}});
    tab->event("Page.frameStoppedLoading", {{"frameId", tab->id}});
  }

  // Same-document navigations change the URL without loading.
  bool same_document(const Tab& tab, const std::string& url) const {
    if (tab.current < 0 || !tab.page) return false;
    auto target = Url::parse(url);
    auto here = Url::parse(tab.history[static_cast<std::size_t>(tab.current)].url);
    if (!target || !here || !target->has_fragment) return false;
    target->fragment.clear();
    target->has_fragment = false;
    here->fragment.clear();
    here->has_fragment = false;
    return target->to_string() == here->to_string();
  }

  void push_same_document(Tab& tab, const std::string& url) {
    tab.history.resize(static_cast<std::size_t>(tab.current + 1));
    tab.history.push_back({tab.next_entry_id++, url, tab.page->title()});
    tab.current = static_cast<int>(tab.history.size()) - 1;
    tab.event("Page.navigatedWithinDocument", {{"frameId", tab.id}, {"url", url}});
  }

  void navigate_from_page(const std::shared_ptr<Tab>& tab, const std::string& url) {
    if (same_document(*tab, url)) {
      push_same_document(*tab, url);
      return;
    }
    start_load(tab, {url, std::nullopt, std::nullopt});
  }

  void submit_form(const std::shared_ptr<Tab>& tab, Node& form) {
    std::string query;
    walk(form, [&](Node& n) {
      if (!(n.is("input") || n.is("textarea") || n.is("select"))) return;
      auto name = n.attr("name");
      if (!name || name->empty()) return;
      std::string type = to_lower(n.attr("type").value_or("text"));
      if (type == "submit" || type == "button" || type == "reset") return;
      if ((type == "checkbox" || type == "radio") && !n.attr("checked")) return;
      if (!query.empty()) query += '&';
      query += httplib::detail::encode_query_param(*name) + "=" +
               httplib::detail::encode_query_param(tab->page->value_of(n));
    });
    std::string action = form.attr("action").value_or("");
    auto target = resolve_http_url(tab->page->url(), action.empty() ? tab->page->url() : action);
    if (!target) return;
    auto parsed = Url::parse(*target);
    parsed->query = query;
    parsed->has_query = true;
    parsed->fragment.clear();
    parsed->has_fragment = false;
    start_load(tab, {parsed->to_string(), std::nullopt, std::nullopt});
  }

  static bool focusable(const Node& n) {
    if (n.type != Node::Type::kElement) return false;
    if (n.is("input") || n.is("textarea") || n.is("select") || n.is("button")) return !n.attr("disabled");
    if (n.is("a") && n.attr("href")) return true;
    if (n.attr("tabindex") || n.attr("contenteditable")) return true;
    return false;
  }

  void emit_handler_errors(Tab& tab, const Node& node) {
    auto handler = node.attr("onclick");
    if (!handler) return;
    static const std::regex kConsoleError(R"re(console\.error\(\s*(['"])(.*?)\1\s*\))re");
    static const std::regex kThrow(R"re(throw\s+new\s+(\w*Error)\(\s*(['"])(.*?)\2\s*\))re");
    for (std::sregex_iterator it(handler->begin(), handler->end(), kConsoleError), end; it != end; ++it) {
      tab.console_error((*it)[2].str());
    }
    for (std::sregex_iterator it(handler->begin(), handler->end(), kThrow), end; it != end; ++it) {
      tab.event("Runtime.exceptionThrown",
                {{"timestamp", now_seconds() * 1000},
                 {"exceptionDetails",
                  {{"exceptionId", 1}, {"text", "Uncaught " + (*it)[1].str() + ": " + (*it)[3].str()}, {"lineNumber", 0}, {"columnNumber", 0}}}});
    }
  }

  void activate(const std::shared_ptr<Tab>& tab, Node& target) {
    tab->focused = 0;
    for (Node* n = &target; n != nullptr; n = n->parent) {
      if (focusable(*n)) {
        tab->focused = n->backend_id;
        break;
      }
    }
    for (Node* n = &target; n != nullptr; n = n->parent) emit_handler_errors(*tab, *n);
    for (Node* n = &target; n != nullptr && n->type == Node::Type::kElement; n = n->parent) {
      if (n->is("a") && n->attr("href")) {
        std::string href = *n->attr("href");
        if (to_lower(href).starts_with("javascript:")) return;
        if (auto url = resolve_http_url(tab->page->url(), href)) navigate_from_page(tab, *url);
        return;
      }
      if (n->is("input")) {
        std::string type = to_lower(n->attr("type").value_or("text"));
        if (type == "checkbox") {
          if (n->attr("checked")) {
            n->remove_attr("checked");
          } else {
            n->set_attr("checked", "");
          }
          return;
        }
        if (type == "submit" || type == "image") {
          if (Node* form = n->closest("form")) submit_form(tab, *form);
          return;
        }
        return;
      }
      if (n->is("button")) {
        std::string type = to_lower(n->attr("type").value_or("submit"));
        if (type == "submit") {
          if (Node* form = n->closest("form")) submit_form(tab, *form);
        }
        return;
      }
    }
  }

  json history_json(const Tab& tab) const {
    json entries = json::array();
    for (const auto& e : tab.history) {
      entries.push_back({{"id", e.id}, {"url", e.url}, {"userTypedURL", e.url}, {"title", e.title}, {"transitionType", "typed"}});
    }
    return {{"currentIndex", tab.current}, {"entries", entries}};
  }

  struct Failure {
    int code;
    std::string message;
  };

  // Returns the result object, nullopt when the reply is sent later, or throws Failure.
  std::optional<json> handle(const std::shared_ptr<Connection>& conn, const json& command) {
    const std::string method = command.value("method", "");
    const json params = command.contains("params") && command["params"].is_object() ? command["params"] : json::object();
    const std::string session_id = command.value("sessionId", "");

    std::lock_guard lock(mutex);
    if (session_id.empty()) {
      if (method == "Browser.getVersion") {
        return json{{"protocolVersion", "1.3"}, {"product", kProduct}, {"userAgent", kProduct}, {"jsVersion", ""}};
      }
      if (method == "Target.createTarget") {
        auto tab = std::make_shared<Tab>();
        tab->id = "SIMTARGET" + std::to_string(next_target++);
        tabs[tab->id] = tab;
        tab->page = std::make_unique<Page>("about:blank", "", tab->viewport_width, tab->viewport_height);
        tab->history.push_back({tab->next_entry_id++, "about:blank", ""});
        tab->current = 0;
        return json{{"targetId", tab->id}};
      }
      if (method == "Target.attachToTarget") {
        auto it = tabs.find(params.value("targetId", ""));
        if (it == tabs.end()) throw Failure{-32602, "No target with given id found"};
        if (!params.value("flatten", false)) throw Failure{-32602, "Only flattened sessions are supported"};
        it->second->session_id = "SIMSESSION-" + it->first;
        it->second->conn = conn;
        return json{{"sessionId", it->second->session_id}};
      }
      if (method == "Target.closeTarget") {
        auto it = tabs.find(params.value("targetId", ""));
        if (it == tabs.end()) throw Failure{-32602, "No target with given id found"};
        auto tab = it->second;
        tabs.erase(it);
        ++tab->generation;
        if (tab->conn) {
          tab->conn->send({{"method", "Target.detachedFromTarget"},
                           {"params", {{"sessionId", tab->session_id}, {"targetId", tab->id}}}});
        }
        tab->closed = true;
        return json{{"success", true}};
      }
      if (method == "Target.getTargets") {
        json infos = json::array();
        for (const auto& [id, tab] : tabs) {
          infos.push_back({{"targetId", id}, {"type", "page"}, {"url", tab->page ? tab->page->url() : ""}, {"attached", !tab->session_id.empty()}});
        }
        return json{{"targetInfos", infos}};
      }
      if (method == "Target.setDiscoverTargets" || method == "Target.setAutoAttach") return json::object();
      throw Failure{-32601, "'" + method + "' wasn't found"};
    }

    auto tab = tab_for_session(session_id);
    if (!tab) throw Failure{-32001, "Session with given id not found."};
    Page& page = *tab->page;

    if (method == "Page.enable" || method == "Runtime.enable" || method == "Log.enable" || method == "DOM.enable" ||
        method == "Network.enable" || method == "Page.setLifecycleEventsEnabled" || method == "Runtime.runIfWaitingForDebugger") {
      return json::object();
    }
    if (method == "Emulation.setDeviceMetricsOverride") {
      int w = params.value("width", 0), h = params.value("height", 0);
      if (w <= 0 || h <= 0) throw Failure{-32602, "Invalid viewport dimensions"};
      tab->viewport_width = w;
      tab->viewport_height = h;
      page.set_viewport(w, h);
      return json::object();
    }
    if (method == "Page.navigate") {
      std::string url = params.value("url", "");
      if (url != "about:blank") {
        auto parsed = Url::parse(url);
        if (!parsed) throw Failure{-32000, "Cannot navigate to invalid URL"};
      }
      if (same_document(*tab, url)) {
        push_same_document(*tab, url);
        return json{{"frameId", tab->id}};
      }
      start_load(tab, {url, std::nullopt, command.at("id")});
      return std::nullopt;
    }
    if (method == "Page.getNavigationHistory") return history_json(*tab);
    if (method == "Page.navigateToHistoryEntry") {
      int entry_id = params.value("entryId", -1);
      for (std::size_t i = 0; i < tab->history.size(); ++i) {
        if (tab->history[i].id == entry_id) {
          start_load(tab, {tab->history[i].url, static_cast<int>(i), std::nullopt});
          return json::object();
        }
      }
      throw Failure{-32602, "No entry with passed id"};
    }
    if (method == "Page.reload") {
      start_load(tab, {page.url(), tab->current, std::nullopt});
      return json::object();
    }
    if (method == "Page.captureScreenshot") {
      std::string format = params.value("format", "png");
      if (format != "png") throw Failure{-32602, "Only png screenshots are supported"};
      return json{{"data", base64_encode(page.render_png(tab->frame++))}};
    }
    if (method == "DOMSnapshot.captureSnapshot") {
      std::vector<std::string> styles;
      for (const auto& s : params.value("computedStyles", json::array())) styles.push_back(s.get<std::string>());
      return page.snapshot(styles);
    }
    if (method == "DOM.getNodeForLocation") {
      Node* hit = page.hit_test(params.value("x", 0.0), params.value("y", 0.0));
      if (!hit) throw Failure{-32000, "No node found at given location"};
      return json{{"backendNodeId", hit->backend_id}, {"frameId", tab->id}};
    }
    if (method == "DOM.focus") {
      Node* node = page.find(params.value("backendNodeId", 0));
      if (!node) throw Failure{-32000, "No node with given id found"};
      if (!focusable(*node)) throw Failure{-32000, "Element is not focusable"};
      tab->focused = node->backend_id;
      return json::object();
    }
    if (method == "Input.dispatchMouseEvent") {
      std::string type = params.value("type", "");
      double x = params.value("x", 0.0), y = params.value("y", 0.0);
      if (type == "mouseWheel") {
        page.scroll_by(params.value("deltaY", 0.0));
      } else if (type == "mousePressed") {
        Node* hit = page.hit_test(x, y);
        tab->pressed = hit ? hit->backend_id : 0;
      } else if (type == "mouseReleased") {
        Node* hit = page.hit_test(x, y);
        if (hit && hit->backend_id == tab->pressed) activate(tab, *hit);
        tab->pressed = 0;
      }
      return json::object();
    }
    if (method == "Input.dispatchKeyEvent") {
      if (params.value("type", "") != "keyDown" && params.value("type", "") != "char") return json::object();
      Node* node = tab->focused ? page.find(tab->focused) : nullptr;
      std::string text = params.value("text", "");
      if (!node || text.empty()) return json::object();
      bool text_field = node->is("textarea") || (node->is("input") && to_lower(node->attr("type").value_or("text")) != "checkbox" &&
                                                 to_lower(node->attr("type").value_or("text")) != "submit");
      if (text == "\r") {
        if (node->is("textarea")) {
          page.set_value(*node, page.value_of(*node) + "\n");
        } else if (Node* form = node->closest("form")) {
          submit_form(tab, *form);
        }
      } else if (text_field) {
        page.set_value(*node, page.value_of(*node) + text);
      }
      return json::object();
    }
    if (method == "Runtime.evaluate") {
      return json{{"result", {{"type", "object"}, {"subtype", "error"}, {"className", "EvalError"}, {"description", "EvalError: scripts are disabled"}}},
                  {"exceptionDetails",
                   {{"exceptionId", 1},
                    {"text", "Uncaught"},
                    {"lineNumber", 0},
                    {"columnNumber", 0},
                    {"exception", {{"type", "object"}, {"className", "EvalError"}, {"description", "EvalError: scripts are disabled"}}}}}};
    }
    throw Failure{-32601, "'" + method + "' wasn't found"};
  }

  void serve_connection(std::shared_ptr<Connection> conn) {
    while (!stopping) {
      std::optional<std::string> text;
      try {
        text = conn->ws.receive(100ms);
      } catch (const Error&) {
        break;
      }
      if (!text) continue;
      json command = json::parse(*text, nullptr, false);
      if (command.is_discarded() || !command.contains("id")) continue;
      json reply = {{"id", command["id"]}};
      if (command.contains("sessionId")) reply["sessionId"] = command["sessionId"];
      try {
        auto result = handle(conn, command);
        if (!result) continue;
        reply["result"] = std::move(*result);
      } catch (const Failure& f) {
        reply["error"] = {{"code", f.code}, {"message", f.message}};
      } catch (const std::exception& e) {
        reply["error"] = {{"code", -32603}, {"message", e.what()}};
      }
      conn->send(reply);
    }
    std::lock_guard lock(mutex);
    for (auto it = tabs.begin(); it != tabs.end();) {
      if (it->second->conn == conn) {
        it->second->closed = true;
        ++it->second->generation;
        it = tabs.erase(it);
      } else {
        ++it;
      }
    }
    conn->ws.close();
    connections.remove(conn);
  }

  void serve_http(net::Socket socket) {
    std::string leftover;
    std::string head;
    try {
      head = net::read_http_head(socket, leftover, 5000ms);
    } catch (const Error&) {
      return;
    }
    std::string first_line = head.substr(0, head.find("\r\n"));
    std::string path;
    if (auto a = first_line.find(' '); a != std::string::npos) {
      auto b = first_line.find(' ', a + 1);
      path = first_line.substr(a + 1, b == std::string::npos ? std::string::npos : b - a - 1);
    }
    if (contains_icase(head, "upgrade: websocket")) {
      if (!path.starts_with("/devtools/browser")) {
        try {
          socket.send_all("HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
        } catch (const Error&) {
        }
        return;
      }
      std::shared_ptr<Connection> conn;
      try {
        conn = std::make_shared<Connection>(net::WebSocket::accept(std::move(socket), head, leftover));
      } catch (const Error&) {
        return;
      }
      {
        std::lock_guard lock(mutex);
        connections.push_back(conn);
      }
      serve_connection(conn);
      return;
    }
    json body;
    int status = 200;
    if (path == "/json/version") {
      body = {{"Browser", kProduct},
              {"Protocol-Version", "1.3"},
              {"User-Agent", kProduct},
              {"V8-Version", ""},
              {"WebKit-Version", ""},
              {"webSocketDebuggerUrl", "ws://127.0.0.1:" + std::to_string(port) + "/devtools/browser/sim"}};
    } else if (path == "/json" || path == "/json/list") {
      body = json::array();
      std::lock_guard lock(mutex);
      for (const auto& [id, tab] : tabs) body.push_back({{"id", id}, {"type", "page"}, {"url", tab->page->url()}});
    } else {
      status = 404;
      body = {{"error", "not found"}};
    }
    std::string payload = body.dump();
    std::string response = "HTTP/1.1 " + std::to_string(status) + (status == 200 ? " OK" : " Not Found") +
                           "\r\nContent-Type: application/json\r\nContent-Length: " + std::to_string(payload.size()) +
                           "\r\nConnection: close\r\n\r\n" + payload;
    try {
      socket.send_all(response);
    } catch (const Error&) {
    }
  }

  void accept_loop() {
    while (!stopping) {
      if (!listener.wait_readable(100ms)) continue;
      int fd = ::accept(listener.fd(), nullptr, nullptr);
      if (fd < 0) continue;
      net::Socket socket(fd);
      std::lock_guard lock(mutex);
      workers.emplace_back([this, s = std::make_shared<net::Socket>(std::move(socket))]() mutable {
        serve_http(std::move(*s));
      });
    }
  }
};

std::unique_ptr<SimBrowser> SimBrowser::start(Options options) {
  auto state = std::make_shared<State>();
  state->options = options;
  state->listener = net::tcp_listen(options.port, &state->port);
  State* raw = state.get();
  state->acceptor = std::thread([raw] { raw->accept_loop(); });
  return std::unique_ptr<SimBrowser>(new SimBrowser(std::move(state)));
}

SimBrowser::~SimBrowser() { stop(); }

std::string SimBrowser::endpoint() const { return "http://127.0.0.1:" + std::to_string(state_->port); }
int SimBrowser::port() const { return state_->port; }

void SimBrowser::stop() {
  if (state_->stopping.exchange(true)) return;
  if (state_->acceptor.joinable()) state_->acceptor.join();
  drop_connections();
  // Workers may spawn further workers (loads started from handlers), so
  // drain until none remain.
  while (true) {
    std::vector<std::thread> batch;
    {
      std::lock_guard lock(state_->mutex);
      batch.swap(state_->workers);
    }
    if (batch.empty()) break;
    for (auto& t : batch) {
      if (t.joinable()) t.join();
    }
  }
  state_->listener.close();
}

void SimBrowser::drop_connections() {
  std::lock_guard lock(state_->mutex);
  for (auto& conn : state_->connections) conn->ws.shutdown();
}

int SimBrowser::open_tabs() const {
  std::lock_guard lock(state_->mutex);
  return static_cast<int>(state_->tabs.size());
}

}  // namespace uxprobe::sim
