#include "uxprobe/harness/fixtures.hpp"

#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"

namespace uxprobe::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void corpus_error(const std::string& message) { throw Error(ErrorCode::kCorpusInvalid, message); }

std::string content_type(const fs::path& file) {
  std::string ext = file.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".css") return "text/css; charset=utf-8";
  if (ext == ".js") return "text/javascript; charset=utf-8";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".txt") return "text/plain; charset=utf-8";
  if (ext == ".pdf") return "application/pdf";
  return "application/octet-stream";
}

std::string status_page(int status) {
  std::string reason = httplib::status_message(status);
  return "<!DOCTYPE html>\n<html><head><title>" + std::to_string(status) + " " + reason + "</title></head><body><h1>" +
         reason + "</h1></body></html>\n";
}

}  // namespace

FixtureManifest FixtureManifest::load(const fs::path& corpus_dir) {
  FixtureManifest m;
  m.corpus_dir = corpus_dir;
  fs::path file = corpus_dir / "manifest.json";
  if (!fs::exists(file)) corpus_error("no manifest.json in " + corpus_dir.string());
  try {
    json doc = json::parse(read_text_file(file));
    if (doc.at("schema_version").get<int>() != 1) corpus_error("unsupported manifest schema version");
    m.document_root = corpus_dir / doc.value("document_root", "www");
    for (const auto& s : doc.at("sites")) {
      FixtureSite site{s.at("name").get<std::string>(), s.at("class").get<std::string>(),
                       s.at("root").get<std::string>(), s.value("description", "")};
      if (!site.root.starts_with('/') || !site.root.ends_with('/')) {
        corpus_error("site root '" + site.root + "' must begin and end with '/'");
      }
      if (!fs::is_directory(m.document_root / site.root.substr(1))) {
        corpus_error("site '" + site.name + "' has no directory for " + site.root);
      }
      m.sites.push_back(std::move(site));
    }
    for (const auto& o : doc.value("overrides", json::array())) {
      FixtureOverride entry{o.at("path").get<std::string>(), o.value("status", 0), o.value("location", ""),
                            o.value("delay_ms", 0)};
      if (!entry.path.starts_with('/')) corpus_error("override path '" + entry.path + "' must begin with '/'");
      if (entry.status >= 300 && entry.status < 400 && entry.location.empty()) {
        corpus_error("redirect override for " + entry.path + " has no location");
      }
      if (entry.status != 0 && (entry.status < 200 || entry.status > 599)) {
        corpus_error("override for " + entry.path + " has status " + std::to_string(entry.status));
      }
      m.overrides.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    corpus_error(std::string("manifest.json: ") + e.what());
  }
  if (!fs::is_directory(m.document_root)) corpus_error("document root " + m.document_root.string() + " is missing");
  if (m.sites.empty()) corpus_error("manifest lists no sites");
  return m;
}

const FixtureSite* FixtureManifest::site(std::string_view name) const {
  for (const auto& s : sites) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const FixtureOverride* FixtureManifest::override_for(std::string_view path) const {
  for (const auto& o : overrides) {
    if (o.path == path) return &o;
  }
  return nullptr;
}

struct FixtureServer::Impl {
  FixtureManifest manifest;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  void handle(const httplib::Request& req, httplib::Response& res) {
    const std::string& path = req.path;
    if (const FixtureOverride* o = manifest.override_for(path)) {
      if (o->delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(o->delay_ms));
      if (o->status >= 300 && o->status < 400) {
        res.status = o->status;
        res.set_header("Location", o->location);
        res.set_content(status_page(o->status), "text/html; charset=utf-8");
        return;
      }
      if (o->status != 0) {
        res.status = o->status;
        res.set_content(status_page(o->status), "text/html; charset=utf-8");
        return;
      }
    }
    if (path.empty() || path.front() != '/' || path.find("..") != std::string::npos) {
      res.status = 404;
      res.set_content(status_page(404), "text/html; charset=utf-8");
      return;
    }
    fs::path file = manifest.document_root / path.substr(1);
    std::error_code ec;
    if (fs::is_directory(file, ec)) {
      if (!path.ends_with('/')) {
        res.status = 301;
        res.set_header("Location", path + "/");
        res.set_content(status_page(301), "text/html; charset=utf-8");
        return;
      }
      file /= "index.html";
    }
    if (!fs::is_regular_file(file, ec)) {
      res.status = 404;
      res.set_content(status_page(404), "text/html; charset=utf-8");
      return;
    }
    auto bytes = read_binary_file(file);
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()), content_type(file));
  }
};

FixtureServer::FixtureServer(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

FixtureServer::~FixtureServer() { stop(); }

std::unique_ptr<FixtureServer> FixtureServer::start(const fs::path& corpus_dir, int port) {
  auto impl = std::make_unique<Impl>();
  impl->manifest = FixtureManifest::load(corpus_dir);
  Impl* raw = impl.get();
  impl->server.Get(".*", [raw](const httplib::Request& req, httplib::Response& res) { raw->handle(req, res); });
  impl->server.set_keep_alive_max_count(100);
  // httplib's default also sets SO_REUSEPORT, which would let a second
  // server share a port that is already taken.
  impl->server.set_socket_options([](socket_t sock) {
    int one = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  });
  if (port == 0) {
    impl->port = impl->server.bind_to_any_port("127.0.0.1");
    if (impl->port <= 0) throw Error(ErrorCode::kPortInUse, "cannot bind an ephemeral port on 127.0.0.1");
  } else {
    if (!impl->server.bind_to_port("127.0.0.1", port)) {
      throw Error(ErrorCode::kPortInUse, "port " + std::to_string(port) + " is already in use");
    }
    impl->port = port;
  }
  impl->thread = std::thread([raw] { raw->server.listen_after_bind(); });
  impl->server.wait_until_ready();
  return std::unique_ptr<FixtureServer>(new FixtureServer(std::move(impl)));
}

int FixtureServer::port() const { return impl_->port; }

std::string FixtureServer::base_url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

std::string FixtureServer::url(std::string_view path) const { return base_url() + std::string(path); }

const FixtureManifest& FixtureServer::manifest() const { return impl_->manifest; }

void FixtureServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace uxprobe::harness
