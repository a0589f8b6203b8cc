#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace uxprobe::harness {

// <corpus>/manifest.json:
//   {"schema_version": 1, "document_root": "www",
//    "sites": [{"name": "site1", "class": "personal-website", "root": "/site1/"}],
//    "overrides": [{"path": "/site1/old", "status": 301, "location": "/site1/"},
//                  {"path": "/site3/missing.png", "status": 404},
//                  {"path": "/misc/slow.html", "delay_ms": 3000}]}
struct FixtureSite {
  std::string name;
  std::string site_class;
  std::string root;  // URL path, begins and ends with '/'
  std::string description;
};

struct FixtureOverride {
  std::string path;
  int status = 0;  // 0 keeps the file's status
  std::string location;
  int delay_ms = 0;
};

struct FixtureManifest {
  std::filesystem::path corpus_dir;
  std::filesystem::path document_root;
  std::vector<FixtureSite> sites;
  std::vector<FixtureOverride> overrides;

  // Errors: kCorpusInvalid.
  static FixtureManifest load(const std::filesystem::path& corpus_dir);
  const FixtureSite* site(std::string_view name) const;
  const FixtureOverride* override_for(std::string_view path) const;
};

// Static server for the corpus. Responses are byte-identical across
// servings; declared delays only change timing.
class FixtureServer {
 public:
  // Port 0 picks a free port. Errors: kCorpusInvalid, kPortInUse.
  static std::unique_ptr<FixtureServer> start(const std::filesystem::path& corpus_dir, int port = 0);
  ~FixtureServer();

  int port() const;
  std::string base_url() const;  // http://127.0.0.1:<port>
  std::string url(std::string_view path) const;
  const FixtureManifest& manifest() const;
  void stop();

 private:
  struct Impl;
  explicit FixtureServer(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace uxprobe::harness
