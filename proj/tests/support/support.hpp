#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "uxprobe/agent/trajectory.hpp"
#include "uxprobe/browser/session.hpp"
#include "uxprobe/harness/fixtures.hpp"
#include "uxprobe/report/report.hpp"
#include "uxprobe/sim/sim_browser.hpp"
#include "uxprobe/vlm/action.hpp"

namespace uxprobe::test {

std::filesystem::path source_dir();
std::filesystem::path corpus_dir();
std::filesystem::path assets_dir();

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Fixture server plus simulated browser, shared by the integration suites.
struct SimEnv {
  std::unique_ptr<harness::FixtureServer> server;
  std::unique_ptr<sim::SimBrowser> browser;

  static SimEnv start();
  std::string url(std::string_view path) const { return server->url(path); }
  browser::SessionConfig session_config(int width = 1280, int height = 1024) const;
};

// Chromium executable from $UXPROBE_CHROME, when set and present.
std::optional<std::filesystem::path> chrome_executable();

// Deterministic generators for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  int uniform(int lo, int hi);  // inclusive
  bool coin(double p = 0.5);
  // Printable ASCII plus a sprinkling of multi-byte UTF-8 and JSON-hostile
  // characters (quotes, backslashes, braces, newlines).
  std::string text(int max_len);
  std::string nonempty_text(int max_len);
  std::string bytes(int max_len);  // arbitrary bytes, including NUL
  std::string http_url();

  vlm::AgentAction action();
  browser::ElementMap element_map(int max_entries);
  agent::TrajectoryStep step(int step_number);
  agent::Trajectory trajectory(int max_steps);
  report::BugReport report(std::size_t step_count);

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Minimal valid PNG of the given size (solid colour).
ImageBlob solid_png(int width, int height, std::uint8_t shade);

}  // namespace uxprobe::test
