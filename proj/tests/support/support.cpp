#include "support.hpp"

#include <unistd.h>

#include <array>
#include <atomic>
#include <cstdlib>

#include "uxprobe/common/error.hpp"
#include "uxprobe/sim/page.hpp"

namespace uxprobe::test {

namespace fs = std::filesystem;

fs::path source_dir() { return UXPROBE_SOURCE_DIR; }
fs::path corpus_dir() { return source_dir() / "fixtures"; }
fs::path assets_dir() { return source_dir() / "assets"; }

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("uxprobe-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

SimEnv SimEnv::start() {
  SimEnv env;
  env.server = harness::FixtureServer::start(corpus_dir());
  env.browser = sim::SimBrowser::start();
  return env;
}

browser::SessionConfig SimEnv::session_config(int width, int height) const {
  browser::SessionConfig c;
  c.browser_endpoint = browser->endpoint();
  c.viewport_width = width;
  c.viewport_height = height;
  c.navigation_timeout = std::chrono::milliseconds(10000);
  c.action_settle_delay = std::chrono::milliseconds(20);
  return c;
}

std::optional<fs::path> chrome_executable() {
  const char* value = std::getenv("UXPROBE_CHROME");
  if (value == nullptr || *value == '\0') return std::nullopt;
  fs::path p(value);
  if (!fs::exists(p)) return std::nullopt;
  return p;
}

int Gen::uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

bool Gen::coin(double p) { return std::bernoulli_distribution(p)(rng_); }

std::string Gen::text(int max_len) {
  static const std::array<std::string, 10> specials = {"\"", "\\", "{", "}", "\n", "\t", "é", "→", "日本", "```"};
  std::string out;
  int n = uniform(0, max_len);
  for (int i = 0; i < n; ++i) {
    if (coin(0.1)) {
      out += specials[static_cast<std::size_t>(uniform(0, static_cast<int>(specials.size()) - 1))];
    } else {
      out += static_cast<char>(uniform(0x20, 0x7e));
    }
  }
  return out;
}

std::string Gen::nonempty_text(int max_len) {
  std::string out;
  while (out.find_first_not_of(" \t\n") == std::string::npos) out = text(max_len);
  return out;
}

std::string Gen::bytes(int max_len) {
  std::string out;
  int n = uniform(0, max_len);
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out += static_cast<char>(uniform(0, 255));
  return out;
}

std::string Gen::http_url() {
  static const std::array<std::string, 4> hosts = {"example.com", "127.0.0.1:8080", "localhost", "a.b-c.org"};
  std::string url = coin() ? "http://" : "https://";
  url += hosts[static_cast<std::size_t>(uniform(0, 3))];
  int segments = uniform(0, 3);
  url += "/";
  for (int i = 0; i < segments; ++i) url += "p" + std::to_string(uniform(0, 99)) + (i + 1 < segments ? "/" : "");
  if (coin(0.3)) url += "?q=" + std::to_string(uniform(0, 9999));
  return url;
}

vlm::AgentAction Gen::action() {
  switch (uniform(0, 5)) {
    case 0: return vlm::AgentAction::click(uniform(1, 500));
    case 1: return vlm::AgentAction::type(uniform(1, 500), text(40));
    case 2: return vlm::AgentAction::scroll(coin() ? vlm::ScrollDirection::kUp : vlm::ScrollDirection::kDown);
    case 3: return vlm::AgentAction::navigate(http_url());
    case 4: return vlm::AgentAction::back();
    default: return vlm::AgentAction::done(text(40));
  }
}

browser::ElementMap Gen::element_map(int max_entries) {
  browser::ElementMap map;
  map.page_url = http_url();
  map.captured_at = uniform(0, 50);
  int n = uniform(0, max_entries);
  for (int i = 1; i <= n; ++i) {
    browser::ElementEntry e;
    e.index = i;
    e.role = static_cast<browser::ElementRole>(uniform(0, 5));
    e.label = nonempty_text(20);
    e.bounding_box = {uniform(0, 2000) / 2.0, uniform(0, 2000) / 4.0, uniform(1, 400) / 2.0, uniform(1, 100) / 8.0};
    if (e.role == browser::ElementRole::kLink) e.target_url = http_url();
    e.off_screen = coin(0.2);
    if (e.role == browser::ElementRole::kTextInput) e.value = text(10);
    e.backend_node_id = uniform(1, 10000);
    e.hit_node_ids = {e.backend_node_id};
    if (coin()) e.hit_node_ids.push_back(e.backend_node_id + 1);
    map.entries.push_back(std::move(e));
  }
  return map;
}

agent::TrajectoryStep Gen::step(int step_number) {
  agent::TrajectoryStep s;
  s.step_number = step_number;
  s.screenshot = solid_png(uniform(1, 16), uniform(1, 16), static_cast<std::uint8_t>(uniform(0, 255)));
  s.screenshot_ref = s.screenshot.content_hash();
  s.annotated = coin();
  s.element_map = element_map(6);
  s.evaluation = text(60);
  s.next_goal = text(60);
  if (coin(0.9)) s.action = action();
  s.note = coin(0.2) ? text(30) : "";
  s.outcome.status = static_cast<browser::OutcomeStatus>(uniform(0, 4));
  s.outcome.resulting_url = http_url();
  int errors = uniform(0, 2);
  for (int i = 0; i < errors; ++i) s.outcome.console_errors.push_back(nonempty_text(30));
  s.outcome.detail = text(20);
  s.raw_reply = text(120);
  return s;
}

agent::Trajectory Gen::trajectory(int max_steps) {
  agent::Trajectory t;
  t.run_id = "run-" + std::to_string(uniform(0, 1 << 30));
  t.target_url = http_url();
  t.prompt_id = "personal-website/gen" + std::to_string(uniform(0, 3));
  t.prompt_text = nonempty_text(80);
  t.model_id = "scripted";
  t.config.max_steps = uniform(1, 30);
  t.config.annotate_screenshots = coin();
  t.config.reprompt_limit_per_step = uniform(0, 3);
  t.config.history_screenshots = uniform(1, 5);
  t.started_at = "2025-01-31T12:00:00Z";
  int n = uniform(1, max_steps);
  for (int i = 1; i <= n; ++i) t.steps.push_back(step(i));
  return t;
}

report::BugReport Gen::report(std::size_t step_count) {
  report::BugReport r;
  r.run_id = "run-" + std::to_string(uniform(0, 1000));
  r.target_url = http_url();
  r.summary = text(80);
  int n = uniform(0, 5);
  for (int i = 0; i < n; ++i) {
    report::BugFinding f;
    f.step_number = uniform(0, static_cast<int>(step_count) + 3);
    f.nature = coin() ? report::Nature::kFeatureBug : report::Nature::kVisualGlitch;
    f.severity = static_cast<report::Severity>(uniform(0, 2));
    f.description = nonempty_text(60);
    f.expected_behavior = nonempty_text(40);
    f.actual_behavior = nonempty_text(40);
    if (coin(0.3)) f.flags.emplace_back(report::kFlagSeverityGuessed);
    if (coin(0.2)) f.flags.emplace_back(report::kFlagInvalidStep);
    r.findings.push_back(std::move(f));
  }
  int p = uniform(0, 3);
  for (int i = 0; i < p; ++i) r.patterns.push_back(nonempty_text(30));
  int q = uniform(0, 3);
  for (int i = 0; i < q; ++i) r.recommendations.push_back(nonempty_text(30));
  r.generated_by = "scripted:" + std::to_string(uniform(0, 9));
  r.raw_reply = text(200);
  return r;
}

ImageBlob solid_png(int width, int height, std::uint8_t shade) {
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3, shade);
  auto blob = ImageBlob::from_png(sim::encode_png(width, height, rgb));
  if (!blob) throw Error(ErrorCode::kPrecondition, "encode_png produced an unreadable image");
  return *blob;
}

}  // namespace uxprobe::test
