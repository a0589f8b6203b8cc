#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"
#include "uxprobe/browser/overlay.hpp"
#include "uxprobe/browser/process.hpp"
#include "uxprobe/browser/session.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/harness/evaluation.hpp"
#include "uxprobe/harness/pipeline.hpp"

// Runs against a real headless Chromium when UXPROBE_CHROME names one.

namespace uxprobe::browser {
namespace {

// Stand-in for the overlay script: one absolutely positioned badge per
// element, tagged so the page can be queried for them.
const char* kOverlayDouble = R"js(
window.__uxprobeOverlay = {
  annotate(spec) {
    for (const e of spec.elements) {
      const b = document.createElement('div');
      b.setAttribute('data-uxprobe-badge', String(e.index));
      b.textContent = String(e.index);
      b.style.cssText = 'position:fixed;z-index:2147483647;pointer-events:none;' +
        'left:' + e.x + 'px;top:' + e.y + 'px;font:' + spec.style.font_px + 'px sans-serif;' +
        'background:' + spec.style.background + ';color:' + spec.style.text_color;
      document.documentElement.appendChild(b);
    }
    return spec.elements.length;
  },
  clear() {
    for (const b of document.querySelectorAll('[data-uxprobe-badge]')) b.remove();
  }
};
)js";

class ChromeTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto exe = test::chrome_executable();
    if (!exe) return;
    server_ = harness::FixtureServer::start(test::corpus_dir()).release();
    process_ = new BrowserProcess(BrowserProcess::launch(*exe));
  }
  static void TearDownTestSuite() {
    delete process_;
    delete server_;
    process_ = nullptr;
    server_ = nullptr;
  }
  void SetUp() override {
    if (!process_) GTEST_SKIP() << "UXPROBE_CHROME not set";
  }
  BrowserSession open() {
    SessionConfig c;
    c.browser_endpoint = process_->endpoint();
    c.viewport_width = 1024;
    c.viewport_height = 768;
    c.action_settle_delay = std::chrono::milliseconds(200);
    return BrowserSession::open(c);
  }
  std::string url(std::string_view path) { return server_->url(path); }

  static harness::FixtureServer* server_;
  static BrowserProcess* process_;
};
harness::FixtureServer* ChromeTest::server_ = nullptr;
BrowserProcess* ChromeTest::process_ = nullptr;

TEST_F(ChromeTest, ScreenshotMatchesViewport) {
  auto s = open();
  ASSERT_TRUE(s.navigate(url("/site1/")).ok());
  auto shot = s.capture_screenshot();
  EXPECT_EQ(shot.width, 1024);
  EXPECT_EQ(shot.height, 768);
}

TEST_F(ChromeTest, ExtractionIsABijectionWithVisibleInteractiveElements) {
  auto s = open();
  ASSERT_TRUE(s.navigate(url("/misc/hidden.html")).ok());
  auto map = s.extract_elements();
  EXPECT_NO_THROW(validate(map));
  ASSERT_EQ(map.size(), 2u) << map.describe();
  EXPECT_EQ(map.entries[0].label, "Visible link");
  EXPECT_EQ(map.entries[1].role, ElementRole::kButton);
  std::string visible = s.evaluate(
      "[...document.querySelectorAll('a,button,input,select,textarea')]"
      ".filter(e => e.getClientRects().length && getComputedStyle(e).visibility !== 'hidden').length");
  EXPECT_EQ(visible, "2");
}

TEST_F(ChromeTest, OverlayBadgesMatchTheMapAndClearRestoresThePage) {
  auto s = open();
  ASSERT_TRUE(s.navigate(url("/site1/")).ok());
  auto map = s.extract_elements();
  ASSERT_FALSE(map.empty());
  auto before = s.capture_screenshot();
  auto overlay = Overlay::from_source(kOverlayDouble);
  EXPECT_EQ(overlay.annotate(s, map), static_cast<int>(map.size()));
  EXPECT_EQ(s.evaluate("document.querySelectorAll('[data-uxprobe-badge]').length"), std::to_string(map.size()));
  EXPECT_NE(s.capture_screenshot().png, before.png);
  overlay.annotate(s, map);
  EXPECT_EQ(s.evaluate("document.querySelectorAll('[data-uxprobe-badge]').length"), std::to_string(2 * map.size()));
  overlay.clear(s);
  EXPECT_EQ(s.evaluate("document.querySelectorAll('[data-uxprobe-badge]').length"), "0");
  EXPECT_EQ(s.capture_screenshot().content_hash(), before.content_hash());
  EXPECT_EQ(s.extract_elements().entries, map.entries) << "badges are not interactive elements";
}

TEST_F(ChromeTest, ClicksLandOnTheirTargets) {
  auto s = open();
  ASSERT_TRUE(s.navigate(url("/site1/")).ok());
  auto map = s.extract_elements();
  int checked = 0;
  for (const auto& e : map.entries) {
    if (!e.target_url || e.off_screen || e.target_url->find("/site1/") == std::string::npos) continue;
    ASSERT_TRUE(s.navigate(url("/site1/")).ok());
    auto fresh = s.extract_elements();
    auto outcome = s.execute_action(vlm::AgentAction::click(e.index), fresh);
    EXPECT_TRUE(outcome.ok()) << e.label << ": " << outcome.detail;
    std::string expected = *e.target_url;
    auto path = expected.substr(server_->base_url().size());
    if (const auto* o = server_->manifest().override_for(path); o && !o->location.empty()) {
      expected = server_->url(o->location);
    }
    EXPECT_EQ(outcome.resulting_url, expected) << e.label;
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST_F(ChromeTest, TypingIsReadBack) {
  auto s = open();
  ASSERT_TRUE(s.navigate(url("/misc/form.html")).ok());
  auto map = s.extract_elements();
  const ElementEntry* input = nullptr;
  for (const auto& e : map.entries) {
    if (e.role == ElementRole::kTextInput) input = &e;
  }
  ASSERT_NE(input, nullptr) << map.describe();
  ASSERT_TRUE(s.execute_action(vlm::AgentAction::type(input->index, "hello"), map).ok());
  EXPECT_EQ(s.extract_elements().find(input->index)->value, "hello");
}

TEST_F(ChromeTest, ConsoleErrorsAreCollected) {
  auto s = open();
  auto outcome = s.navigate(url("/misc/console-error.html"));
  ASSERT_TRUE(outcome.ok());
  bool found = false;
  for (const auto& e : outcome.console_errors) found |= e.find("widget failed to initialise") != std::string::npos;
  EXPECT_TRUE(found);
}

// The scripted fixture batch against the real browser: every seeded bug
// is found, well inside five minutes.
TEST_F(ChromeTest, SeededBatchFindsEveryBug) {
  test::TempDir dir;
  harness::Config config = harness::Config::defaults();
  config.set("paths.runs", (dir / "runs").string(), "test");
  config.set("paths.bug_db", (dir / "bugs.ndjson").string(), "test");
  config.set("paths.assets", test::assets_dir().string(), "test");
  config.set("episode.annotate", "false", "test");
  config.set("browser.settle_ms", "200", "test");
  auto started = std::chrono::steady_clock::now();
  auto manifest = harness::BatchManifest::load(test::corpus_dir() / "batch.json", server_->base_url());
  std::ostringstream log;
  auto batch = harness::run_batch(config, manifest, process_->endpoint(), log);
  EXPECT_EQ(batch.exit_code, harness::kExitOk) << log.str();
  auto ev = harness::evaluate(harness::load_runs(dir / "runs"),
                              harness::GroundTruth::load(test::corpus_dir() / "ground_truth.json"));
  ASSERT_TRUE(ev.metrics.coverage);
  EXPECT_EQ(ev.metrics.coverage->percent(1), "100.0%") << harness::format_metrics(ev) << log.str();
  EXPECT_LT(std::chrono::steady_clock::now() - started, std::chrono::minutes(5));
}

}  // namespace
}  // namespace uxprobe::browser
