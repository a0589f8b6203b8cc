#include <gtest/gtest.h>

#include "httplib.h"

#include <map>

#include "support.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"
#include "uxprobe/harness/config.hpp"
#include "uxprobe/harness/evaluation.hpp"
#include "uxprobe/harness/fixtures.hpp"
#include "uxprobe/harness/pipeline.hpp"

namespace uxprobe::harness {
namespace {

namespace fs = std::filesystem;

// --- metrics -------------------------------------------------------------

TEST(Metrics, CoverageOfNineteenInThirtyTwo) {
  auto m = compute_metrics(0, 0, 19, 32);
  ASSERT_TRUE(m.coverage);
  EXPECT_EQ(m.coverage->decimal(3), "0.594");
  EXPECT_EQ(m.coverage->percent(1), "59.4%");
  EXPECT_FALSE(m.false_positive_rate);
}

TEST(Metrics, FalsePositiveRateOfTwentyWithThreeVerified) {
  auto m = compute_metrics(20, 3, 0, 0);
  ASSERT_TRUE(m.false_positive_rate);
  EXPECT_EQ(*m.false_positive_rate, (Ratio{17, 20}));
  EXPECT_EQ(m.false_positive_rate->decimal(2), "0.85");
  EXPECT_EQ(m.false_positive_rate->percent(0), "85%");
  EXPECT_FALSE(m.coverage) << "no ground truth: undefined, no division";
}

TEST(Metrics, InvalidCounts) {
  EXPECT_THROW(compute_metrics(-1, 0, 0, 0), Error);
  EXPECT_THROW(compute_metrics(2, 3, 0, 0), Error);
  EXPECT_THROW(compute_metrics(0, 0, 5, 4), Error);
}

// Property: ratios are exact fractions in [0,1]; rendering agrees with an
// independent long-division oracle rounding half up.
TEST(Metrics, RatioRenderingMatchesOracle) {
  test::Gen gen(19);
  for (int i = 0; i < 5000; ++i) {
    std::int64_t den = gen.uniform(1, 1000);
    std::int64_t num = gen.uniform(0, static_cast<int>(den));
    Ratio r{num, den};
    ASSERT_GE(r.value(), 0.0);
    ASSERT_LE(r.value(), 1.0);
    int places = gen.uniform(0, 4);
    // Oracle: scaled = floor(num * 10^places * 2 / den + 1) / 2 in integers.
    std::int64_t scale = 1;
    for (int p = 0; p < places; ++p) scale *= 10;
    std::int64_t twice = (2 * num * scale) / den;
    std::int64_t rounded = (twice + 1) / 2;
    std::string digits = std::to_string(rounded);
    if (places > 0) {
      while (static_cast<int>(digits.size()) <= places) digits.insert(0, "0");
      digits.insert(digits.size() - static_cast<std::size_t>(places), ".");
    }
    ASSERT_EQ(r.decimal(places), digits) << num << "/" << den << " @" << places;
  }
}

TEST(Metrics, RandomCountsSatisfyDefinitions) {
  test::Gen gen(23);
  for (int i = 0; i < 2000; ++i) {
    int reported = gen.uniform(0, 50), verified = gen.uniform(0, reported);
    int truth = gen.uniform(0, 50), detected = gen.uniform(0, truth);
    auto m = compute_metrics(reported, verified, detected, truth);
    EXPECT_EQ(m.false_positive_rate.has_value(), reported > 0);
    EXPECT_EQ(m.coverage.has_value(), truth > 0);
    if (m.false_positive_rate) EXPECT_EQ(*m.false_positive_rate, (Ratio{reported - verified, reported}));
    if (m.coverage) EXPECT_EQ(*m.coverage, (Ratio{detected, truth}));
  }
}

// --- ground truth and matching --------------------------------------------

TEST(GroundTruth, CorpusFileIsValid) {
  auto truth = GroundTruth::load(test::corpus_dir() / "ground_truth.json");
  EXPECT_EQ(truth.bugs.size(), 6u);
  std::set<std::string> sites;
  for (const auto& b : truth.bugs) {
    EXPECT_FALSE(b.matcher.keywords.empty());
    EXPECT_FALSE(b.matcher.url_path_prefix.empty());
    sites.insert(b.site);
  }
  EXPECT_EQ(sites.size(), 5u);
}

TEST(GroundTruth, RejectsBadDocuments) {
  const char* bad[] = {
      "{",
      R"({"schema_version":1,"bugs":[{"id":"a","site":"s","category":"nonsense","page_path":"/","trigger":"t",
         "matcher":{"url_path_prefix":"/","keywords":["x"]}}]})",
      R"({"schema_version":1,"bugs":[{"id":"a","site":"s","category":"ui-ux-flaw","page_path":"/","trigger":"t",
         "matcher":{"url_path_prefix":"/","keywords":[]}}]})",
      R"({"schema_version":1,"bugs":[
         {"id":"a","site":"s","category":"ui-ux-flaw","page_path":"/","trigger":"t","matcher":{"url_path_prefix":"/","keywords":["x"]}},
         {"id":"a","site":"s","category":"ui-ux-flaw","page_path":"/","trigger":"t","matcher":{"url_path_prefix":"/","keywords":["y"]}}]})",
  };
  for (const char* text : bad) {
    try {
      GroundTruth::parse(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kCorpusInvalid);
    }
  }
}

TEST(Matching, KeywordGroupsAndAlternatives) {
  std::vector<std::string> kw = {"read more", "wrong|different"};
  EXPECT_TRUE(keywords_match(kw, "The READ MORE link opens a Different paper"));
  EXPECT_FALSE(keywords_match(kw, "The read more link works"));
  EXPECT_FALSE(keywords_match(kw, "a different paper"));
}

agent::Trajectory trajectory_on(std::vector<std::pair<std::string, std::string>> pages) {
  agent::Trajectory t;
  t.run_id = "run";
  int n = 0;
  for (auto& [page, result] : pages) {
    agent::TrajectoryStep s;
    s.step_number = ++n;
    s.element_map.page_url = page;
    s.outcome.resulting_url = result;
    t.steps.push_back(s);
  }
  return t;
}

TEST(Matching, StepPageOrResultingUrl) {
  auto t = trajectory_on({{"http://h/site3/", "http://h/site3/projects.html"}, {"http://h/", "http://h/"}});
  Matcher m{"/site3/projects", {"404"}};
  report::BugFinding f;
  f.step_number = 1;
  f.description = "Projects link returns 404";
  EXPECT_TRUE(matches(m, f, t));
  f.step_number = 2;
  EXPECT_FALSE(matches(m, f, t)) << "wrong page";
  f.step_number = 9;
  EXPECT_FALSE(matches(m, f, t)) << "invalid step never matches";
}

TEST(Evaluate, CountsDetectionsAndVerdicts) {
  GroundTruth truth;
  truth.bugs.push_back(SeededBug{"b1", "s", prompt::BugCategory::kBrokenElement, "/a/", "t", {"/a/", {"broken"}}});
  truth.bugs.push_back(SeededBug{"b2", "s", prompt::BugCategory::kUiUxFlaw, "/b/", "t", {"/b/", {"contrast"}}});
  RunRecord run;
  run.trajectory = trajectory_on({{"http://h/a/", "http://h/a/"}});
  run.report.findings = {report::BugFinding{1, {}, {}, "broken image", "x", "y", {}},
                         report::BugFinding{1, {}, {}, "unrelated", "x", "y", {}}};
  run.verdicts = {true, std::nullopt};
  auto ev = evaluate({run}, truth);
  EXPECT_EQ(ev.metrics.reported_count, 2);
  EXPECT_EQ(ev.metrics.verified_count, 1);
  EXPECT_EQ(ev.metrics.detected_count, 1);
  EXPECT_EQ(ev.metrics.ground_truth_count, 2);
  EXPECT_EQ(ev.unverified, std::vector<std::string>{"run#2"});
  ASSERT_EQ(ev.matches.size(), 2u);
  EXPECT_EQ(ev.matches[0].findings.size(), 1u);
  EXPECT_TRUE(ev.matches[1].findings.empty());
  std::string text = format_metrics(ev);
  EXPECT_NE(text.find("coverage:            50.0%"), std::string::npos) << text;
  EXPECT_NE(text.find("b2: missed"), std::string::npos);
}

// --- config ----------------------------------------------------------------

TEST(Config, DefaultsCoverEveryKnownKey) {
  auto c = Config::defaults();
  for (const auto& spec : known_keys()) EXPECT_EQ(c.get(spec.key), spec.default_value) << spec.key;
  EXPECT_EQ(c.get_int("episode.max_steps"), 20);
  EXPECT_EQ(c.get_int("browser.viewport_width"), 1280);
  EXPECT_EQ(c.get_int("browser.viewport_height"), 1024);
  EXPECT_EQ(c.get_int("batch.parallelism"), 2);
  EXPECT_TRUE(c.get_bool("episode.annotate"));
  EXPECT_EQ(c.get_number("live.temperature"), 0.0);
}

TEST(Config, EnvName) { EXPECT_EQ(env_name("browser.navigation_timeout_ms"), "UXPROBE_BROWSER_NAVIGATION_TIMEOUT_MS"); }

TEST(Config, PrecedenceFlagOverEnvOverFileOverDefault) {
  test::TempDir dir;
  write_file_atomic(dir / "u.conf", std::string_view("# comment\nepisode.max_steps = 7\nlive.model = \"from-file\"  # trailing\n"
                                                     "episode.reprompt_limit = 1\n"));
  std::map<std::string, std::string> env = {{"UXPROBE_EPISODE_MAX_STEPS", "9"}, {"UXPROBE_LIVE_MODEL", "from-env"}};
  auto lookup = [&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  ConfigInputs in;
  in.file = dir / "u.conf";
  in.overrides = {"episode.max_steps=11"};
  auto c = resolve_config(in, lookup);
  EXPECT_EQ(c.get_int("episode.max_steps"), 11);
  EXPECT_EQ(c.source("episode.max_steps"), "command line");
  EXPECT_EQ(c.get("live.model"), "from-env");
  EXPECT_EQ(c.get_int("episode.reprompt_limit"), 1);
  EXPECT_EQ(c.get_int("episode.history_screenshots"), 3);
}

TEST(Config, FileFromEnvironmentVariable) {
  test::TempDir dir;
  write_file_atomic(dir / "c.conf", std::string_view("paths.runs = out\n"));
  std::string file = (dir / "c.conf").string();
  auto lookup = [&](const char* name) -> const char* {
    return std::string_view(name) == "UXPROBE_CONFIG" ? file.c_str() : nullptr;
  };
  auto c = resolve_config({}, lookup);
  EXPECT_EQ(c.get_path("paths.runs"), dir.path() / "out") << "relative to the file";
}

TEST(Config, RejectsBadInput) {
  auto c = Config::defaults();
  auto code = [&](std::string_view key, std::string_view value) {
    try {
      c.set(key, value, "test");
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kPrecondition;
  };
  EXPECT_EQ(code("episode.max_steps", "0"), ErrorCode::kConfigError);
  EXPECT_EQ(code("episode.max_steps", "ten"), ErrorCode::kConfigError);
  EXPECT_EQ(code("episode.annotate", "perhaps"), ErrorCode::kConfigError);
  EXPECT_EQ(code("no.such.key", "1"), ErrorCode::kConfigError);
  EXPECT_EQ(code("live.api_key", "sk-123"), ErrorCode::kConfigError);
  EXPECT_EQ(code("backend.explore", "magic"), ErrorCode::kConfigError);
  EXPECT_EQ(c.get_int("episode.max_steps"), 20) << "failed writes leave the value alone";

  test::TempDir dir;
  write_file_atomic(dir / "bad.conf", std::string_view("this line has no equals sign\n"));
  EXPECT_THROW(c.load_file(dir / "bad.conf"), Error);
  EXPECT_THROW(c.load_file(dir / "missing.conf"), Error);
}

TEST(Config, BackendSpecsResolveScriptPaths) {
  auto c = Config::defaults();
  c.set("backend.explore", "scripted:s.txt", "test", "/base");
  EXPECT_EQ(c.get_backend("backend.explore"), "scripted:/base/s.txt");
  c.set("backend.explore", "live:gpt-4o-mini", "test");
  EXPECT_EQ(c.get_backend("backend.explore"), "live:gpt-4o-mini");
}

TEST(ParseBool, Spellings) {
  bool v = false;
  for (const char* t : {"true", "yes", "on", "1"}) {
    ASSERT_TRUE(parse_bool(t, v)) << t;
    EXPECT_TRUE(v);
  }
  for (const char* t : {"false", "no", "off", "0"}) {
    ASSERT_TRUE(parse_bool(t, v)) << t;
    EXPECT_FALSE(v);
  }
  EXPECT_FALSE(parse_bool("maybe", v));
}

// --- pipeline helpers ---------------------------------------------------------

TEST(Pipeline, RunSlug) {
  EXPECT_EQ(run_slug("http://127.0.0.1:8123/site1/"), "127.0.0.1-site1");
  EXPECT_EQ(run_slug("https://Example.org/a/b.html"), "example.org-a-b.html");
}

TEST(Pipeline, ExitCodes) {
  EXPECT_EQ(exit_code_for(Error(ErrorCode::kConfigError, "x")), kExitConfig);
  EXPECT_EQ(exit_code_for(Error(ErrorCode::kManifestParseError, "x")), kExitConfig);
  EXPECT_EQ(exit_code_for(Error(ErrorCode::kConnectionRefused, "x")), kExitFatal);
}

TEST(BatchManifest, ParsesAndValidates) {
  auto m = BatchManifest::parse(
      R"({"targets":[{"url":"${FIXTURES}/site1/","class":"personal-website","overrides":{"episode.max_steps":5}}]})",
      "/base", "http://127.0.0.1:9");
  ASSERT_EQ(m.targets.size(), 1u);
  EXPECT_EQ(m.targets[0].url, "http://127.0.0.1:9/site1/");
  ASSERT_EQ(m.targets[0].overrides.size(), 1u);
  EXPECT_EQ(m.targets[0].overrides[0], (std::pair<std::string, std::string>{"episode.max_steps", "5"}));

  for (const char* bad : {"", "{}", R"({"targets":[]})", R"({"targets":[{"url":"not a url"}]})",
                          R"({"targets":[{"url":"http://a/","overrides":{"no.such.key":1}}]})"}) {
    try {
      BatchManifest::parse(bad, "/base");
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kManifestParseError) << bad;
    }
  }
}

// --- fixture corpus ------------------------------------------------------------

TEST(FixtureManifest, LoadsCorpus) {
  auto m = FixtureManifest::load(test::corpus_dir());
  EXPECT_EQ(m.sites.size(), 5u);
  ASSERT_NE(m.site("site1"), nullptr);
  EXPECT_EQ(m.site("site1")->root, "/site1/");
  ASSERT_NE(m.override_for("/site1/old"), nullptr);
  EXPECT_EQ(m.override_for("/site1/old")->status, 301);
  EXPECT_EQ(m.override_for("/nothing"), nullptr);
  EXPECT_THROW(FixtureManifest::load("/nonexistent"), Error);
}

class FixtureServerTest : public ::testing::Test {
 protected:
  void SetUp() override { server_ = FixtureServer::start(test::corpus_dir()); }
  httplib::Result get(const std::string& path) {
    httplib::Client client(server_->base_url());
    return client.Get(path);
  }
  std::unique_ptr<FixtureServer> server_;
};

TEST_F(FixtureServerTest, ServesSiteRoot) {
  auto res = get("/site1/");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, read_text_file(test::corpus_dir() / "www" / "site1" / "index.html"));
  EXPECT_NE(res->get_header_value("Content-Type").find("text/html"), std::string::npos);
}

TEST_F(FixtureServerTest, DeclaredOverrides) {
  auto missing = get("/site3/projects.html");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  auto redirect = get("/site1/old");
  ASSERT_TRUE(redirect);
  EXPECT_EQ(redirect->status, 301);
  EXPECT_EQ(redirect->get_header_value("Location"), "/site1/");
  auto unknown = get("/no/such/file.html");
  ASSERT_TRUE(unknown);
  EXPECT_EQ(unknown->status, 404);
  auto escape = get("/../CMakeLists.txt");
  ASSERT_TRUE(escape);
  EXPECT_NE(escape->status, 200);
}

TEST_F(FixtureServerTest, DirectoryWithoutSlashRedirects) {
  auto res = get("/site5/posts");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 301);
  EXPECT_EQ(res->get_header_value("Location"), "/site5/posts/");
}

// Two servings of the corpus give byte-identical responses for every file.
TEST(FixtureServer, DeterministicAcrossServings) {
  auto a = FixtureServer::start(test::corpus_dir());
  auto b = FixtureServer::start(test::corpus_dir());
  httplib::Client ca(a->base_url()), cb(b->base_url());
  auto root = test::corpus_dir() / "www";
  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string path = "/" + fs::relative(entry.path(), root).generic_string();
    if (a->manifest().override_for(path) && a->manifest().override_for(path)->delay_ms > 0) continue;
    auto ra = ca.Get(path);
    auto rb = cb.Get(path);
    ASSERT_TRUE(ra && rb) << path;
    EXPECT_EQ(ra->status, rb->status) << path;
    EXPECT_EQ(ra->body, rb->body) << path;
    EXPECT_EQ(ra->get_header_value("Content-Type"), rb->get_header_value("Content-Type")) << path;
    ++files;
  }
  EXPECT_GT(files, 20);
}

TEST(FixtureServer, PortInUse) {
  auto a = FixtureServer::start(test::corpus_dir());
  try {
    FixtureServer::start(test::corpus_dir(), a->port());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPortInUse);
  }
}

}  // namespace
}  // namespace uxprobe::harness
