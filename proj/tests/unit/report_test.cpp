#include <gtest/gtest.h>

#include "support.hpp"
#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/report/report.hpp"

namespace uxprobe::report {
namespace {

ReportAssets assets() { return ReportAssets::load(test::assets_dir() / "report"); }

agent::Trajectory two_step_trajectory() {
  agent::Trajectory t;
  t.run_id = "r1";
  t.target_url = "http://127.0.0.1:8000/site1/";
  for (int i = 1; i <= 2; ++i) {
    agent::TrajectoryStep s;
    s.step_number = i;
    s.screenshot = test::solid_png(4, 4, static_cast<std::uint8_t>(i));
    s.screenshot_ref = s.screenshot.content_hash();
    s.element_map.page_url = "http://127.0.0.1:8000/site1/";
    browser::ElementEntry e;
    e.index = 1;
    e.role = browser::ElementRole::kLink;
    e.label = "Publications";
    e.bounding_box = {10, 10, 80, 16};
    e.target_url = "http://127.0.0.1:8000/site1/publications.html";
    s.element_map.entries.push_back(e);
    s.evaluation = "evaluation text " + std::to_string(i);
    s.next_goal = "goal text " + std::to_string(i);
    s.action = i == 1 ? vlm::AgentAction::click(1) : vlm::AgentAction::done("finished");
    s.outcome.resulting_url = "http://127.0.0.1:8000/site1/publications.html";
    t.steps.push_back(s);
  }
  return t;
}

std::string all_text(const std::vector<vlm::ChatTurn>& turns) {
  std::string out;
  for (const auto& t : turns) out += t.text + "\n";
  return out;
}

std::size_t image_count(const std::vector<vlm::ChatTurn>& turns) {
  std::size_t n = 0;
  for (const auto& t : turns) n += t.images.size();
  return n;
}

TEST(ReportAssets, LoadsVersionedFiles) {
  auto a = assets();
  EXPECT_TRUE(a.analysis_prompt.starts_with("Please analyze the following agent run trajectory"));
  EXPECT_NE(a.analysis_prompt.find("[Trajectory]"), std::string::npos);
  EXPECT_NE(a.format_instruction.find("## Findings"), std::string::npos);
  EXPECT_THROW(ReportAssets::load("/nonexistent"), Error);
}

TEST(BuildReportRequest, TwoStepStructure) {
  auto t = two_step_trajectory();
  auto turns = build_report_request(t, assets());
  EXPECT_EQ(turns.front().role, vlm::Role::kSystem);
  ASSERT_GE(turns.size(), 2u);
  EXPECT_TRUE(turns[1].text.starts_with("Please analyze the following agent run trajectory"));
  EXPECT_EQ(image_count(turns), 2u);
  std::string text = all_text(turns);
  auto e1 = text.find("evaluation text 1");
  auto g1 = text.find("goal text 1");
  auto a1 = text.find("click [1]");
  auto e2 = text.find("evaluation text 2");
  auto a2 = text.find("done: finished");
  ASSERT_NE(e1, std::string::npos);
  EXPECT_LT(e1, g1);
  EXPECT_LT(g1, a1);
  EXPECT_LT(a1, e2);
  EXPECT_LT(e2, a2);
  EXPECT_EQ(text.find("[Trajectory]"), std::string::npos);
  EXPECT_NE(text.find("Based on the above trajectory"), std::string::npos);
  EXPECT_NE(text.find("## Summary"), std::string::npos) << "format instruction appended";
  for (const auto& turn : turns) EXPECT_NO_THROW(vlm::validate(turn));
}

TEST(BuildReportRequest, EmptyTrajectory) {
  agent::Trajectory t;
  try {
    build_report_request(t, assets());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyTrajectory);
  }
}

// Property: without a limit every step's screenshot is attached; with one,
// the attached count fits and the stride is minimal.
TEST(BuildReportRequest, ImageCountProperty) {
  test::Gen gen(31);
  auto a = assets();
  for (int i = 0; i < 60; ++i) {
    auto t = gen.trajectory(40);
    EXPECT_EQ(image_count(build_report_request(t, a)), t.steps.size());
    int limit = gen.uniform(1, 12);
    auto limited = build_report_request(t, a, limit);
    std::size_t n = t.steps.size();
    EXPECT_LE(image_count(limited), static_cast<std::size_t>(limit));
    int k = screenshot_stride(n, limit);
    EXPECT_EQ(image_count(limited), (n + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k));
    if (k > 1) EXPECT_GT((n + static_cast<std::size_t>(k) - 2) / static_cast<std::size_t>(k - 1), static_cast<std::size_t>(limit));
    if (image_count(limited) < n) EXPECT_NE(all_text(limited).find("omitted"), std::string::npos);
  }
}

TEST(ScreenshotStride, Values) {
  EXPECT_EQ(screenshot_stride(10, 0), 1);
  EXPECT_EQ(screenshot_stride(10, 10), 1);
  EXPECT_EQ(screenshot_stride(11, 10), 2);
  EXPECT_EQ(screenshot_stride(20, 10), 2);
  EXPECT_EQ(screenshot_stride(21, 10), 3);
  EXPECT_EQ(screenshot_stride(100, 1), 100);
}

TEST(SerializeStep, NoOpStepShowsNote) {
  agent::TrajectoryStep s;
  s.step_number = 3;
  s.note = "no usable action after 3 replies";
  std::string text = serialize_step(s);
  EXPECT_TRUE(text.starts_with("Step 3\n"));
  EXPECT_NE(text.find("3. Action: none (no usable action after 3 replies)"), std::string::npos);
}

TEST(ParseSeverity, SynonymTable) {
  EXPECT_EQ(parse_severity("High"), Severity::kHigh);
  EXPECT_EQ(parse_severity("critical"), Severity::kHigh);
  EXPECT_EQ(parse_severity("P1"), Severity::kHigh);
  EXPECT_EQ(parse_severity("moderate"), Severity::kMedium);
  EXPECT_EQ(parse_severity("medium-high"), Severity::kMedium);
  EXPECT_EQ(parse_severity("minor"), Severity::kLow);
  EXPECT_EQ(parse_severity("cosmetic"), Severity::kLow);
  EXPECT_FALSE(parse_severity("catastrophic-ish"));
}

TEST(ParseNature, Normalization) {
  EXPECT_EQ(parse_nature("Feature Bug"), Nature::kFeatureBug);
  EXPECT_EQ(parse_nature("feature_bug"), Nature::kFeatureBug);
  EXPECT_EQ(parse_nature("VISUAL-GLITCH"), Nature::kVisualGlitch);
  EXPECT_FALSE(parse_nature("performance"));
}

TEST(ParseReport, SingleFinding) {
  std::string reply =
      "## Summary\nOne broken link.\n\n## Findings\n### Finding 1\n- Step: 7\n- Nature: feature bug\n"
      "- Severity: high\n- Description: Link goes nowhere\n- Expected: Opens the page\n- Actual: 404\n\n"
      "## Patterns\n- Dead links\n\n## Recommendations\n- Fix the link\n";
  auto r = parse_report_text(reply, 10);
  EXPECT_EQ(r.summary, "One broken link.");
  ASSERT_EQ(r.findings.size(), 1u);
  const auto& f = r.findings[0];
  EXPECT_EQ(f.step_number, 7);
  EXPECT_EQ(f.nature, Nature::kFeatureBug);
  EXPECT_EQ(f.severity, Severity::kHigh);
  EXPECT_EQ(f.description, "Link goes nowhere");
  EXPECT_EQ(f.expected_behavior, "Opens the page");
  EXPECT_EQ(f.actual_behavior, "404");
  EXPECT_TRUE(f.flags.empty());
  EXPECT_EQ(r.patterns, std::vector<std::string>{"Dead links"});
  EXPECT_EQ(r.recommendations, std::vector<std::string>{"Fix the link"});
  EXPECT_EQ(r.raw_reply, reply);
}

TEST(ParseReport, NoIssuesStated) {
  auto r = parse_report_text("I reviewed all steps and found no issues with the website.", 3);
  EXPECT_TRUE(r.findings.empty());
  EXPECT_FALSE(r.summary.empty());
  auto sectioned = parse_report_text("## Summary\nNo issues identified.\n\n## Findings\n\n## Patterns\n", 3);
  EXPECT_TRUE(sectioned.findings.empty());
  EXPECT_EQ(sectioned.summary, "No issues identified.");
}

TEST(ParseReport, OutOfRangeStepKeptAndFlagged) {
  std::string reply =
      "## Findings\n### Finding 1\n- Step: 99\n- Nature: visual glitch\n- Severity: low\n"
      "- Description: Overlap\n- Expected: a\n- Actual: b\n";
  auto r = parse_report_text(reply, 10);
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_EQ(r.findings[0].step_number, 99);
  EXPECT_TRUE(r.findings[0].has_flag(kFlagInvalidStep));
}

TEST(ParseReport, SynonymsAndGuesses) {
  std::string reply =
      "## Findings\n### Finding 1\n- Step: 2\n- Severity: critical\n- Description: The image fails to render\n"
      "- Expected: photo\n- Actual: broken icon\n### Finding 2\n- Step: 1\n- Nature: feature bug\n"
      "- Description: Form does nothing\n- Expected: submit\n- Actual: nothing\n";
  auto r = parse_report_text(reply, 3);
  ASSERT_EQ(r.findings.size(), 2u);
  // Step order.
  EXPECT_EQ(r.findings[0].step_number, 1);
  EXPECT_TRUE(r.findings[0].has_flag(kFlagSeverityGuessed));
  EXPECT_EQ(r.findings[0].severity, Severity::kMedium);
  EXPECT_EQ(r.findings[1].severity, Severity::kHigh);
  EXPECT_TRUE(r.findings[1].has_flag(kFlagNatureGuessed));
  EXPECT_EQ(r.findings[1].nature, Nature::kVisualGlitch);
}

TEST(ParseReport, LooseProseStyleReply) {
  std::string reply =
      "**Summary:** The site has a dead navigation link.\n\n**Issues**\n1. Step 4: the Projects link returns 404.\n"
      "   Severity: major\n   Type: Feature bug\n   Expected behavior: projects page\n   Actual behavior: Not Found\n\n"
      "**Recommendations:**\n* Restore the projects page\n";
  auto r = parse_report_text(reply, 5);
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_EQ(r.findings[0].step_number, 4);
  EXPECT_EQ(r.findings[0].severity, Severity::kHigh);
  EXPECT_EQ(r.findings[0].nature, Nature::kFeatureBug);
  EXPECT_EQ(r.findings[0].actual_behavior, "Not Found");
  EXPECT_EQ(r.recommendations, std::vector<std::string>{"Restore the projects page"});
}

TEST(ParseReport, UnrecognizableReplyIsError) {
  try {
    parse_report_text("Lorem ipsum dolor sit amet.", 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnparseableReport);
  }
}

TEST(ParseReport, FillsMissingFieldsAndFlags) {
  auto r = parse_report_text("## Findings\n### Finding 1\n- Step: 1\n- Description: only a description\n", 2);
  ASSERT_EQ(r.findings.size(), 1u);
  const auto& f = r.findings[0];
  EXPECT_FALSE(f.expected_behavior.empty());
  EXPECT_FALSE(f.actual_behavior.empty());
  EXPECT_TRUE(f.has_flag(kFlagMissingField));
}

TEST(ParseReport, CarriesRunMetadata) {
  auto t = two_step_trajectory();
  vlm::ModelReply reply{"## Summary\nNo issues identified.\n", "model-x", {}, std::nullopt};
  auto r = parse_report(reply, t);
  EXPECT_EQ(r.run_id, "r1");
  EXPECT_EQ(r.target_url, t.target_url);
  EXPECT_EQ(r.generated_by, "model-x");
}

// Invariant: every parsed finding has non-empty text fields and a flag when
// its step is outside the trajectory.
TEST(ParseReport, FindingInvariantsOnRandomStructuredReplies) {
  test::Gen gen(55);
  for (int i = 0; i < 500; ++i) {
    std::size_t steps = static_cast<std::size_t>(gen.uniform(1, 12));
    std::string reply = "## Summary\n" + gen.text(40) + "\n\n## Findings\n";
    int n = gen.uniform(0, 4);
    for (int j = 0; j < n; ++j) {
      reply += "### Finding " + std::to_string(j + 1) + "\n";
      if (gen.coin(0.9)) reply += "- Step: " + std::to_string(gen.uniform(-2, 15)) + "\n";
      if (gen.coin(0.8)) reply += std::string("- Nature: ") + (gen.coin() ? "feature bug" : "visual glitch") + "\n";
      if (gen.coin(0.8)) reply += "- Severity: " + std::string(gen.coin() ? "minor" : "severe") + "\n";
      if (gen.coin(0.8)) reply += "- Description: d" + std::to_string(j) + "\n";
      if (gen.coin(0.8)) reply += "- Expected: e\n";
      if (gen.coin(0.8)) reply += "- Actual: a\n";
    }
    BugReport r;
    try {
      r = parse_report_text(reply, steps);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::kUnparseableReport);
      continue;
    }
    for (const auto& f : r.findings) {
      EXPECT_FALSE(trim(f.description).empty());
      EXPECT_FALSE(trim(f.expected_behavior).empty());
      EXPECT_FALSE(trim(f.actual_behavior).empty());
      bool in_range = f.step_number >= 1 && f.step_number <= static_cast<int>(steps);
      EXPECT_EQ(!in_range, f.has_flag(kFlagInvalidStep)) << reply;
    }
    for (std::size_t j = 1; j < r.findings.size(); ++j) {
      EXPECT_LE(r.findings[j - 1].step_number, r.findings[j].step_number);
    }
  }
}

TEST(ParseReport, ArbitraryBytesNeverEscapeAsUndefinedErrors) {
  test::Gen gen(66);
  for (int i = 0; i < 3000; ++i) {
    std::string input = i % 3 == 0 ? gen.bytes(400) : "## Findings\n### Finding 1\n- Step: " + gen.text(80);
    try {
      parse_report_text(input, static_cast<std::size_t>(gen.uniform(0, 5)));
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::kUnparseableReport);
    } catch (const std::exception& e) {
      FAIL() << e.what();
    }
  }
}

TEST(RenderMarkdown, SectionsAndOrder) {
  BugReport r;
  r.run_id = "r";
  r.summary = "Two problems.";
  r.findings = {BugFinding{2, Nature::kFeatureBug, Severity::kHigh, "second", "x", "y", {}},
                BugFinding{5, Nature::kVisualGlitch, Severity::kLow, "fifth", "x", "y", {}}};
  std::string md = render_markdown(r);
  for (const char* heading : {"## Summary", "## Findings", "## Patterns", "## Recommendations"}) {
    EXPECT_NE(md.find(heading), std::string::npos) << heading;
  }
  auto first = md.find("### Finding 1");
  auto second = md.find("### Finding 2");
  ASSERT_NE(second, std::string::npos);
  EXPECT_LT(first, second);
  EXPECT_LT(md.find("second"), md.find("fifth"));
  EXPECT_NE(md.find("Step: 2"), std::string::npos);
  EXPECT_NE(md.find("visual glitch"), std::string::npos);
}

TEST(RenderMarkdown, EmptyFindingsSentinel) {
  BugReport r;
  r.summary = "Clean.";
  EXPECT_NE(render_markdown(r).find("No issues identified"), std::string::npos);
}

// Property: structured render -> parse is the identity.
TEST(Structured, RoundTrip) {
  test::Gen gen(77);
  for (int i = 0; i < 1000; ++i) {
    BugReport r = gen.report(10);
    ASSERT_EQ(parse_structured(render_structured(r)), r);
  }
}

TEST(Structured, RejectsDamagedDocuments) {
  EXPECT_THROW(parse_structured("{"), Error);
  EXPECT_THROW(parse_structured(R"({"schema_version":2})"), Error);
  BugReport r;
  r.findings.push_back(BugFinding{1, Nature::kFeatureBug, Severity::kLow, "d", "e", "a", {}});
  std::string text = render_structured(r);
  auto pos = text.find("\"low\"");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 5, "\"extreme\"");
  try {
    parse_structured(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptRecord);
  }
}

TEST(GenerateReport, UsesBackendAndKeepsRawReplyOnFailure) {
  auto t = two_step_trajectory();
  vlm::ScriptedBackend good(vlm::ReplyScript{{"## Summary\nNo issues identified.\n"}, vlm::ExhaustionPolicy::kError},
                            "scripted:x");
  auto r = generate_report(good, t, assets());
  EXPECT_EQ(r.generated_by, "scripted:x");
  EXPECT_EQ(image_count(good.requests()[0]), 2u);

  vlm::ScriptedBackend bad(vlm::ReplyScript{{"gibberish"}, vlm::ExhaustionPolicy::kError});
  std::string raw;
  EXPECT_THROW(generate_report(bad, t, assets(), {}, &raw), Error);
  EXPECT_EQ(raw, "gibberish");
}

}  // namespace
}  // namespace uxprobe::report
