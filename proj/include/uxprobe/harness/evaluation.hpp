#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uxprobe/agent/trajectory.hpp"
#include "uxprobe/prompt/bug_database.hpp"
#include "uxprobe/report/report.hpp"

namespace uxprobe::harness {

// A finding matches when the page of its step lies under `url_path_prefix`
// and its text (description, expected, actual; case-insensitive) contains
// every keyword group. A group is a '|'-separated list of alternatives.
struct Matcher {
  std::string url_path_prefix;
  std::vector<std::string> keywords;

  friend bool operator==(const Matcher&, const Matcher&) = default;
};

struct SeededBug {
  std::string id;
  std::string site;
  prompt::BugCategory category = prompt::BugCategory::kBrokenElement;
  std::string page_path;
  std::string trigger;
  Matcher matcher;
};

struct GroundTruth {
  std::vector<SeededBug> bugs;

  // {"schema_version": 1, "bugs": [{"id", "site", "category", "page_path",
  //   "trigger", "matcher": {"url_path_prefix", "keywords": [...]}}]}
  // Errors: kCorpusInvalid (bad document, empty matcher, unknown category,
  // duplicate id).
  static GroundTruth load(const std::filesystem::path& path);
  static GroundTruth parse(std::string_view text);
};

// Path component of the step's page and of the page the action led to.
std::vector<std::string> step_paths(const agent::Trajectory& trajectory, int step_number);

bool keywords_match(const std::vector<std::string>& keywords, std::string_view text);
bool matches(const Matcher& matcher, const report::BugFinding& finding, const agent::Trajectory& trajectory);

// Exact non-negative fraction.
struct Ratio {
  std::int64_t numerator = 0;
  std::int64_t denominator = 1;

  double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
  // Round half up at `places` decimals: Ratio{19,32}.decimal(3) == "0.594".
  std::string decimal(int places) const;
  // Ratio{19,32}.percent(1) == "59.4%".
  std::string percent(int places) const;

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct Metrics {
  std::int64_t reported_count = 0;
  std::int64_t verified_count = 0;
  std::int64_t detected_count = 0;
  std::int64_t ground_truth_count = 0;
  // nullopt is the undefined flag: the denominator was zero.
  std::optional<Ratio> false_positive_rate;
  std::optional<Ratio> coverage;
};

// Errors: kPrecondition for negative counts, verified > reported or
// detected > ground truth.
Metrics compute_metrics(std::int64_t reported, std::int64_t verified, std::int64_t detected,
                        std::int64_t ground_truth);

// One finished run with its report and, per finding, the human verdict
// (nullopt while unverified).
struct RunRecord {
  agent::Trajectory trajectory;
  report::BugReport report;
  std::vector<std::optional<bool>> verdicts;
};

struct BugMatch {
  std::string bug_id;
  std::vector<std::pair<std::string, int>> findings;  // (run id, 1-based finding number)
};

struct Evaluation {
  Metrics metrics;
  std::vector<BugMatch> matches;           // one per seeded bug, in truth order
  std::vector<std::string> unverified;     // "run-id#N" for findings lacking a verdict
};

// Unverified findings count as not verified and are listed.
Evaluation evaluate(const std::vector<RunRecord>& runs, const GroundTruth& truth);

std::string format_metrics(const Evaluation& evaluation);

}  // namespace uxprobe::harness
