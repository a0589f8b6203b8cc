#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "uxprobe/agent/trajectory.hpp"
#include "uxprobe/vlm/backend.hpp"

namespace uxprobe::report {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::string_view kNoIssuesSentinel = "No issues identified.";
inline constexpr std::string_view kTrajectoryPlaceholder = "[Trajectory]";

enum class Nature { kFeatureBug, kVisualGlitch };
enum class Severity { kLow, kMedium, kHigh };

std::string_view to_string(Nature nature);      // feature-bug, visual-glitch
std::string_view to_string(Severity severity);  // low, medium, high
// Case-insensitive; accepts spaces, dashes or underscores between words.
std::optional<Nature> parse_nature(std::string_view text);
// Exact level names plus the synonym table:
//   high:   critical, severe, major, blocker, blocking, serious, urgent, p0, p1
//   medium: moderate, normal, medium-high, medium-low, mid, p2
//   low:    minor, trivial, cosmetic, negligible, p3, p4
std::optional<Severity> parse_severity(std::string_view text);

// Flags attached by parse_report. A flagged finding is kept, never dropped.
inline constexpr std::string_view kFlagInvalidStep = "invalid-step";
inline constexpr std::string_view kFlagNatureGuessed = "nature-guessed";
inline constexpr std::string_view kFlagSeverityGuessed = "severity-guessed";
inline constexpr std::string_view kFlagMissingField = "missing-field";

struct BugFinding {
  int step_number = 0;
  Nature nature = Nature::kFeatureBug;
  Severity severity = Severity::kMedium;
  std::string description;
  std::string expected_behavior;
  std::string actual_behavior;
  std::vector<std::string> flags;

  bool has_flag(std::string_view flag) const;
  friend bool operator==(const BugFinding&, const BugFinding&) = default;
};

struct BugReport {
  std::string run_id;
  std::string target_url;
  std::string summary;
  std::vector<BugFinding> findings;
  std::vector<std::string> patterns;
  std::vector<std::string> recommendations;
  std::string generated_by;
  std::string raw_reply;

  friend bool operator==(const BugReport&, const BugReport&) = default;
};

// The analysis prompt (with its [Trajectory] line) and the output layout
// appended after it.
struct ReportAssets {
  std::string analysis_prompt;
  std::string format_instruction;

  // Reads analysis_prompt.v1.txt and format_instruction.v1.txt.
  // Errors: kConfigError (missing file, or no placeholder in the prompt).
  static ReportAssets load(const std::filesystem::path& dir);
};

// Text block for one step as it appears in the report request.
std::string serialize_step(const agent::TrajectoryStep& step);

// Smallest stride k such that every k-th screenshot (steps 1, 1+k, ...)
// fits `max_images`; 1 when everything fits or there is no limit (0).
int screenshot_stride(std::size_t step_count, int max_images);

// System turn, then a user turn holding the prompt up to the placeholder,
// one user turn per step (text plus its screenshot), and a closing user turn
// with the rest of the prompt and the format instruction. With a positive
// `max_images` only every k-th screenshot is attached and the omission is
// stated. Errors: kEmptyTrajectory.
std::vector<vlm::ChatTurn> build_report_request(const agent::Trajectory& trajectory, const ReportAssets& assets,
                                                int max_images = 0);

// Tolerant reader for the model's reply. Findings come back in step order
// (ties keep reply order); those citing steps outside 1..N are kept and
// flagged. Errors: kUnparseableReport when no section or
// finding can be recognized and the reply does not state that nothing was
// found. Never aborts on arbitrary input.
BugReport parse_report(const vlm::ModelReply& reply, const agent::Trajectory& trajectory);
BugReport parse_report_text(std::string_view text, std::size_t step_count);

// Builds the request, calls the backend and parses the reply. When parsing
// fails the raw reply is returned through `raw_reply_out` before rethrowing.
BugReport generate_report(vlm::Backend& backend, const agent::Trajectory& trajectory, const ReportAssets& assets,
                          const vlm::CompletionParams& params = {}, std::string* raw_reply_out = nullptr);

std::string render_markdown(const BugReport& report);

nlohmann::json to_json(const BugReport& report);
// Errors: kCorruptRecord.
BugReport report_from_json(const nlohmann::json& document);
std::string render_structured(const BugReport& report);
BugReport parse_structured(std::string_view text);

}  // namespace uxprobe::report
