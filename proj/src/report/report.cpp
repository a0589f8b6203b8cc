#include "uxprobe/report/report.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"

namespace uxprobe::report {
namespace {

using nlohmann::json;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Lowercase, separators folded to single spaces, surrounding punctuation dropped.
std::string normalize_words(std::string_view text) {
  std::string out;
  for (char c : text) {
    char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    bool word = is_alpha(l) || is_digit(l);
    if (word) {
      out += l;
    } else if (!out.empty() && out.back() != ' ') {
      out += ' ';
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string first_word(std::string_view normalized) {
  auto space = normalized.find(' ');
  return std::string(normalized.substr(0, space));
}

// Drops list markers ("-", "*", "1.", "2)") and emphasis wrappers.
std::string_view strip_bullet(std::string_view s) {
  s = trim_view(s);
  if (!s.empty() && (s.front() == '-' || s.front() == '+' || (s.front() == '*' && (s.size() < 2 || s[1] != '*')))) {
    s.remove_prefix(1);
  } else if (s.starts_with("\xE2\x80\xA2")) {  // bullet
    s.remove_prefix(3);
  } else {
    std::size_t i = 0;
    while (i < s.size() && i < 4 && is_digit(s[i])) ++i;
    if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) s.remove_prefix(i + 1);
  }
  return trim_view(s);
}

std::string strip_emphasis(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c != '*' && c != '`') out += c;
  }
  std::string_view v = trim_view(out);
  while (!v.empty() && v.front() == '_') v.remove_prefix(1);
  while (!v.empty() && v.back() == '_') v.remove_suffix(1);
  return std::string(trim_view(v));
}

bool is_none_item(std::string_view item) {
  std::string n = normalize_words(item);
  return n.empty() || n == "none" || n == "n a" || n == "na" || n == "nothing" || n.starts_with("none ") ||
         n == "no patterns" || n == "no recommendations";
}

std::optional<int> first_integer(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_digit(text[i])) continue;
    long value = 0;
    std::size_t j = i;
    while (j < text.size() && is_digit(text[j]) && j - i < 9) value = value * 10 + (text[j++] - '0');
    return static_cast<int>(value);
  }
  return std::nullopt;
}

// "step 7", "step #7", "steps 7-8" anywhere in prose.
std::optional<int> step_mention(std::string_view text) {
  std::string lower = to_lower(text);
  std::size_t pos = 0;
  while ((pos = lower.find("step", pos)) != std::string::npos) {
    std::size_t i = pos + 4;
    if (i < lower.size() && lower[i] == 's') ++i;
    while (i < lower.size() && (is_space(lower[i]) || lower[i] == '#' || lower[i] == ':')) ++i;
    if (i < lower.size() && is_digit(lower[i])) return first_integer(std::string_view(lower).substr(i));
    pos += 4;
  }
  return std::nullopt;
}

enum class Section { kPreamble, kSummary, kFindings, kPatterns, kRecommendations, kOther };

enum class Field { kStep, kNature, kSeverity, kDescription, kExpected, kActual };

std::optional<Field> field_for_key(const std::string& key) {
  static const std::pair<const char*, Field> kKeys[] = {
      {"step", Field::kStep},
      {"steps", Field::kStep},
      {"step number", Field::kStep},
      {"step no", Field::kStep},
      {"nature", Field::kNature},
      {"type", Field::kNature},
      {"issue type", Field::kNature},
      {"bug type", Field::kNature},
      {"kind", Field::kNature},
      {"category", Field::kNature},
      {"severity", Field::kSeverity},
      {"priority", Field::kSeverity},
      {"impact", Field::kSeverity},
      {"description", Field::kDescription},
      {"issue", Field::kDescription},
      {"problem", Field::kDescription},
      {"details", Field::kDescription},
      {"title", Field::kDescription},
      {"expected", Field::kExpected},
      {"expected behavior", Field::kExpected},
      {"expected behaviour", Field::kExpected},
      {"expected result", Field::kExpected},
      {"actual", Field::kActual},
      {"actual behavior", Field::kActual},
      {"actual behaviour", Field::kActual},
      {"actual result", Field::kActual},
      {"observed", Field::kActual},
      {"observed behavior", Field::kActual},
  };
  for (const auto& [name, field] : kKeys) {
    if (key == name) return field;
  }
  return std::nullopt;
}

struct FieldLine {
  Field field;
  std::string value;
};

std::optional<FieldLine> parse_field_line(std::string_view line) {
  std::string_view body = strip_bullet(line);
  auto colon = body.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon > 40) return std::nullopt;
  auto field = field_for_key(normalize_words(body.substr(0, colon)));
  if (!field) return std::nullopt;
  return FieldLine{*field, strip_emphasis(body.substr(colon + 1))};
}

std::optional<Section> section_for(const std::string& words, bool marked) {
  static const std::pair<const char*, Section> kExact[] = {
      {"summary", Section::kSummary},
      {"findings", Section::kFindings},
      {"issues", Section::kFindings},
      {"bugs", Section::kFindings},
      {"identified issues", Section::kFindings},
      {"issues found", Section::kFindings},
      {"patterns", Section::kPatterns},
      {"recurring problems", Section::kPatterns},
      {"recommendations", Section::kRecommendations},
  };
  for (const auto& [name, section] : kExact) {
    if (words == name) return section;
  }
  if (!marked || words.empty() || std::count(words.begin(), words.end(), ' ') > 7) return std::nullopt;
  if (words.find("summary") != std::string::npos) return Section::kSummary;
  if (words.find("pattern") != std::string::npos || words.find("recurring") != std::string::npos) {
    return Section::kPatterns;
  }
  if (words.find("recommend") != std::string::npos || words.find("fix") != std::string::npos) {
    return Section::kRecommendations;
  }
  for (const char* key : {"finding", "issue", "bug", "problem", "glitch"}) {
    if (words.find(key) != std::string::npos) return Section::kFindings;
  }
  return Section::kOther;
}

// "### Finding 2: Broken link" -> title "Broken link".
std::optional<std::string> finding_header(std::string_view line) {
  std::string_view body = trim_view(line);
  while (!body.empty() && (body.front() == '#' || body.front() == '*')) body.remove_prefix(1);
  body = trim_view(body);
  std::string lower = to_lower(body.substr(0, std::min<std::size_t>(body.size(), 12)));
  std::size_t keyword = 0;
  for (const char* key : {"finding", "issue", "bug", "problem"}) {
    if (lower.starts_with(key)) {
      keyword = std::string_view(key).size();
      break;
    }
  }
  if (keyword == 0) return std::nullopt;
  std::size_t i = keyword;
  while (i < body.size() && (is_space(body[i]) || body[i] == '#')) ++i;
  if (i >= body.size() || !is_digit(body[i])) return std::nullopt;
  while (i < body.size() && is_digit(body[i])) ++i;
  std::string_view rest = body.substr(i);
  while (!rest.empty() && (is_space(rest.front()) || rest.front() == ':' || rest.front() == '-' ||
                           rest.front() == '.' || rest.front() == ')' || rest.front() == '*')) {
    rest.remove_prefix(1);
  }
  return strip_emphasis(rest);
}

bool starts_enumerated(std::string_view line) {
  line = trim_view(line);
  std::size_t i = 0;
  while (i < line.size() && i < 4 && is_digit(line[i])) ++i;
  return i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')');
}

struct Draft {
  std::string title;
  std::optional<std::string> fields[6];
  std::optional<Field> last;
  std::string prose;
};

std::optional<Nature> guess_nature(std::string_view text) {
  std::string lower = to_lower(text);
  std::size_t best = std::string::npos;
  std::optional<Nature> result;
  auto consider = [&](const char* key, Nature nature) {
    std::size_t pos = lower.find(key);
    if (pos < best) {
      best = pos;
      result = nature;
    }
  };
  for (const char* key : {"visual", "glitch", "layout", "render", "display", "contrast", "illegible", "overlap",
                          "styling", "misaligned"}) {
    consider(key, Nature::kVisualGlitch);
  }
  for (const char* key : {"feature", "function", "broken", "logic", "content", "link", "navigat", "behavio", "error",
                          "incorrect", "missing", "wrong", "typo", "inconsisten"}) {
    consider(key, Nature::kFeatureBug);
  }
  return result;
}

BugFinding finish_draft(Draft& d, std::size_t step_count) {
  BugFinding f;
  auto& step = d.fields[static_cast<int>(Field::kStep)];
  auto& nature = d.fields[static_cast<int>(Field::kNature)];
  auto& severity = d.fields[static_cast<int>(Field::kSeverity)];
  auto& description = d.fields[static_cast<int>(Field::kDescription)];
  auto& expected = d.fields[static_cast<int>(Field::kExpected)];
  auto& actual = d.fields[static_cast<int>(Field::kActual)];

  std::string desc = trim(description.value_or(""));
  if (desc.empty()) desc = trim(d.title);
  if (desc.empty()) desc = trim(d.prose);
  bool missing = desc.empty() || !expected || trim(*expected).empty() || !actual || trim(*actual).empty();
  if (desc.empty()) desc = trim(actual.value_or(""));
  f.description = desc.empty() ? "(not stated)" : desc;
  f.expected_behavior = trim(expected.value_or(""));
  if (f.expected_behavior.empty()) f.expected_behavior = "(not stated)";
  f.actual_behavior = trim(actual.value_or(""));
  if (f.actual_behavior.empty()) f.actual_behavior = "(not stated)";

  std::optional<int> number;
  if (step) number = first_integer(*step);
  if (!number) number = step_mention(d.title + " " + desc + " " + d.prose);
  f.step_number = number.value_or(0);
  if (f.step_number < 1 || static_cast<std::size_t>(f.step_number) > step_count) {
    f.flags.emplace_back(kFlagInvalidStep);
  }

  std::optional<Nature> parsed_nature = nature ? parse_nature(*nature) : std::nullopt;
  if (!parsed_nature) {
    parsed_nature = nature ? guess_nature(*nature) : std::nullopt;
    if (!parsed_nature) parsed_nature = guess_nature(f.description + " " + f.actual_behavior);
    f.flags.emplace_back(kFlagNatureGuessed);
  }
  f.nature = parsed_nature.value_or(Nature::kFeatureBug);

  std::optional<Severity> parsed_severity;
  if (severity) {
    parsed_severity = parse_severity(*severity);
    if (!parsed_severity) parsed_severity = parse_severity(first_word(normalize_words(*severity)));
  }
  if (!parsed_severity) {
    f.flags.emplace_back(kFlagSeverityGuessed);
    parsed_severity = Severity::kMedium;
  }
  f.severity = *parsed_severity;
  if (missing) f.flags.emplace_back(kFlagMissingField);
  return f;
}

bool states_no_issues(std::string_view text) {
  std::string lower = to_lower(text);
  for (const char* phrase : {"no issues", "no bugs", "no problems", "no glitches", "did not find", "didn't find",
                             "did not identify", "didn't identify", "no obvious", "nothing wrong", "no defects"}) {
    if (lower.find(phrase) != std::string::npos) return true;
  }
  return false;
}

std::string one_line(std::string_view text) {
  std::string out;
  for (char c : text) out += (c == '\n' || c == '\r') ? ' ' : c;
  return collapse_whitespace(out);
}

std::string nature_words(Nature nature) {
  return nature == Nature::kFeatureBug ? "feature bug" : "visual glitch";
}

}  // namespace

std::string_view to_string(Nature nature) {
  return nature == Nature::kFeatureBug ? "feature-bug" : "visual-glitch";
}

std::string_view to_string(Severity severity) {
  switch (severity) {
    case Severity::kLow: return "low";
    case Severity::kMedium: return "medium";
    case Severity::kHigh: return "high";
  }
  return "medium";
}

std::optional<Nature> parse_nature(std::string_view text) {
  std::string n = normalize_words(text);
  for (const char* name : {"feature bug", "feature", "functional bug", "functionality bug", "feature issue"}) {
    if (n == name) return Nature::kFeatureBug;
  }
  for (const char* name : {"visual glitch", "visual", "glitch", "ui glitch", "visual bug", "visual issue"}) {
    if (n == name) return Nature::kVisualGlitch;
  }
  return std::nullopt;
}

std::optional<Severity> parse_severity(std::string_view text) {
  std::string n = normalize_words(text);
  for (const char* name : {"high", "critical", "severe", "major", "blocker", "blocking", "serious", "urgent", "p0", "p1"}) {
    if (n == name) return Severity::kHigh;
  }
  for (const char* name : {"medium", "moderate", "normal", "medium high", "medium low", "mid", "p2"}) {
    if (n == name) return Severity::kMedium;
  }
  for (const char* name : {"low", "minor", "trivial", "cosmetic", "negligible", "p3", "p4"}) {
    if (n == name) return Severity::kLow;
  }
  return std::nullopt;
}

bool BugFinding::has_flag(std::string_view flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

ReportAssets ReportAssets::load(const std::filesystem::path& dir) {
  ReportAssets assets;
  try {
    assets.analysis_prompt = read_text_file(dir / "analysis_prompt.v1.txt");
    assets.format_instruction = trim(read_text_file(dir / "format_instruction.v1.txt"));
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, std::string("report assets: ") + e.what());
  }
  if (assets.analysis_prompt.find(kTrajectoryPlaceholder) == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "analysis prompt has no [Trajectory] placeholder");
  }
  return assets;
}

std::string serialize_step(const agent::TrajectoryStep& step) {
  std::ostringstream out;
  out << "Step " << step.step_number << '\n';
  if (!step.element_map.page_url.empty()) out << "Page: " << step.element_map.page_url << '\n';
  out << "1. Evaluation: " << (step.evaluation.empty() ? "(none)" : one_line(step.evaluation)) << '\n';
  out << "2. Next goal: " << (step.next_goal.empty() ? "(none)" : one_line(step.next_goal)) << '\n';
  out << "3. Action: ";
  if (!step.action) {
    out << "none";
    if (!step.note.empty()) out << " (" << one_line(step.note) << ')';
  } else {
    out << vlm::describe(*step.action);
    if (step.action->targets_element()) {
      if (const auto* e = step.element_map.find(step.action->element_index)) {
        out << " on " << browser::to_string(e->role) << ' ' << json(e->label).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        if (e->target_url) out << " -> " << *e->target_url;
      }
    }
  }
  out << "\nResult: " << browser::to_string(step.outcome.status);
  if (!step.outcome.resulting_url.empty()) out << ", now at " << step.outcome.resulting_url;
  if (!step.outcome.detail.empty()) out << " (" << one_line(step.outcome.detail) << ')';
  for (const auto& err : step.outcome.console_errors) out << "\nConsole error: " << one_line(err);
  return out.str();
}

int screenshot_stride(std::size_t step_count, int max_images) {
  if (max_images <= 0 || step_count <= static_cast<std::size_t>(max_images)) return 1;
  return static_cast<int>((step_count + max_images - 1) / max_images);
}

std::vector<vlm::ChatTurn> build_report_request(const agent::Trajectory& trajectory, const ReportAssets& assets,
                                                int max_images) {
  if (trajectory.steps.empty()) {
    throw Error(ErrorCode::kEmptyTrajectory, "run '" + trajectory.run_id + "' has no steps to analyze");
  }
  const std::string& prompt = assets.analysis_prompt;
  auto at = prompt.find(kTrajectoryPlaceholder);
  if (at == std::string::npos) throw Error(ErrorCode::kConfigError, "analysis prompt has no [Trajectory] placeholder");
  std::string before = std::string(trim_view(std::string_view(prompt).substr(0, at)));
  std::string after = std::string(trim_view(std::string_view(prompt).substr(at + kTrajectoryPlaceholder.size())));

  int stride = screenshot_stride(trajectory.steps.size(), max_images);
  std::vector<vlm::ChatTurn> turns;
  turns.push_back(vlm::ChatTurn::system(
      "You review recorded runs of an automated website tester and report defects of the website under test."));
  turns.push_back(vlm::ChatTurn::user(before));
  std::size_t omitted = 0;
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
    const auto& step = trajectory.steps[i];
    bool attach = i % static_cast<std::size_t>(stride) == 0;
    std::string text = serialize_step(step);
    auto newline = text.find('\n');
    text.insert(newline + 1, attach ? "0. Screenshot: attached\n" : "0. Screenshot: omitted (image limit)\n");
    std::vector<ImageBlob> images;
    if (attach) {
      images.push_back(step.screenshot);
    } else {
      ++omitted;
    }
    turns.push_back(vlm::ChatTurn::user(std::move(text), std::move(images)));
  }
  std::string closing = after;
  if (omitted > 0) {
    closing = "Note: to stay within the image limit only every " + std::to_string(stride) +
              "th screenshot is attached (" + std::to_string(omitted) +
              " omitted); the text of every step is complete.\n\n" + closing;
  }
  if (!assets.format_instruction.empty()) closing += "\n\n" + assets.format_instruction;
  turns.push_back(vlm::ChatTurn::user(std::move(closing)));
  return turns;
}

BugReport parse_report_text(std::string_view text, std::size_t step_count) {
  BugReport report;
  report.raw_reply = std::string(text);

  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= text.size();) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }

  Section section = Section::kPreamble;
  bool recognized = false;
  std::vector<std::string> summary_lines;
  std::vector<std::string> preamble_lines;
  std::optional<Draft> draft;
  auto flush = [&] {
    if (draft) report.findings.push_back(finish_draft(*draft, step_count));
    draft.reset();
  };
  auto add_item = [](std::vector<std::string>& list, std::string_view raw, std::string_view line) {
    bool continuation = !raw.empty() && is_space(raw.front()) && !list.empty() && strip_bullet(line) == trim_view(line);
    std::string item = strip_emphasis(strip_bullet(line));
    if (item.empty()) return;
    if (continuation) {
      list.back() += " " + item;
    } else if (!is_none_item(item)) {
      list.push_back(item);
    }
  };

  for (std::string_view raw : lines) {
    std::string_view line = trim_view(raw);
    if (line.empty()) {
      if (section == Section::kSummary && !summary_lines.empty()) summary_lines.emplace_back();
      if (draft) draft->last.reset();
      continue;
    }

    bool findings_like = section == Section::kFindings || section == Section::kPreamble;
    if (findings_like) {
      if (auto title = finding_header(line)) {
        flush();
        draft = Draft{};
        draft->title = *title;
        recognized = true;
        continue;
      }
      if (auto field = parse_field_line(line)) {
        int slot = static_cast<int>(field->field);
        if (!draft || draft->fields[slot]) {
          flush();
          draft = Draft{};
        }
        draft->fields[slot] = field->value;
        draft->last = field->field;
        recognized = true;
        continue;
      }
    }

    bool marked = line.front() == '#' || line.starts_with("**") || line.back() == ':';
    std::string words = normalize_words(strip_emphasis(strip_bullet(line)));
    if (line.front() == '#' || line.starts_with("**") || !starts_enumerated(line) || line.back() == ':') {
      if (auto s = section_for(words, marked)) {
        // A marked heading that names no known section only ends a findings
        // block; it is not a new section.
        if (*s == Section::kOther && section == Section::kFindings && marked) {
          // An unnumbered heading inside the findings opens the next finding.
          flush();
          draft = Draft{};
          std::string_view title = line;
          while (!title.empty() && title.front() == '#') title.remove_prefix(1);
          draft->title = strip_emphasis(title);
          if (!draft->title.empty() && draft->title.back() == ':') draft->title.pop_back();
          continue;
        }
        if (*s != Section::kOther || line.front() == '#') {
          flush();
          section = *s;
          if (*s != Section::kOther) recognized = true;
          continue;
        }
      }
    }

    switch (section) {
      case Section::kPreamble: preamble_lines.emplace_back(line); break;
      case Section::kSummary: summary_lines.emplace_back(strip_emphasis(line)); break;
      case Section::kFindings:
        if (draft && draft->last) {
          auto& value = *draft->fields[static_cast<int>(*draft->last)];
          value += (value.empty() ? "" : " ") + strip_emphasis(strip_bullet(line));
        } else if (starts_enumerated(line) || !draft) {
          std::string item = strip_emphasis(strip_bullet(line));
          if (is_none_item(item) || states_no_issues(item)) break;
          flush();
          draft = Draft{};
          draft->title = item;
        } else {
          draft->prose += (draft->prose.empty() ? "" : " ") + strip_emphasis(line);
        }
        break;
      case Section::kPatterns: add_item(report.patterns, raw, line); break;
      case Section::kRecommendations: add_item(report.recommendations, raw, line); break;
      case Section::kOther: break;
    }
  }
  flush();
  std::stable_sort(report.findings.begin(), report.findings.end(),
                   [](const BugFinding& a, const BugFinding& b) { return a.step_number < b.step_number; });

  auto join = [](const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
      if (p.empty()) {
        if (!out.empty() && !out.ends_with("\n\n")) out += "\n\n";
      } else {
        if (!out.empty() && !out.ends_with("\n")) out += ' ';
        out += p;
      }
    }
    return trim(out);
  };
  report.summary = join(summary_lines);

  if (!recognized) {
    if (!states_no_issues(text)) {
      throw Error(ErrorCode::kUnparseableReport, "reply has no recognizable report sections");
    }
    report.summary = collapse_whitespace(text);
    return report;
  }
  if (report.summary.empty()) report.summary = join(preamble_lines);
  if (report.summary.empty()) {
    report.summary = report.findings.empty() ? std::string(kNoIssuesSentinel)
                                             : std::to_string(report.findings.size()) + " issue(s) reported.";
  }
  return report;
}

BugReport parse_report(const vlm::ModelReply& reply, const agent::Trajectory& trajectory) {
  BugReport report = parse_report_text(reply.text, trajectory.steps.size());
  report.run_id = trajectory.run_id;
  report.target_url = trajectory.target_url;
  report.generated_by = reply.model_id;
  return report;
}

BugReport generate_report(vlm::Backend& backend, const agent::Trajectory& trajectory, const ReportAssets& assets,
                          const vlm::CompletionParams& params, std::string* raw_reply_out) {
  auto turns = build_report_request(trajectory, assets, backend.max_images_per_request());
  vlm::ModelReply reply = backend.complete(turns, params);
  if (reply.model_id.empty()) reply.model_id = backend.id();
  if (raw_reply_out) *raw_reply_out = reply.text;
  return parse_report(reply, trajectory);
}

std::string render_markdown(const BugReport& report) {
  std::ostringstream out;
  out << "# Bug report\n\n";
  if (!report.run_id.empty()) out << "- Run: " << report.run_id << '\n';
  if (!report.target_url.empty()) out << "- Target: " << report.target_url << '\n';
  if (!report.generated_by.empty()) out << "- Generated by: " << report.generated_by << '\n';
  out << "\n## Summary\n\n" << (report.summary.empty() ? std::string(kNoIssuesSentinel) : report.summary) << "\n\n";

  out << "## Findings\n\n";
  std::vector<const BugFinding*> ordered;
  for (const auto& f : report.findings) ordered.push_back(&f);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const BugFinding* a, const BugFinding* b) { return a->step_number < b->step_number; });
  if (ordered.empty()) out << kNoIssuesSentinel << "\n\n";
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const BugFinding& f = *ordered[i];
    out << "### Finding " << i + 1 << "\n\n";
    out << "- Step: " << f.step_number << '\n';
    out << "- Nature: " << nature_words(f.nature) << '\n';
    out << "- Severity: " << to_string(f.severity) << '\n';
    out << "- Description: " << one_line(f.description) << '\n';
    out << "- Expected: " << one_line(f.expected_behavior) << '\n';
    out << "- Actual: " << one_line(f.actual_behavior) << '\n';
    if (!f.flags.empty()) {
      out << "- Flags:";
      for (const auto& flag : f.flags) out << ' ' << flag;
      out << '\n';
    }
    out << '\n';
  }

  out << "## Patterns\n\n";
  if (report.patterns.empty()) out << "None noted.\n";
  for (const auto& p : report.patterns) out << "- " << one_line(p) << '\n';
  out << "\n## Recommendations\n\n";
  if (report.recommendations.empty()) out << "None noted.\n";
  for (const auto& r : report.recommendations) out << "- " << one_line(r) << '\n';
  return out.str();
}

json to_json(const BugReport& report) {
  json findings = json::array();
  for (const auto& f : report.findings) {
    findings.push_back({{"step", f.step_number},
                        {"nature", to_string(f.nature)},
                        {"severity", to_string(f.severity)},
                        {"description", f.description},
                        {"expected", f.expected_behavior},
                        {"actual", f.actual_behavior},
                        {"flags", f.flags}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"run_id", report.run_id},
          {"target_url", report.target_url},
          {"generated_by", report.generated_by},
          {"summary", report.summary},
          {"findings", findings},
          {"patterns", report.patterns},
          {"recommendations", report.recommendations},
          {"raw_reply", report.raw_reply}};
}

BugReport report_from_json(const json& document) {
  BugReport report;
  try {
    if (document.at("schema_version").get<int>() != kReportSchemaVersion) {
      throw Error(ErrorCode::kCorruptRecord, "unsupported report schema version");
    }
    report.run_id = document.at("run_id").get<std::string>();
    report.target_url = document.at("target_url").get<std::string>();
    report.generated_by = document.at("generated_by").get<std::string>();
    report.summary = document.at("summary").get<std::string>();
    for (const auto& f : document.at("findings")) {
      BugFinding finding;
      finding.step_number = f.at("step").get<int>();
      std::string nature = f.at("nature").get<std::string>();
      if (nature == "feature-bug") {
        finding.nature = Nature::kFeatureBug;
      } else if (nature == "visual-glitch") {
        finding.nature = Nature::kVisualGlitch;
      } else {
        throw Error(ErrorCode::kCorruptRecord, "unknown nature '" + nature + "'");
      }
      std::string severity = f.at("severity").get<std::string>();
      if (severity != "low" && severity != "medium" && severity != "high") {
        throw Error(ErrorCode::kCorruptRecord, "unknown severity '" + severity + "'");
      }
      finding.severity = *parse_severity(severity);
      finding.description = f.at("description").get<std::string>();
      finding.expected_behavior = f.at("expected").get<std::string>();
      finding.actual_behavior = f.at("actual").get<std::string>();
      finding.flags = f.at("flags").get<std::vector<std::string>>();
      report.findings.push_back(std::move(finding));
    }
    report.patterns = document.at("patterns").get<std::vector<std::string>>();
    report.recommendations = document.at("recommendations").get<std::vector<std::string>>();
    report.raw_reply = document.at("raw_reply").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, std::string("report document: ") + e.what());
  }
  return report;
}

std::string render_structured(const BugReport& report) { return to_json(report).dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n"; }

BugReport parse_structured(std::string_view text) {
  json document = json::parse(text, nullptr, false);
  if (document.is_discarded()) throw Error(ErrorCode::kCorruptRecord, "report document is not valid JSON");
  return report_from_json(document);
}

}  // namespace uxprobe::report
