#include "uxprobe/harness/evaluation.hpp"

#include <set>
#include <sstream>

#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"
#include "uxprobe/common/url.hpp"

namespace uxprobe::harness {
namespace {

using nlohmann::json;

[[noreturn]] void truth_error(const std::string& message) { throw Error(ErrorCode::kCorpusInvalid, message); }

std::string path_of(std::string_view url) {
  auto parsed = Url::parse(url);
  return parsed ? parsed->path : std::string{};
}

// Digits of n with a decimal point inserted `places` from the right.
std::string place_point(std::int64_t n, int places) {
  std::string digits = std::to_string(n);
  if (places == 0) return digits;
  if (digits.size() <= static_cast<std::size_t>(places)) {
    digits.insert(0, static_cast<std::size_t>(places) + 1 - digits.size(), '0');
  }
  digits.insert(digits.size() - places, ".");
  return digits;
}

std::int64_t pow10(int places) {
  std::int64_t p = 1;
  for (int i = 0; i < places; ++i) p *= 10;
  return p;
}

std::int64_t round_half_up(std::int64_t numerator, std::int64_t denominator) {
  std::int64_t q = numerator / denominator;
  std::int64_t r = numerator % denominator;
  return 2 * r >= denominator ? q + 1 : q;
}

}  // namespace

GroundTruth GroundTruth::parse(std::string_view text) {
  GroundTruth truth;
  std::set<std::string> ids;
  try {
    json doc = json::parse(text);
    if (doc.at("schema_version").get<int>() != 1) truth_error("unsupported ground truth schema version");
    for (const auto& b : doc.at("bugs")) {
      SeededBug bug;
      bug.id = b.at("id").get<std::string>();
      bug.site = b.at("site").get<std::string>();
      auto category = prompt::parse_bug_category(b.at("category").get<std::string>());
      if (!category) truth_error("bug '" + bug.id + "' has an unknown category");
      bug.category = *category;
      bug.page_path = b.at("page_path").get<std::string>();
      bug.trigger = b.at("trigger").get<std::string>();
      const json& m = b.at("matcher");
      bug.matcher.url_path_prefix = m.at("url_path_prefix").get<std::string>();
      bug.matcher.keywords = m.at("keywords").get<std::vector<std::string>>();
      if (bug.id.empty() || !ids.insert(bug.id).second) truth_error("duplicate or empty bug id '" + bug.id + "'");
      if (bug.matcher.url_path_prefix.empty() || bug.matcher.keywords.empty()) {
        truth_error("bug '" + bug.id + "' has an empty matcher");
      }
      for (const auto& k : bug.matcher.keywords) {
        if (trim(k).empty()) truth_error("bug '" + bug.id + "' has an empty keyword");
      }
      truth.bugs.push_back(std::move(bug));
    }
  } catch (const json::exception& e) {
    truth_error(std::string("ground truth: ") + e.what());
  }
  return truth;
}

GroundTruth GroundTruth::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    truth_error(e.what());
  }
  return parse(text);
}

std::vector<std::string> step_paths(const agent::Trajectory& trajectory, int step_number) {
  std::vector<std::string> paths;
  if (step_number < 1 || static_cast<std::size_t>(step_number) > trajectory.steps.size()) return paths;
  const auto& step = trajectory.steps[static_cast<std::size_t>(step_number) - 1];
  for (const std::string& url : {step.element_map.page_url, step.outcome.resulting_url}) {
    std::string p = path_of(url);
    if (!p.empty()) paths.push_back(p);
  }
  return paths;
}

bool keywords_match(const std::vector<std::string>& keywords, std::string_view text) {
  std::string lower = to_lower(text);
  for (const auto& group : keywords) {
    bool any = false;
    std::size_t start = 0;
    while (start <= group.size() && !any) {
      auto bar = group.find('|', start);
      if (bar == std::string::npos) bar = group.size();
      std::string alt = to_lower(trim(std::string_view(group).substr(start, bar - start)));
      if (!alt.empty() && lower.find(alt) != std::string::npos) any = true;
      start = bar + 1;
    }
    if (!any) return false;
  }
  return true;
}

bool matches(const Matcher& matcher, const report::BugFinding& finding, const agent::Trajectory& trajectory) {
  bool on_page = false;
  for (const auto& p : step_paths(trajectory, finding.step_number)) {
    if (p.starts_with(matcher.url_path_prefix)) on_page = true;
  }
  if (!on_page) return false;
  return keywords_match(matcher.keywords,
                        finding.description + "\n" + finding.expected_behavior + "\n" + finding.actual_behavior);
}

std::string Ratio::decimal(int places) const {
  return place_point(round_half_up(numerator * pow10(places), denominator), places);
}

std::string Ratio::percent(int places) const {
  return place_point(round_half_up(numerator * 100 * pow10(places), denominator), places) + "%";
}

Metrics compute_metrics(std::int64_t reported, std::int64_t verified, std::int64_t detected,
                        std::int64_t ground_truth) {
  if (reported < 0 || verified < 0 || detected < 0 || ground_truth < 0) {
    throw Error(ErrorCode::kPrecondition, "metric counts must not be negative");
  }
  if (verified > reported) throw Error(ErrorCode::kPrecondition, "more verified findings than reported ones");
  if (detected > ground_truth) throw Error(ErrorCode::kPrecondition, "more detected bugs than ground-truth bugs");
  Metrics m{reported, verified, detected, ground_truth, std::nullopt, std::nullopt};
  if (reported > 0) m.false_positive_rate = Ratio{reported - verified, reported};
  if (ground_truth > 0) m.coverage = Ratio{detected, ground_truth};
  return m;
}

Evaluation evaluate(const std::vector<RunRecord>& runs, const GroundTruth& truth) {
  Evaluation ev;
  std::int64_t reported = 0;
  std::int64_t verified = 0;
  for (const auto& run : runs) {
    const auto& findings = run.report.findings;
    reported += static_cast<std::int64_t>(findings.size());
    for (std::size_t i = 0; i < findings.size(); ++i) {
      std::optional<bool> verdict = i < run.verdicts.size() ? run.verdicts[i] : std::nullopt;
      if (!verdict) {
        ev.unverified.push_back(run.trajectory.run_id + "#" + std::to_string(i + 1));
      } else if (*verdict) {
        ++verified;
      }
    }
  }
  std::int64_t detected = 0;
  for (const auto& bug : truth.bugs) {
    BugMatch match{bug.id, {}};
    for (const auto& run : runs) {
      for (std::size_t i = 0; i < run.report.findings.size(); ++i) {
        if (matches(bug.matcher, run.report.findings[i], run.trajectory)) {
          match.findings.emplace_back(run.trajectory.run_id, static_cast<int>(i) + 1);
        }
      }
    }
    if (!match.findings.empty()) ++detected;
    ev.matches.push_back(std::move(match));
  }
  ev.metrics = compute_metrics(reported, verified, detected, static_cast<std::int64_t>(truth.bugs.size()));
  return ev;
}

std::string format_metrics(const Evaluation& ev) {
  const Metrics& m = ev.metrics;
  std::ostringstream out;
  out << "reported findings:   " << m.reported_count << '\n'
      << "verified findings:   " << m.verified_count << '\n'
      << "false-positive rate: "
      << (m.false_positive_rate ? m.false_positive_rate->percent(1) : std::string("undefined (no findings)")) << '\n'
      << "seeded bugs:         " << m.ground_truth_count << '\n'
      << "detected:            " << m.detected_count << '\n'
      << "coverage:            "
      << (m.coverage ? m.coverage->percent(1) : std::string("undefined (no ground truth)")) << '\n';
  if (!ev.matches.empty()) {
    out << "\nper seeded bug:\n";
    for (const auto& match : ev.matches) {
      out << "  " << match.bug_id << ": ";
      if (match.findings.empty()) {
        out << "missed";
      } else {
        for (std::size_t i = 0; i < match.findings.size(); ++i) {
          out << (i ? ", " : "") << match.findings[i].first << '#' << match.findings[i].second;
        }
      }
      out << '\n';
    }
  }
  if (!ev.unverified.empty()) {
    out << "\n" << ev.unverified.size() << " finding(s) have no verdict yet and count as unverified\n";
  }
  return out.str();
}

}  // namespace uxprobe::harness
