#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uxprobe/agent/episode.hpp"
#include "uxprobe/browser/process.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/harness/config.hpp"
#include "uxprobe/harness/evaluation.hpp"
#include "uxprobe/prompt/testing_prompt.hpp"
#include "uxprobe/report/report.hpp"
#include "uxprobe/sim/sim_browser.hpp"

namespace uxprobe::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPartial = 3;

// Exit code for an error escaping a command.
int exit_code_for(const Error& error);

// Where sessions connect: browser.executable launches Chromium, the
// endpoint "sim" starts the simulated browser, anything else is used as is.
class BrowserProvider {
 public:
  static std::unique_ptr<BrowserProvider> create(const Config& config);
  ~BrowserProvider();

  const std::string& endpoint() const { return endpoint_; }

 private:
  BrowserProvider() = default;
  std::unique_ptr<sim::SimBrowser> sim_;
  std::optional<browser::BrowserProcess> process_;
  std::string endpoint_;
};

// live, live:<model> or scripted:<file>. Errors: kConfigError (missing
// spec, unreadable script, unset API key variable).
std::unique_ptr<vlm::Backend> make_backend(const std::string& spec, const Config& config);

browser::SessionConfig session_config(const Config& config, const std::string& endpoint);
agent::EpisodeConfig episode_config(const Config& config);
std::filesystem::path prompts_dir(const Config& config);

// Deterministic run id base: host and path without the port, e.g.
// "http://127.0.0.1:8123/site1/" -> "127.0.0.1-site1".
std::string run_slug(std::string_view url);

struct ProbeResult {
  std::string url;
  std::string run_id;
  std::filesystem::path run_dir;
  std::optional<agent::Termination> termination;
  std::string termination_detail;
  std::size_t steps = 0;
  std::optional<report::BugReport> report;
  std::string error;
  int exit_code = kExitOk;

  bool ok() const { return exit_code == kExitOk; }
};

// Full pipeline for one URL: prompt, episode, report. Writes the run
// directory (trajectory, report.md, report.v1.json; report.raw.txt when the
// reply cannot be parsed). Pipeline failures come back in the result.
// Errors (thrown): configuration problems only.
ProbeResult run_probe(const Config& config, const std::string& url, const std::string& endpoint,
                      agent::TrajectoryStore& store, std::ostream& log);

struct BatchTarget {
  std::string url;
  std::string site_class;
  std::vector<std::pair<std::string, std::string>> overrides;  // config key -> value
};

struct BatchManifest {
  std::filesystem::path base_dir;  // relative script paths resolve here
  std::vector<BatchTarget> targets;

  // {"targets": [{"url": "...", "class": "...", "overrides": {"episode.max_steps": 5}}]}
  // "${FIXTURES}" in a url is replaced by `fixture_base`.
  // Errors: kManifestParseError (bad JSON, no targets, malformed URL, bad override).
  static BatchManifest parse(std::string_view text, const std::filesystem::path& base_dir,
                             const std::string& fixture_base = "");
  static BatchManifest load(const std::filesystem::path& path, const std::string& fixture_base = "");
};

struct BatchResult {
  std::vector<ProbeResult> rows;  // manifest order
  int exit_code = kExitOk;        // 3 when some targets failed, 1 when all did
};

// Runs the targets `batch.parallelism` at a time and writes
// batch-summary.json and batch-summary.md into the runs directory.
BatchResult run_batch(const Config& config, const BatchManifest& manifest, const std::string& endpoint,
                      std::ostream& log);
std::string format_batch_summary(const BatchResult& result);

// Refines the latest prompt of `site_class` from up to k representative
// reproducible bugs and saves the next generation.
// Errors: kEmptyDatabase, kConfigError, backend errors.
prompt::TestingPrompt run_refine(const Config& config, const std::string& site_class, int k, std::ostream& log);

// Verdicts live in <run_dir>/verification.json.
std::vector<std::optional<bool>> load_verdicts(const std::filesystem::path& run_dir, std::size_t finding_count);
void save_verdicts(const std::filesystem::path& run_dir, const std::vector<std::optional<bool>>& verdicts);

// Loads every run under `runs_dir` that has a structured report.
std::vector<RunRecord> load_runs(const std::filesystem::path& runs_dir);

}  // namespace uxprobe::harness
