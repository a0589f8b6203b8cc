#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "uxprobe/browser/types.hpp"
#include "uxprobe/common/image.hpp"
#include "uxprobe/vlm/action.hpp"

namespace uxprobe::agent {

inline constexpr int kSchemaVersion = 1;

enum class Termination { kDoneSignal, kStepLimit, kFatalError };
std::string_view to_string(Termination termination);
std::optional<Termination> parse_termination(std::string_view text);

struct EpisodeConfig {
  int max_steps = 20;
  bool annotate_screenshots = true;
  int reprompt_limit_per_step = 2;
  int history_screenshots = 3;
  std::string explore_backend = "default";
  std::string report_backend = "default";

  // Throws Error(kConfigError).
  void validate() const;

  friend bool operator==(const EpisodeConfig&, const EpisodeConfig&) = default;
};

struct TrajectoryStep {
  int step_number = 0;
  std::string screenshot_ref;  // sha256 of the PNG bytes
  ImageBlob screenshot;
  bool annotated = false;
  browser::ElementMap element_map;
  std::string evaluation;
  std::string next_goal;
  // Absent when the model never produced a usable action; the step was a no-op.
  std::optional<vlm::AgentAction> action;
  std::string note;
  browser::ActionOutcome outcome;
  std::string raw_reply;

  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct Trajectory {
  std::string run_id;
  std::string target_url;
  std::string prompt_id;
  std::string prompt_text;
  std::string model_id;
  EpisodeConfig config;
  std::vector<TrajectoryStep> steps;
  // Absent while running, or when the process died before finishing.
  std::optional<Termination> termination;
  std::string termination_detail;
  std::string started_at;
  std::string finished_at;

  bool interrupted() const { return !termination.has_value(); }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

nlohmann::json to_json(const browser::ElementMap& map);
browser::ElementMap element_map_from_json(const nlohmann::json& j);
nlohmann::json to_json(const browser::ActionOutcome& outcome);
browser::ActionOutcome outcome_from_json(const nlohmann::json& j);

// One directory per run:
//   <root>/<run_id>/meta.json
//   <root>/<run_id>/steps/step_0001.json ...
//   <root>/<run_id>/blobs/<sha256>.png
// Every file is written atomically. Distinct runs may be written
// concurrently; a run has a single writer.
class TrajectoryStore {
 public:
  explicit TrajectoryStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path run_dir(std::string_view run_id) const;

  // `base`, or base-2, base-3, ... whichever does not exist yet.
  std::string allocate_run_id(std::string_view base);

  // Creates the run directory and writes the header (no termination).
  // Errors: kPrecondition when the run already exists, kStorageFailure.
  void register_run(const Trajectory& header);
  // Errors: kUnknownRun, kStorageFailure.
  void persist_step(std::string_view run_id, const TrajectoryStep& step);
  // Rewrites the header with termination and finish time.
  void finish(const Trajectory& trajectory);

  // Errors: kUnknownRun, kCorruptRecord (message names the step).
  Trajectory load(std::string_view run_id) const;
  std::vector<std::string> run_ids() const;

 private:
  void write_meta(const Trajectory& trajectory) const;

  std::filesystem::path root_;
  std::mutex mutex_;
  std::set<std::string> reserved_;
};

}  // namespace uxprobe::agent
