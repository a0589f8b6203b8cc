#pragma once

#include <functional>
#include <string>

#include "uxprobe/agent/trajectory.hpp"
#include "uxprobe/browser/overlay.hpp"
#include "uxprobe/browser/session.hpp"
#include "uxprobe/vlm/backend.hpp"

namespace uxprobe::agent {

struct EpisodeRequest {
  std::string run_id;
  std::string target_url;
  std::string prompt_id;
  std::string prompt_text;  // rendered; must not contain [URL]
};

// Appended to the testing prompt in the system turn.
std::string action_instructions();

// Text of the per-step user turn (the images travel alongside it).
std::string step_context(const EpisodeRequest& request, const EpisodeConfig& config, int step_number,
                         const std::vector<TrajectoryStep>& history, const browser::ElementMap& map,
                         int attached_screenshots);

struct EpisodeOptions {
  TrajectoryStore* store = nullptr;            // persist after every step when set
  const browser::Overlay* overlay = nullptr;   // annotation needs both this and the config flag
  browser::OverlayStyle overlay_style;
  vlm::CompletionParams completion;
  std::function<void(const TrajectoryStep&)> on_step;
};

// Navigates to the target and loops screenshot -> model -> action until the
// model signals done, the step limit is hit, or the browser/backend fails.
// Failures end the episode with kFatalError; only precondition violations
// (closed session, unrendered prompt, invalid config) throw.
Trajectory run_episode(browser::BrowserSession& session, const EpisodeRequest& request, const EpisodeConfig& config,
                       vlm::Backend& backend, const EpisodeOptions& options = {});

}  // namespace uxprobe::agent
