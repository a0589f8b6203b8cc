#include "uxprobe/agent/episode.hpp"

#include <algorithm>
#include <sstream>

#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"
#include "uxprobe/prompt/testing_prompt.hpp"

namespace uxprobe::agent {
namespace {

using browser::ActionOutcome;
using browser::OutcomeStatus;

std::string describe_outcome(const ActionOutcome& o) {
  std::string text = std::string(browser::to_string(o.status));
  if (!o.resulting_url.empty()) text += " at " + o.resulting_url;
  if (!o.detail.empty()) text += " (" + o.detail + ")";
  return text;
}

// Images from the last `window` steps plus the current one, oldest first.
std::vector<ImageBlob> screenshot_window(const std::vector<TrajectoryStep>& history, const ImageBlob& current,
                                         int window) {
  std::vector<ImageBlob> images;
  int previous = std::max(0, window - 1);
  std::size_t first = history.size() > static_cast<std::size_t>(previous) ? history.size() - previous : 0;
  for (std::size_t i = first; i < history.size(); ++i) images.push_back(history[i].screenshot);
  images.push_back(current);
  return images;
}

struct Capture {
  browser::ElementMap map;
  ImageBlob screenshot;
  bool annotated = false;
  std::string note;
};

Capture capture(browser::BrowserSession& session, int step_number, const EpisodeConfig& config,
                const EpisodeOptions& options) {
  Capture c;
  c.map = session.extract_elements();
  c.map.captured_at = step_number;
  if (config.annotate_screenshots && options.overlay && !c.map.empty()) {
    try {
      options.overlay->annotate(session, c.map, options.overlay_style);
      c.annotated = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kScriptEvaluationFailure) throw;
      c.note = "overlay unavailable, screenshot not annotated";
    }
  }
  c.screenshot = session.capture_screenshot();
  if (c.annotated) options.overlay->clear(session);
  return c;
}

bool is_fatal_browser_error(ErrorCode code) {
  return code == ErrorCode::kProtocolError || code == ErrorCode::kTimeout || code == ErrorCode::kSessionClosed ||
         code == ErrorCode::kConnectionRefused;
}

}  // namespace

std::string action_instructions() {
  return "You control the browser one action at a time. Each message shows the current screenshot "
         "(interactive elements carry numbered badges when annotation is on), the numbered element list "
         "and what happened so far.\n"
         "Reply with exactly one JSON object and nothing else:\n"
         "{\"evaluation\": \"<did the previous action work as expected, and what did you notice>\", "
         "\"next_goal\": \"<what you want to achieve next>\", \"kind\": \"<action>\", ...}\n"
         "Actions:\n"
         "  {\"kind\": \"click\", \"element_index\": N}\n"
         "  {\"kind\": \"type\", \"element_index\": N, \"text\": \"...\"}   (a trailing \\n presses Enter)\n"
         "  {\"kind\": \"scroll\", \"direction\": \"up\" | \"down\"}\n"
         "  {\"kind\": \"navigate\", \"url\": \"http://...\"}\n"
         "  {\"kind\": \"back\"}\n"
         "  {\"kind\": \"done\", \"reason\": \"...\"}   when the task is tested\n"
         "element_index must be one of the listed indices.";
}

std::string step_context(const EpisodeRequest& request, const EpisodeConfig& config, int step_number,
                         const std::vector<TrajectoryStep>& history, const browser::ElementMap& map,
                         int attached_screenshots) {
  std::ostringstream out;
  out << "Step " << step_number << " of at most " << config.max_steps << ". Site under test: " << request.target_url
      << "\nCurrent page: " << (map.page_url.empty() ? "(unknown)" : map.page_url) << "\n\n";
  if (history.empty()) {
    out << "No actions taken yet.\n";
  } else {
    out << "Actions so far:\n";
    for (const auto& s : history) {
      out << "  " << s.step_number << ". " << (s.action ? vlm::describe(*s.action) : std::string("no action"))
          << " -> " << describe_outcome(s.outcome);
      for (const auto& err : s.outcome.console_errors) out << "\n     console error: " << err;
      out << '\n';
    }
  }
  out << "\nInteractive elements:\n" << map.describe();
  if (attached_screenshots > 1) {
    out << "\nAttached are the last " << attached_screenshots
        << " screenshots, oldest first; the final one is the current state.";
  } else {
    out << "\nAttached is the current screenshot.";
  }
  return out.str();
}

Trajectory run_episode(browser::BrowserSession& session, const EpisodeRequest& request, const EpisodeConfig& config,
                       vlm::Backend& backend, const EpisodeOptions& options) {
  config.validate();
  if (!session.is_open()) throw Error(ErrorCode::kSessionClosed, "session is closed");
  if (prompt::count_placeholders(request.prompt_text) != 0) {
    throw Error(ErrorCode::kPrecondition, "prompt still contains the [URL] placeholder");
  }

  Trajectory t;
  t.run_id = request.run_id;
  t.target_url = request.target_url;
  t.prompt_id = request.prompt_id;
  t.prompt_text = request.prompt_text;
  t.model_id = backend.id();
  t.config = config;
  t.started_at = iso8601_now();
  if (options.store) options.store->register_run(t);

  auto end = [&](Termination termination, std::string detail) {
    t.termination = termination;
    t.termination_detail = std::move(detail);
    t.finished_at = iso8601_now();
    if (options.store) {
      try {
        options.store->finish(t);
      } catch (const Error&) {
        // The steps are on disk; a missing termination reads as interrupted.
      }
    }
    return t;
  };

  ActionOutcome initial = session.navigate(request.target_url);
  if (initial.status == OutcomeStatus::kNavigationFailed || initial.status == OutcomeStatus::kProtocolError) {
    return end(Termination::kFatalError, "initial navigation: " + describe_outcome(initial));
  }

  const std::string system_text = request.prompt_text + "\n\n" + action_instructions();
  int window = config.history_screenshots;
  if (backend.max_images_per_request() > 0) window = std::min(window, backend.max_images_per_request());

  for (int n = 1; n <= config.max_steps; ++n) {
    if (!session.is_healthy()) return end(Termination::kFatalError, "browser connection lost");

    TrajectoryStep step;
    step.step_number = n;
    try {
      Capture c = capture(session, n, config, options);
      step.element_map = std::move(c.map);
      step.screenshot = std::move(c.screenshot);
      step.annotated = c.annotated;
      step.note = c.note;
    } catch (const Error& e) {
      if (!is_fatal_browser_error(e.code())) throw;
      return end(Termination::kFatalError, std::string("capture failed: ") + e.what());
    }
    step.screenshot_ref = step.screenshot.content_hash();

    std::vector<ImageBlob> images = screenshot_window(t.steps, step.screenshot, window);
    int attached = static_cast<int>(images.size());
    std::vector<vlm::ChatTurn> turns{
        vlm::ChatTurn::system(system_text),
        vlm::ChatTurn::user(step_context(request, config, n, t.steps, step.element_map, attached), std::move(images))};

    std::optional<vlm::StepReply> reply;
    std::string last_problem;
    for (int attempt = 0; attempt <= config.reprompt_limit_per_step; ++attempt) {
      vlm::ModelReply model_reply;
      try {
        model_reply = backend.complete(turns, options.completion);
      } catch (const Error& e) {
        return end(Termination::kFatalError, std::string("model request failed: ") + e.what());
      }
      step.raw_reply = valid_utf8(model_reply.text);
      if (!model_reply.model_id.empty()) t.model_id = model_reply.model_id;
      try {
        vlm::StepReply parsed = vlm::parse_step_reply(model_reply.text);
        if (parsed.action.targets_element() && !step.element_map.find(parsed.action.element_index)) {
          throw Error(ErrorCode::kInvalidAction,
                      "element_index " + std::to_string(parsed.action.element_index) + " is not in the list (1.." +
                          std::to_string(step.element_map.size()) + ")");
        }
        reply = std::move(parsed);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUnparseable && e.code() != ErrorCode::kInvalidAction) throw;
        last_problem = e.what();
      }
      turns.push_back(vlm::ChatTurn::assistant(model_reply.text.empty() ? "(empty reply)" : model_reply.text));
      turns.push_back(vlm::ChatTurn::user("Your reply could not be used: " + last_problem +
                                          "\nReply again with exactly one JSON object as instructed."));
    }

    bool done = false;
    if (!reply) {
      if (!step.note.empty()) step.note += "; ";
      step.note += "no usable action after " + std::to_string(config.reprompt_limit_per_step + 1) +
                   " replies: " + last_problem;
      step.outcome.status = OutcomeStatus::kOk;
      step.outcome.detail = "no-op";
      try {
        step.outcome.resulting_url = session.current_url();
      } catch (const Error& e) {
        if (!is_fatal_browser_error(e.code())) throw;
        step.outcome.resulting_url = step.element_map.page_url;
      }
    } else {
      step.evaluation = reply->evaluation;
      step.next_goal = reply->next_goal;
      step.action = reply->action;
      try {
        step.outcome = session.execute_action(reply->action, step.element_map);
      } catch (const Error& e) {
        if (!is_fatal_browser_error(e.code())) throw;
        step.outcome.status = OutcomeStatus::kProtocolError;
        step.outcome.detail = e.what();
      }
      done = reply->action.kind == vlm::ActionKind::kDone;
    }

    t.steps.push_back(step);
    if (options.store) {
      try {
        options.store->persist_step(t.run_id, step);
      } catch (const Error& e) {
        return end(Termination::kFatalError, std::string("persisting step failed: ") + e.what());
      }
    }
    if (options.on_step) options.on_step(t.steps.back());

    if (done) return end(Termination::kDoneSignal, reply->action.reason);
    if (step.outcome.status == OutcomeStatus::kProtocolError && !session.is_healthy()) {
      return end(Termination::kFatalError, "browser connection lost: " + step.outcome.detail);
    }
  }
  return end(Termination::kStepLimit, "reached " + std::to_string(config.max_steps) + " steps");
}

}  // namespace uxprobe::agent
