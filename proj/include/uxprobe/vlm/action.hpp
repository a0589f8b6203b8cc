#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace uxprobe::vlm {

enum class ActionKind { kClick, kType, kScroll, kNavigate, kBack, kDone };
enum class ScrollDirection { kUp, kDown };

std::string_view to_string(ActionKind kind);
std::string_view to_string(ScrollDirection direction);
std::optional<ActionKind> parse_action_kind(std::string_view text);

// One model-chosen browser action. Only the fields that belong to `kind`
// carry meaning; the factories leave every other field at its default so
// defaulted equality is field-exact.
struct AgentAction {
  ActionKind kind = ActionKind::kDone;
  int element_index = 0;                               // click, type
  std::string text;                                    // type
  ScrollDirection direction = ScrollDirection::kDown;  // scroll
  std::string url;                                     // navigate
  std::string reason;                                  // done

  static AgentAction click(int index);
  static AgentAction type(int index, std::string text);
  static AgentAction scroll(ScrollDirection direction);
  static AgentAction navigate(std::string url);
  static AgentAction back();
  static AgentAction done(std::string reason);

  bool targets_element() const { return kind == ActionKind::kClick || kind == ActionKind::kType; }

  friend bool operator==(const AgentAction&, const AgentAction&) = default;
};

// Throws Error(kInvalidAction) when `action` breaks the per-kind field rules.
void validate(const AgentAction& action);

// Short human-readable form, e.g. `click [3]` or `type [2] "hello"`.
std::string describe(const AgentAction& action);

nlohmann::json action_to_json(const AgentAction& action);
// Strict: rejects missing, mistyped and foreign action fields (kInvalidAction).
AgentAction action_from_json(const nlohmann::json& object);

// A complete per-step model reply: the action plus the model's assessment of
// the previous step and its next goal.
struct StepReply {
  std::string evaluation;
  std::string next_goal;
  AgentAction action;
};

// Extracts the first action object from free-form model text (fenced or bare).
// Errors: kUnparseable (no action object), kInvalidAction (object found but
// it violates the field rules). Never aborts on arbitrary input.
AgentAction parse_action(std::string_view reply_text);
StepReply parse_step_reply(std::string_view reply_text);

// Canonical single-object wire form a model is asked to produce.
std::string serialize_action(const AgentAction& action);
std::string serialize_step_reply(const StepReply& reply);

}  // namespace uxprobe::vlm
