#include "uxprobe/vlm/action.hpp"

#include <array>
#include <limits>

#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/url.hpp"

namespace uxprobe::vlm {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 5> kActionFields = {"element_index", "text", "direction", "url", "reason"};

// Upper bounds that keep extraction linear-ish on hostile input.
constexpr std::size_t kMaxScannedBytes = 1u << 20;
constexpr std::size_t kScanBudget = 8u << 20;

bool field_belongs(ActionKind kind, std::string_view field) {
  switch (kind) {
    case ActionKind::kClick: return field == "element_index";
    case ActionKind::kType: return field == "element_index" || field == "text";
    case ActionKind::kScroll: return field == "direction";
    case ActionKind::kNavigate: return field == "url";
    case ActionKind::kBack: return false;
    case ActionKind::kDone: return field == "reason";
  }
  return false;
}

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorCode::kInvalidAction, message); }

int read_index(const json& object) {
  auto it = object.find("element_index");
  if (it == object.end()) invalid("element_index is required");
  if (it->is_number_unsigned() || it->is_number_integer()) {
    auto value = it->get<std::int64_t>();
    if (it->is_number_unsigned() && it->get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
      invalid("element_index out of range");
    }
    if (value < 1 || value > std::numeric_limits<int>::max()) invalid("element_index must be >= 1");
    return static_cast<int>(value);
  }
  invalid("element_index must be an integer");
}

std::string read_string(const json& object, std::string_view field) {
  auto it = object.find(field);
  if (it == object.end()) invalid(std::string(field) + " is required");
  if (!it->is_string()) invalid(std::string(field) + " must be a string");
  return it->get<std::string>();
}

// End index (exclusive) of the balanced {...} starting at `begin`, honouring
// JSON string escapes, or npos.
std::size_t match_brace(std::string_view text, std::size_t begin, std::size_t& budget) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = begin; i < text.size(); ++i) {
    if (budget == 0) return std::string_view::npos;
    --budget;
    char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

struct Located {
  json object;       // the object carrying "kind"
  json envelope;     // object carrying evaluation/next_goal siblings
};

std::optional<Located> as_action_object(const json& value) {
  if (!value.is_object()) return std::nullopt;
  if (value.contains("kind")) return Located{value, value};
  auto nested = value.find("action");
  if (nested != value.end() && nested->is_object() && nested->contains("kind")) return Located{*nested, value};
  return std::nullopt;
}

std::optional<Located> try_candidate(std::string_view candidate) {
  json value = json::parse(candidate.begin(), candidate.end(), nullptr, false);
  if (value.is_discarded()) return std::nullopt;
  return as_action_object(value);
}

std::optional<Located> locate(std::string_view text) {
  if (text.size() > kMaxScannedBytes) text = text.substr(0, kMaxScannedBytes);
  std::size_t budget = kScanBudget;

  // Fenced blocks first: ```json ... ``` or ``` ... ```.
  std::size_t search = 0;
  while (true) {
    std::size_t open = text.find("```", search);
    if (open == std::string_view::npos) break;
    std::size_t body = text.find('\n', open + 3);
    if (body == std::string_view::npos) break;
    std::size_t close = text.find("```", body + 1);
    if (close == std::string_view::npos) break;
    std::string_view block = text.substr(body + 1, close - body - 1);
    if (auto found = try_candidate(block)) return found;
    search = close + 3;
  }

  for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
    std::size_t end = match_brace(text, pos, budget);
    if (end == std::string_view::npos) {
      if (budget == 0) break;
      continue;
    }
    if (auto found = try_candidate(text.substr(pos, end - pos))) return found;
  }
  return std::nullopt;
}

std::string optional_string(const json& object, std::string_view field) {
  auto it = object.find(field);
  if (it != object.end() && it->is_string()) return it->get<std::string>();
  return {};
}

}  // namespace

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::kClick: return "click";
    case ActionKind::kType: return "type";
    case ActionKind::kScroll: return "scroll";
    case ActionKind::kNavigate: return "navigate";
    case ActionKind::kBack: return "back";
    case ActionKind::kDone: return "done";
  }
  return "done";
}

std::string_view to_string(ScrollDirection direction) {
  return direction == ScrollDirection::kUp ? "up" : "down";
}

std::optional<ActionKind> parse_action_kind(std::string_view text) {
  std::string lower = to_lower(trim(text));
  for (ActionKind kind : {ActionKind::kClick, ActionKind::kType, ActionKind::kScroll, ActionKind::kNavigate,
                          ActionKind::kBack, ActionKind::kDone}) {
    if (lower == to_string(kind)) return kind;
  }
  return std::nullopt;
}

AgentAction AgentAction::click(int index) {
  AgentAction a;
  a.kind = ActionKind::kClick;
  a.element_index = index;
  return a;
}

AgentAction AgentAction::type(int index, std::string text) {
  AgentAction a;
  a.kind = ActionKind::kType;
  a.element_index = index;
  a.text = std::move(text);
  return a;
}

AgentAction AgentAction::scroll(ScrollDirection direction) {
  AgentAction a;
  a.kind = ActionKind::kScroll;
  a.direction = direction;
  return a;
}

AgentAction AgentAction::navigate(std::string url) {
  AgentAction a;
  a.kind = ActionKind::kNavigate;
  a.url = std::move(url);
  return a;
}

AgentAction AgentAction::back() {
  AgentAction a;
  a.kind = ActionKind::kBack;
  return a;
}

AgentAction AgentAction::done(std::string reason) {
  AgentAction a;
  a.kind = ActionKind::kDone;
  a.reason = std::move(reason);
  return a;
}

void validate(const AgentAction& action) {
  if (action.targets_element() && action.element_index < 1) invalid("element_index must be >= 1");
  if (!action.targets_element() && action.element_index != 0) invalid("element_index not allowed for this kind");
  if (action.kind != ActionKind::kType && !action.text.empty()) invalid("text only allowed for type");
  if (action.kind != ActionKind::kScroll && action.direction != ScrollDirection::kDown) {
    invalid("direction only allowed for scroll");
  }
  if (action.kind == ActionKind::kNavigate && !is_well_formed_http_url(action.url)) {
    invalid("navigate requires an absolute http(s) url");
  }
  if (action.kind != ActionKind::kNavigate && !action.url.empty()) invalid("url only allowed for navigate");
  if (action.kind != ActionKind::kDone && !action.reason.empty()) invalid("reason only allowed for done");
}

std::string describe(const AgentAction& action) {
  switch (action.kind) {
    case ActionKind::kClick: return "click [" + std::to_string(action.element_index) + "]";
    case ActionKind::kType:
      return "type [" + std::to_string(action.element_index) + "] " + json(action.text).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    case ActionKind::kScroll: return "scroll " + std::string(to_string(action.direction));
    case ActionKind::kNavigate: return "navigate " + action.url;
    case ActionKind::kBack: return "back";
    case ActionKind::kDone: return "done: " + action.reason;
  }
  return "unknown";
}

json action_to_json(const AgentAction& action) {
  json out;
  out["kind"] = to_string(action.kind);
  switch (action.kind) {
    case ActionKind::kClick: out["element_index"] = action.element_index; break;
    case ActionKind::kType:
      out["element_index"] = action.element_index;
      out["text"] = action.text;
      break;
    case ActionKind::kScroll: out["direction"] = to_string(action.direction); break;
    case ActionKind::kNavigate: out["url"] = action.url; break;
    case ActionKind::kBack: break;
    case ActionKind::kDone: out["reason"] = action.reason; break;
  }
  return out;
}

AgentAction action_from_json(const json& object) {
  if (!object.is_object()) invalid("action must be an object");
  auto kind_it = object.find("kind");
  if (kind_it == object.end() || !kind_it->is_string()) invalid("kind must be a string");
  auto kind = parse_action_kind(kind_it->get<std::string>());
  if (!kind) invalid("unknown action kind '" + kind_it->get<std::string>() + "'");

  for (std::string_view field : kActionFields) {
    auto it = object.find(field);
    if (it != object.end() && !it->is_null() && !field_belongs(*kind, field)) {
      invalid(std::string(field) + " is not allowed for " + std::string(to_string(*kind)));
    }
  }

  AgentAction action;
  action.kind = *kind;
  switch (*kind) {
    case ActionKind::kClick: action.element_index = read_index(object); break;
    case ActionKind::kType:
      action.element_index = read_index(object);
      action.text = read_string(object, "text");
      break;
    case ActionKind::kScroll: {
      std::string dir = to_lower(read_string(object, "direction"));
      if (dir == "up") {
        action.direction = ScrollDirection::kUp;
      } else if (dir == "down") {
        action.direction = ScrollDirection::kDown;
      } else {
        invalid("direction must be up or down");
      }
      break;
    }
    case ActionKind::kNavigate:
      action.url = read_string(object, "url");
      if (!is_well_formed_http_url(action.url)) invalid("navigate requires an absolute http(s) url");
      break;
    case ActionKind::kBack: break;
    case ActionKind::kDone: action.reason = read_string(object, "reason"); break;
  }
  return action;
}

AgentAction parse_action(std::string_view reply_text) { return parse_step_reply(reply_text).action; }

StepReply parse_step_reply(std::string_view reply_text) {
  auto located = locate(reply_text);
  if (!located) throw Error(ErrorCode::kUnparseable, "no action object found in reply");
  StepReply reply;
  reply.action = action_from_json(located->object);
  reply.evaluation = optional_string(located->envelope, "evaluation");
  reply.next_goal = optional_string(located->envelope, "next_goal");
  return reply;
}

std::string serialize_action(const AgentAction& action) { return action_to_json(action).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace); }

std::string serialize_step_reply(const StepReply& reply) {
  json out = json::object();
  out["evaluation"] = reply.evaluation;
  out["next_goal"] = reply.next_goal;
  out.update(action_to_json(reply.action));
  return out.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace uxprobe::vlm
