#include "uxprobe/vlm/backend.hpp"

#include <sstream>

#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"

namespace uxprobe::vlm {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

void validate(const ChatTurn& turn) {
  if (turn.role == Role::kAssistant && !turn.images.empty()) {
    throw Error(ErrorCode::kPrecondition, "assistant turns carry no images");
  }
  if (turn.text.empty() && turn.images.empty()) {
    throw Error(ErrorCode::kPrecondition, "chat turn has neither text nor images");
  }
}

ModelReply Backend::complete(std::span<const ChatTurn> turns, const CompletionParams& params) {
  if (turns.empty()) throw Error(ErrorCode::kPrecondition, "request has no turns");
  if (turns.front().role != Role::kSystem) throw Error(ErrorCode::kPrecondition, "first turn must be system");
  for (const auto& turn : turns) validate(turn);
  return do_complete(turns, params);
}

ReplyScript ReplyScript::parse(std::string_view text) {
  ReplyScript script;
  std::istringstream in{std::string(text)};
  std::string line;
  std::string current;
  bool header = true;
  bool have_record = false;
  auto flush = [&] {
    std::string record = current;
    while (!record.empty() && (record.front() == '\n' || record.front() == '\r')) record.erase(record.begin());
    while (!record.empty() && (record.back() == '\n' || record.back() == '\r')) record.pop_back();
    if (have_record || !record.empty()) script.replies.push_back(std::move(record));
    current.clear();
    have_record = false;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header && line.starts_with("#!")) {
      std::string directive = to_lower(trim(line.substr(2)));
      if (directive.starts_with("exhaustion:")) {
        std::string value = trim(directive.substr(11));
        if (value == "repeat-last") {
          script.exhaustion = ExhaustionPolicy::kRepeatLast;
        } else if (value == "error") {
          script.exhaustion = ExhaustionPolicy::kError;
        } else {
          throw Error(ErrorCode::kConfigError, "unknown exhaustion policy '" + value + "'");
        }
      }
      continue;
    }
    header = false;
    if (trim(line) == "%%") {
      have_record = true;
      flush();
      continue;
    }
    current += line;
    current += '\n';
  }
  if (!trim(current).empty()) flush();
  if (script.replies.empty()) throw Error(ErrorCode::kConfigError, "reply script has no records");
  return script;
}

ReplyScript ReplyScript::load(const std::filesystem::path& path) {
  try {
    return parse(read_text_file(path));
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
}

std::string ReplyScript::serialize() const {
  std::string out = exhaustion == ExhaustionPolicy::kRepeatLast ? "#! exhaustion: repeat-last\n" : "#! exhaustion: error\n";
  for (std::size_t i = 0; i < replies.size(); ++i) {
    out += replies[i];
    out += "\n%%\n";
  }
  return out;
}

ScriptedBackend::ScriptedBackend(ReplyScript script, std::string id) : script_(std::move(script)), id_(std::move(id)) {
  if (script_.replies.empty()) throw Error(ErrorCode::kConfigError, "reply script must be non-empty");
}

std::size_t ScriptedBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::vector<std::vector<ChatTurn>> ScriptedBackend::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

ModelReply ScriptedBackend::do_complete(std::span<const ChatTurn> turns, const CompletionParams&) {
  std::lock_guard lock(mutex_);
  requests_.emplace_back(turns.begin(), turns.end());
  std::size_t index = next_++;
  if (index >= script_.replies.size()) {
    if (script_.exhaustion == ExhaustionPolicy::kError) {
      throw Error(ErrorCode::kScriptExhausted, id_ + ": no reply left after " + std::to_string(script_.replies.size()));
    }
    index = script_.replies.size() - 1;
  }
  ModelReply reply;
  reply.text = script_.replies[index];
  reply.model_id = id_;
  return reply;
}

}  // namespace uxprobe::vlm
