#include "uxprobe/prompt/refine.hpp"

#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"

namespace uxprobe::prompt {
namespace {

constexpr std::string_view kSystem =
    "You write testing instructions for an autonomous agent that explores websites in a browser.";
constexpr std::string_view kRetry =
    "That reply cannot be used: it must contain the placeholder [URL] exactly once. "
    "Send the complete instructions again with [URL] where the site address belongs.";

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  for (auto at = text.find(from); at != std::string::npos; at = text.find(from, at + to.size())) {
    text.replace(at, from.size(), to);
  }
}

// Drops a code fence wrapped around the whole reply.
std::string clean_reply(std::string_view reply) {
  std::string text = trim(reply);
  if (text.starts_with("```")) {
    auto first_newline = text.find('\n');
    auto closing = text.rfind("```");
    if (first_newline != std::string::npos && closing > first_newline) {
      text = trim(std::string_view(text).substr(first_newline + 1, closing - first_newline - 1));
    }
  }
  return text;
}

}  // namespace

std::string build_meta_prompt(std::string_view meta_template, const TestingPrompt& current,
                              const std::vector<BugRecord>& bugs) {
  std::string list;
  for (std::size_t i = 0; i < bugs.size(); ++i) {
    const BugRecord& b = bugs[i];
    list += std::to_string(i + 1) + ". [" + std::string(to_string(b.category)) + "] " + collapse_whitespace(b.description);
    if (b.source_url) list += " (seen at " + *b.source_url + ")";
    list += "\n";
  }
  std::string text(meta_template);
  // Substitute the prompt last so braces inside it are left alone.
  replace_all(text, "{{CLASS}}", current.site_class.name);
  replace_all(text, "{{BUG_LIST}}", list);
  replace_all(text, "{{CURRENT_PROMPT}}", current.body);
  return text;
}

TestingPrompt refine_prompt(vlm::Backend& backend, const TestingPrompt& current, const std::vector<BugRecord>& bugs,
                            std::string_view meta_template, const vlm::CompletionParams& params) {
  if (bugs.empty()) throw Error(ErrorCode::kPrecondition, "refinement needs at least one bug");
  std::vector<vlm::ChatTurn> turns = {vlm::ChatTurn::system(std::string(kSystem)),
                                      vlm::ChatTurn::user(build_meta_prompt(meta_template, current, bugs))};
  for (int attempt = 0; attempt < 2; ++attempt) {
    vlm::ModelReply reply = backend.complete(turns, params);
    std::string body = clean_reply(reply.text);
    if (count_placeholders(body) == 1) {
      TestingPrompt next;
      next.site_class = current.site_class;
      next.body = std::move(body);
      next.generation = current.generation + 1;
      next.parent_id = current.id();
      for (const auto& b : bugs) next.derived_from_bugs.push_back(b.id);
      return next;
    }
    turns.push_back(vlm::ChatTurn::assistant(reply.text.empty() ? std::string("(empty)") : reply.text));
    turns.push_back(vlm::ChatTurn::user(std::string(kRetry)));
  }
  throw Error(ErrorCode::kMalformedRefinement, "model reply lacked the [URL] placeholder twice");
}

}  // namespace uxprobe::prompt
