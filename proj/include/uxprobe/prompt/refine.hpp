#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "uxprobe/prompt/bug_database.hpp"
#include "uxprobe/prompt/testing_prompt.hpp"
#include "uxprobe/vlm/backend.hpp"

namespace uxprobe::prompt {

// Meta-prompt templates use {{CLASS}}, {{CURRENT_PROMPT}} and {{BUG_LIST}}.
std::string build_meta_prompt(std::string_view meta_template, const TestingPrompt& current,
                              const std::vector<BugRecord>& bugs);

// Asks the backend for an improved prompt. A reply without exactly one [URL]
// placeholder is re-requested once. Errors: kPrecondition (no bugs),
// kMalformedRefinement, and backend errors unchanged.
TestingPrompt refine_prompt(vlm::Backend& backend, const TestingPrompt& current, const std::vector<BugRecord>& bugs,
                            std::string_view meta_template, const vlm::CompletionParams& params = {});

}  // namespace uxprobe::prompt
