#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uxprobe::prompt {

inline constexpr std::string_view kUrlPlaceholder = "[URL]";

struct WebsiteClass {
  std::string name;  // e.g. "personal-website"
  std::string description;

  friend bool operator==(const WebsiteClass&, const WebsiteClass&) = default;
};

struct TestingPrompt {
  WebsiteClass site_class;
  std::string body;  // contains kUrlPlaceholder exactly once
  int generation = 0;
  std::optional<std::string> parent_id;
  std::vector<std::string> derived_from_bugs;

  // "<class>/gen<N>"
  std::string id() const;

  friend bool operator==(const TestingPrompt&, const TestingPrompt&) = default;
};

std::string prompt_id(std::string_view class_name, int generation);
std::size_t count_placeholders(std::string_view body);

// Throws Error(kPrecondition) when the placeholder count is not one or the
// generation/parent pairing is inconsistent.
void validate(const TestingPrompt& prompt);

// Substitutes the URL for the placeholder.
std::string render(const TestingPrompt& prompt, std::string_view url);

// Prompt templates on disk: <root>/<class>/class.txt plus gen<N>.txt with an
// optional gen<N>.meta.json sidecar carrying lineage.
class TemplateStore {
 public:
  // Errors: kConfigError when the directory is missing or a template is invalid.
  static TemplateStore load(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  std::vector<std::string> class_names() const;
  // Errors: kUnknownClass.
  const WebsiteClass& site_class(std::string_view name) const;
  // Errors: kUnknownClass, kUnknownGeneration.
  const TestingPrompt& get(std::string_view class_name, int generation) const;
  const TestingPrompt& latest(std::string_view class_name) const;
  // Looks a prompt up by id; nullptr when absent.
  const TestingPrompt* find(std::string_view id) const;

  // Writes the template files and adds the prompt. Errors: kStorageFailure,
  // kPrecondition when that generation already exists.
  void save(const TestingPrompt& prompt);

 private:
  std::filesystem::path root_;
  std::map<std::string, WebsiteClass, std::less<>> classes_;
  std::map<std::string, std::map<int, TestingPrompt>, std::less<>> prompts_;
};

// Errors: kUnknownClass, kUnknownGeneration.
std::string render_prompt(const TemplateStore& store, std::string_view class_name, std::string_view url,
                          int generation);

}  // namespace uxprobe::prompt
