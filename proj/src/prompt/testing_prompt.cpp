#include "uxprobe/prompt/testing_prompt.hpp"

#include <regex>

#include "json.hpp"
#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"

namespace uxprobe::prompt {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string strip_final_newline(std::string text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

}  // namespace

std::string prompt_id(std::string_view class_name, int generation) {
  return std::string(class_name) + "/gen" + std::to_string(generation);
}

std::string TestingPrompt::id() const { return prompt_id(site_class.name, generation); }

std::size_t count_placeholders(std::string_view body) {
  std::size_t count = 0;
  for (auto at = body.find(kUrlPlaceholder); at != std::string_view::npos;
       at = body.find(kUrlPlaceholder, at + kUrlPlaceholder.size())) {
    ++count;
  }
  return count;
}

void validate(const TestingPrompt& prompt) {
  if (prompt.site_class.name.empty()) throw Error(ErrorCode::kPrecondition, "prompt has no website class");
  if (count_placeholders(prompt.body) != 1) {
    throw Error(ErrorCode::kPrecondition, prompt.id() + ": body must contain [URL] exactly once");
  }
  if (prompt.generation < 0) throw Error(ErrorCode::kPrecondition, "negative generation");
  if ((prompt.generation == 0) != !prompt.parent_id.has_value()) {
    throw Error(ErrorCode::kPrecondition, prompt.id() + ": only generation 0 may lack a parent");
  }
}

std::string render(const TestingPrompt& prompt, std::string_view url) {
  std::string out = prompt.body;
  auto at = out.find(kUrlPlaceholder);
  if (at != std::string::npos) out.replace(at, kUrlPlaceholder.size(), url);
  return out;
}

TemplateStore TemplateStore::load(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::kConfigError, "prompt directory not found: " + root.string());
  TemplateStore store;
  store.root_ = root;
  static const std::regex kGenFile(R"(gen(\d+)\.txt)");
  for (const auto& dir : fs::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    WebsiteClass cls;
    cls.name = dir.path().filename().string();
    if (fs::exists(dir.path() / "class.txt")) cls.description = trim(read_text_file(dir.path() / "class.txt"));
    for (const auto& file : fs::directory_iterator(dir.path())) {
      std::smatch m;
      std::string name = file.path().filename().string();
      if (!std::regex_match(name, m, kGenFile)) continue;
      TestingPrompt p;
      p.site_class = cls;
      p.generation = std::stoi(m[1].str());
      p.body = strip_final_newline(read_text_file(file.path()));
      fs::path meta_path = dir.path() / ("gen" + m[1].str() + ".meta.json");
      if (fs::exists(meta_path)) {
        json meta = json::parse(read_text_file(meta_path), nullptr, false);
        if (meta.is_discarded() || !meta.is_object()) {
          throw Error(ErrorCode::kConfigError, "malformed prompt metadata: " + meta_path.string());
        }
        if (meta.contains("parent_id") && meta["parent_id"].is_string()) p.parent_id = meta["parent_id"].get<std::string>();
        for (const auto& id : meta.value("derived_from_bugs", json::array())) {
          if (id.is_string()) p.derived_from_bugs.push_back(id.get<std::string>());
        }
      } else if (p.generation > 0) {
        p.parent_id = prompt_id(cls.name, p.generation - 1);
      }
      try {
        validate(p);
      } catch (const Error& e) {
        throw Error(ErrorCode::kConfigError, std::string("invalid prompt template: ") + e.what());
      }
      store.prompts_[cls.name][p.generation] = std::move(p);
    }
    store.classes_[cls.name] = std::move(cls);
  }
  return store;
}

std::vector<std::string> TemplateStore::class_names() const {
  std::vector<std::string> names;
  for (const auto& [name, cls] : classes_) names.push_back(name);
  return names;
}

const WebsiteClass& TemplateStore::site_class(std::string_view name) const {
  auto it = classes_.find(name);
  if (it == classes_.end()) throw Error(ErrorCode::kUnknownClass, "no prompt templates for class '" + std::string(name) + "'");
  return it->second;
}

const TestingPrompt& TemplateStore::get(std::string_view class_name, int generation) const {
  site_class(class_name);
  auto it = prompts_.find(class_name);
  if (it == prompts_.end() || !it->second.contains(generation)) {
    throw Error(ErrorCode::kUnknownGeneration,
                "class '" + std::string(class_name) + "' has no generation " + std::to_string(generation));
  }
  return it->second.at(generation);
}

const TestingPrompt& TemplateStore::latest(std::string_view class_name) const {
  site_class(class_name);
  auto it = prompts_.find(class_name);
  if (it == prompts_.end() || it->second.empty()) {
    throw Error(ErrorCode::kUnknownGeneration, "class '" + std::string(class_name) + "' has no prompts");
  }
  return it->second.rbegin()->second;
}

const TestingPrompt* TemplateStore::find(std::string_view id) const {
  for (const auto& [name, gens] : prompts_) {
    for (const auto& [gen, p] : gens) {
      if (p.id() == id) return &p;
    }
  }
  return nullptr;
}

void TemplateStore::save(const TestingPrompt& prompt) {
  validate(prompt);
  auto& gens = prompts_[prompt.site_class.name];
  if (gens.contains(prompt.generation)) {
    throw Error(ErrorCode::kPrecondition, prompt.id() + " already exists");
  }
  fs::path dir = root_ / prompt.site_class.name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!classes_.contains(prompt.site_class.name)) {
    if (!fs::exists(dir / "class.txt")) write_file_atomic(dir / "class.txt", prompt.site_class.description + "\n");
    classes_[prompt.site_class.name] = prompt.site_class;
  }
  json meta = {{"schema_version", 1},
               {"generation", prompt.generation},
               {"parent_id", prompt.parent_id ? json(*prompt.parent_id) : json(nullptr)},
               {"derived_from_bugs", prompt.derived_from_bugs}};
  std::string stem = "gen" + std::to_string(prompt.generation);
  write_file_atomic(dir / (stem + ".meta.json"), meta.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n");
  write_file_atomic(dir / (stem + ".txt"), prompt.body + "\n");
  gens[prompt.generation] = prompt;
}

std::string render_prompt(const TemplateStore& store, std::string_view class_name, std::string_view url,
                          int generation) {
  return render(store.get(class_name, generation), url);
}

}  // namespace uxprobe::prompt
