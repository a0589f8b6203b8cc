#include "uxprobe/harness/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>

#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"

#ifndef UXPROBE_DEFAULT_ASSETS
#define UXPROBE_DEFAULT_ASSETS "assets"
#endif

namespace uxprobe::harness {
namespace {

namespace fs = std::filesystem;

const KeySpec* find_key(std::string_view key) {
  for (const auto& spec : known_keys()) {
    if (spec.key == key) return &spec;
  }
  return nullptr;
}

bool parse_long(std::string_view text, long& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

bool parse_number(std::string_view text, double& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::kConfigError, message); }

bool is_scripted(std::string_view spec) { return spec.starts_with("scripted:"); }

}  // namespace

const std::vector<KeySpec>& known_keys() {
  static const std::vector<KeySpec> keys = {
      {"browser.endpoint", ValueKind::kString, "http://127.0.0.1:9222",
       "debugger endpoint (http://host:port or ws://...), or \"sim\" for the built-in simulated browser"},
      {"browser.executable", ValueKind::kPath, "", "Chromium binary to launch; overrides browser.endpoint"},
      {"browser.viewport_width", ValueKind::kInt, "1280", "viewport width in CSS pixels", 1},
      {"browser.viewport_height", ValueKind::kInt, "1024", "viewport height in CSS pixels", 1},
      {"browser.navigation_timeout_ms", ValueKind::kInt, "15000", "page load timeout", 1},
      {"browser.settle_ms", ValueKind::kInt, "500", "pause after each action", 1},
      {"backend.explore", ValueKind::kString, "", "backend for exploration: live, live:<model> or scripted:<file>"},
      {"backend.report", ValueKind::kString, "", "backend for the report (defaults to backend.explore)"},
      {"backend.refine", ValueKind::kString, "", "backend for prompt refinement (defaults to backend.report)"},
      {"live.base_url", ValueKind::kString, "https://api.openai.com/v1", "chat-completions base URL"},
      {"live.model", ValueKind::kString, "gpt-4o", "model name sent to the provider"},
      {"live.api_key_env", ValueKind::kString, "OPENAI_API_KEY", "environment variable holding the API key"},
      {"live.max_retries", ValueKind::kInt, "3", "retries after the first attempt", 0},
      {"live.requests_per_minute", ValueKind::kInt, "0", "client-side rate limit, 0 = off", 0},
      {"live.timeout_ms", ValueKind::kInt, "120000", "per-request timeout", 1},
      {"live.max_images", ValueKind::kInt, "50", "most images per request", 1},
      {"live.temperature", ValueKind::kNumber, "0", "sampling temperature"},
      {"episode.max_steps", ValueKind::kInt, "20", "step limit per episode", 1},
      {"episode.annotate", ValueKind::kBool, "true", "draw index badges when an overlay script is set"},
      {"episode.reprompt_limit", ValueKind::kInt, "2", "extra attempts when a reply is unusable", 0},
      {"episode.history_screenshots", ValueKind::kInt, "3", "screenshots sent per step, current included", 1},
      {"overlay.script", ValueKind::kPath, "", "overlay script defining the badge registry"},
      {"prompt.class", ValueKind::kString, "personal-website", "website class of the testing prompt"},
      {"prompt.generation", ValueKind::kInt, "-1", "prompt generation, -1 = latest", -1},
      {"paths.assets", ValueKind::kPath, UXPROBE_DEFAULT_ASSETS, "asset directory (report and refine prompts)"},
      {"paths.prompts", ValueKind::kPath, "", "prompt templates (defaults to <paths.assets>/prompts)"},
      {"paths.runs", ValueKind::kPath, "runs", "where run directories are written"},
      {"paths.bug_db", ValueKind::kPath, "bugs.ndjson", "bug database file"},
      {"batch.parallelism", ValueKind::kInt, "2", "concurrent sessions in a batch", 1},
  };
  return keys;
}

std::string env_name(std::string_view key) {
  std::string name = "UXPROBE_";
  for (char c : key) name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

bool parse_bool(std::string_view text, bool& out) {
  std::string v = to_lower(text);
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "no" || v == "off") {
    out = false;
    return true;
  }
  return false;
}

Config Config::defaults() {
  Config c;
  for (const auto& spec : known_keys()) {
    c.entries_[spec.key] = Entry{spec.default_value, "default", fs::current_path()};
  }
  return c;
}

void Config::set(std::string_view key, std::string_view value, std::string_view source, const fs::path& base_dir) {
  const KeySpec* spec = find_key(key);
  if (!spec) {
    if (key.find("api_key") != std::string_view::npos) {
      config_error("'" + std::string(key) + "': credentials are read from the variable named by live.api_key_env");
    }
    config_error("unknown setting '" + std::string(key) + "' (" + std::string(source) + ")");
  }
  std::string v = trim(value);
  std::string where = std::string(key) + " (" + std::string(source) + ")";
  switch (spec->kind) {
    case ValueKind::kInt: {
      long n = 0;
      if (!parse_long(v, n)) config_error(where + ": '" + v + "' is not an integer");
      if (n < spec->min_value) config_error(where + ": must be at least " + std::to_string(spec->min_value));
      break;
    }
    case ValueKind::kBool: {
      bool b = false;
      if (!parse_bool(v, b)) config_error(where + ": '" + v + "' is not a boolean");
      break;
    }
    case ValueKind::kNumber: {
      double d = 0;
      if (!parse_number(v, d)) config_error(where + ": '" + v + "' is not a number");
      break;
    }
    case ValueKind::kString:
      if (spec->key.starts_with("backend.") && !v.empty() && v != "live" && !v.starts_with("live:") &&
          !(is_scripted(v) && v.size() > 9)) {
        config_error(where + ": expected live, live:<model> or scripted:<file>, got '" + v + "'");
      }
      break;
    case ValueKind::kPath: break;
  }
  entries_[spec->key] = Entry{v, std::string(source), base_dir.empty() ? fs::current_path() : base_dir};
}

void Config::set_assignment(std::string_view assignment, std::string_view source) {
  auto eq = assignment.find('=');
  if (eq == std::string_view::npos) config_error("expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1), source);
}

void Config::load_file(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    config_error("cannot read config file " + path.string() + ": " + e.what());
  }
  fs::path base = fs::absolute(path).parent_path();
  std::istringstream in(text);
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      config_error(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (auto hash = value.find(" #"); hash != std::string::npos) {
      value = trim(std::string_view(value).substr(0, hash));
    }
    set(key, value, path.filename().string() + ":" + std::to_string(number), base);
  }
}

void Config::apply_env(const std::function<const char*(const char*)>& lookup) {
  for (const auto& spec : known_keys()) {
    std::string name = env_name(spec.key);
    if (const char* value = lookup(name.c_str())) set(spec.key, value, "$" + name);
  }
}

const Config::Entry& Config::entry(std::string_view key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorCode::kConfigError, "unknown setting '" + std::string(key) + "'");
  return it->second;
}

const std::string& Config::get(std::string_view key) const { return entry(key).value; }

long Config::get_int(std::string_view key) const {
  long n = 0;
  if (!parse_long(get(key), n)) config_error(std::string(key) + " is not an integer");
  return n;
}

bool Config::get_bool(std::string_view key) const {
  bool b = false;
  if (!parse_bool(get(key), b)) config_error(std::string(key) + " is not a boolean");
  return b;
}

double Config::get_number(std::string_view key) const {
  double d = 0;
  if (!parse_number(get(key), d)) config_error(std::string(key) + " is not a number");
  return d;
}

fs::path Config::get_path(std::string_view key) const {
  const Entry& e = entry(key);
  if (e.value.empty()) return {};
  fs::path p(e.value);
  return p.is_absolute() ? p : (e.base_dir / p).lexically_normal();
}

std::string Config::get_backend(std::string_view key) const {
  const Entry& e = entry(key);
  if (!is_scripted(e.value)) return e.value;
  fs::path p(e.value.substr(9));
  return "scripted:" + (p.is_absolute() ? p : (e.base_dir / p).lexically_normal()).string();
}

const std::string& Config::source(std::string_view key) const { return entry(key).source; }

std::string Config::describe() const {
  std::ostringstream out;
  for (const auto& spec : known_keys()) {
    const Entry& e = entry(spec.key);
    out << spec.key << " = " << e.value << "  (" << e.source << ")\n";
  }
  return out.str();
}

Config resolve_config(const ConfigInputs& inputs, const std::function<const char*(const char*)>& lookup) {
  Config config = Config::defaults();
  std::optional<fs::path> file = inputs.file;
  if (!file) {
    if (const char* env = lookup("UXPROBE_CONFIG"); env && *env) file = fs::path(env);
  }
  if (file) config.load_file(*file);
  config.apply_env(lookup);
  for (const auto& assignment : inputs.overrides) config.set_assignment(assignment, "command line");
  return config;
}

}  // namespace uxprobe::harness
