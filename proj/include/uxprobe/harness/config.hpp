#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uxprobe::harness {

enum class ValueKind { kString, kPath, kInt, kBool, kNumber };

struct KeySpec {
  std::string key;
  ValueKind kind = ValueKind::kString;
  std::string default_value;
  std::string help;
  long min_value = 0;  // kInt only
};

// Every key the harness understands, in display order.
const std::vector<KeySpec>& known_keys();

// "browser.navigation_timeout_ms" -> "UXPROBE_BROWSER_NAVIGATION_TIMEOUT_MS"
std::string env_name(std::string_view key);

// Resolved settings. Later layers win: defaults < file < environment <
// explicit overrides (CLI flags and --set). Every write is validated, so a
// Config never holds an unknown key or a malformed value.
class Config {
 public:
  static Config defaults();

  // `key = value` lines; '#' starts a comment; values may be double-quoted.
  // Relative paths are taken relative to the file's directory.
  // Errors: kConfigError (unreadable file, bad line, unknown key, bad value).
  void load_file(const std::filesystem::path& path);
  void apply_env(const std::function<const char*(const char*)>& lookup);
  // Errors: kConfigError.
  void set(std::string_view key, std::string_view value, std::string_view source,
           const std::filesystem::path& base_dir = {});
  // "key=value"
  void set_assignment(std::string_view assignment, std::string_view source);

  const std::string& get(std::string_view key) const;
  long get_int(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  double get_number(std::string_view key) const;
  // Empty path for an empty value; relative values resolve against the
  // directory of the layer that set them.
  std::filesystem::path get_path(std::string_view key) const;
  // Backend spec with any scripted:<path> made absolute the same way.
  std::string get_backend(std::string_view key) const;
  const std::string& source(std::string_view key) const;

  // One "key = value  (source)" line per key.
  std::string describe() const;

 private:
  struct Entry {
    std::string value;
    std::string source;
    std::filesystem::path base_dir;
  };
  const Entry& entry(std::string_view key) const;
  std::map<std::string, Entry, std::less<>> entries_;
};

struct ConfigInputs {
  std::optional<std::filesystem::path> file;  // falls back to $UXPROBE_CONFIG
  std::vector<std::string> overrides;         // key=value, applied last
};

Config resolve_config(const ConfigInputs& inputs,
                      const std::function<const char*(const char*)>& lookup = [](const char* name) {
                        return std::getenv(name);
                      });

bool parse_bool(std::string_view text, bool& out);

}  // namespace uxprobe::harness
