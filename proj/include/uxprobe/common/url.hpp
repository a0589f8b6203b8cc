#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace uxprobe {

// Minimal RFC 3986 URL handling: enough to validate targets, split
// host/port for socket connects, and resolve hrefs against a base.
struct Url {
  std::string scheme;  // lower-case, without ':'
  std::string host;    // lower-case
  int port = 0;        // 0 when not given explicitly
  std::string path;    // always begins with '/' for hierarchical URLs
  std::string query;   // without '?'
  std::string fragment;
  bool has_query = false;
  bool has_fragment = false;

  static std::optional<Url> parse(std::string_view text);

  int effective_port() const;
  std::string authority() const;          // host[:port]
  std::string path_and_query() const;     // path[?query]
  std::string origin() const;             // scheme://host[:port]
  std::string to_string() const;
};

// True for absolute http(s) URLs with a non-empty host.
bool is_well_formed_http_url(std::string_view text);

// Resolves `reference` against `base`. Returns nullopt when the result is not
// an http(s) URL (javascript:, mailto:, data: and similar).
std::optional<std::string> resolve_http_url(std::string_view base, std::string_view reference);

// Filesystem-safe slug ("http://localhost:8080/site1/" -> "localhost_8080_site1").
std::string url_slug(std::string_view url);

}  // namespace uxprobe
