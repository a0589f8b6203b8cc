#include "uxprobe/common/url.hpp"

#include <charconv>
#include <vector>

#include "uxprobe/common/encoding.hpp"

namespace uxprobe {
namespace {

bool is_scheme_char(char c, bool first) {
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return true;
  if (first) return false;
  return (c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.';
}

// RFC 3986 section 5.2.4.
std::string remove_dot_segments(std::string_view path) {
  std::vector<std::string> out;
  bool absolute = !path.empty() && path.front() == '/';
  bool trailing_slash = false;
  std::size_t pos = absolute ? 1 : 0;
  while (pos <= path.size()) {
    std::size_t next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    std::string_view segment = path.substr(pos, next - pos);
    bool last = next == path.size();
    if (segment == ".") {
      trailing_slash = last;
    } else if (segment == "..") {
      if (!out.empty()) out.pop_back();
      trailing_slash = last;
    } else {
      out.emplace_back(segment);
      trailing_slash = false;
    }
    pos = next + 1;
  }
  std::string result = absolute ? "/" : "";
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i > 0) result += '/';
    result += out[i];
  }
  if (trailing_slash && (result.empty() || result.back() != '/')) result += '/';
  return result;
}

std::string merge_paths(const Url& base, std::string_view ref_path) {
  if (!base.host.empty() && base.path.empty()) return "/" + std::string(ref_path);
  auto slash = base.path.rfind('/');
  if (slash == std::string::npos) return std::string(ref_path);
  return base.path.substr(0, slash + 1) + std::string(ref_path);
}

}  // namespace

std::optional<Url> Url::parse(std::string_view text) {
  std::string trimmed = trim(text);
  std::string_view s = trimmed;
  std::size_t colon = s.find(':');
  if (colon == std::string_view::npos || colon == 0) return std::nullopt;
  for (std::size_t i = 0; i < colon; ++i) {
    if (!is_scheme_char(s[i], i == 0)) return std::nullopt;
  }
  Url url;
  url.scheme = to_lower(s.substr(0, colon));
  std::string_view rest = s.substr(colon + 1);

  if (auto hash = rest.find('#'); hash != std::string_view::npos) {
    url.fragment = std::string(rest.substr(hash + 1));
    url.has_fragment = true;
    rest = rest.substr(0, hash);
  }
  if (auto q = rest.find('?'); q != std::string_view::npos) {
    url.query = std::string(rest.substr(q + 1));
    url.has_query = true;
    rest = rest.substr(0, q);
  }
  if (rest.starts_with("//")) {
    rest.remove_prefix(2);
    std::size_t slash = rest.find('/');
    std::string_view authority = rest.substr(0, slash);
    rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash);
    if (auto at = authority.rfind('@'); at != std::string_view::npos) {
      authority = authority.substr(at + 1);
    }
    std::string_view host = authority;
    if (!authority.empty() && authority.front() == '[') {
      auto close = authority.find(']');
      if (close == std::string_view::npos) return std::nullopt;
      host = authority.substr(0, close + 1);
      authority = authority.substr(close + 1);
      if (!authority.empty() && authority.front() != ':') return std::nullopt;
    } else {
      auto port_colon = authority.rfind(':');
      host = authority.substr(0, port_colon);
      authority = port_colon == std::string_view::npos ? std::string_view{} : authority.substr(port_colon);
    }
    if (authority.size() > 1) {
      std::string_view digits = authority.substr(1);
      int port = 0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
      if (ec != std::errc{} || ptr != digits.data() + digits.size() || port <= 0 || port > 65535) {
        return std::nullopt;
      }
      url.port = port;
    }
    url.host = to_lower(host);
    url.path = rest.empty() ? "/" : std::string(rest);
  } else {
    url.path = std::string(rest);
  }
  for (char c : url.host) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return std::nullopt;
  }
  return url;
}

int Url::effective_port() const {
  if (port != 0) return port;
  if (scheme == "https" || scheme == "wss") return 443;
  return 80;
}

std::string Url::authority() const {
  return port != 0 ? host + ":" + std::to_string(port) : host;
}

std::string Url::path_and_query() const {
  std::string out = path.empty() ? "/" : path;
  if (has_query) out += "?" + query;
  return out;
}

std::string Url::origin() const {
  return scheme + "://" + authority();
}

std::string Url::to_string() const {
  std::string out = scheme + ":";
  if (!host.empty()) out += "//" + authority();
  out += path;
  if (has_query) out += "?" + query;
  if (has_fragment) out += "#" + fragment;
  return out;
}

bool is_well_formed_http_url(std::string_view text) {
  auto url = Url::parse(text);
  return url && (url->scheme == "http" || url->scheme == "https") && !url->host.empty();
}

std::optional<std::string> resolve_http_url(std::string_view base_text, std::string_view reference) {
  auto base = Url::parse(base_text);
  if (!base) return std::nullopt;
  std::string ref = trim(reference);

  Url target;
  if (auto absolute = Url::parse(ref)) {
    target = *absolute;
    target.path = remove_dot_segments(target.path);
  } else {
    target.scheme = base->scheme;
    std::string_view r = ref;
    std::string fragment;
    bool has_fragment = false;
    if (auto hash = r.find('#'); hash != std::string_view::npos) {
      fragment = std::string(r.substr(hash + 1));
      has_fragment = true;
      r = r.substr(0, hash);
    }
    std::string query;
    bool has_query = false;
    if (auto q = r.find('?'); q != std::string_view::npos) {
      query = std::string(r.substr(q + 1));
      has_query = true;
      r = r.substr(0, q);
    }
    if (r.starts_with("//")) {
      auto reparsed = Url::parse(base->scheme + ":" + ref);
      if (!reparsed) return std::nullopt;
      target = *reparsed;
      target.path = remove_dot_segments(target.path);
    } else {
      target.host = base->host;
      target.port = base->port;
      if (r.empty()) {
        target.path = base->path;
        if (has_query) {
          target.query = query;
          target.has_query = true;
        } else {
          target.query = base->query;
          target.has_query = base->has_query;
        }
      } else {
        target.path = r.front() == '/' ? remove_dot_segments(r) : remove_dot_segments(merge_paths(*base, r));
        target.query = query;
        target.has_query = has_query;
      }
      target.fragment = fragment;
      target.has_fragment = has_fragment;
    }
  }
  if (target.scheme != "http" && target.scheme != "https") return std::nullopt;
  if (target.host.empty()) return std::nullopt;
  if (target.path.empty()) target.path = "/";
  return target.to_string();
}

std::string url_slug(std::string_view text) {
  std::string_view s = text;
  if (auto pos = s.find("://"); pos != std::string_view::npos) s.remove_prefix(pos + 3);
  std::string out;
  bool pending_sep = false;
  for (char c : s) {
    bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-';
    if (keep) {
      if (pending_sep && !out.empty()) out += '_';
      out += c;
      pending_sep = false;
    } else {
      pending_sep = true;
    }
  }
  if (out.empty()) out = "run";
  if (out.size() > 80) out.resize(80);
  return out;
}

}  // namespace uxprobe
