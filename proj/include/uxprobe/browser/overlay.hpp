#pragma once

#include <filesystem>
#include <string>

#include "uxprobe/browser/session.hpp"

namespace uxprobe::browser {

// Name of the page-global object the overlay script must define. It exposes
// annotate(spec) -> number of badges drawn, and clear().
inline constexpr std::string_view kOverlayRegistry = "__uxprobeOverlay";

struct OverlayStyle {
  int font_px = 12;
  std::string background = "#d0021b";
  std::string text_color = "#ffffff";
};

// Client side of the in-page index overlay. The script itself ships
// separately; this class only evaluates it and calls its registry.
class Overlay {
 public:
  // Errors: kConfigError when the file cannot be read or is empty.
  static Overlay load(const std::filesystem::path& script_path);
  static Overlay from_source(std::string source);

  // {"elements":[{"index":1,"x":..,"y":..,"width":..,"height":..}],"style":{..}}
  static std::string spec_json(const ElementMap& map, const OverlayStyle& style);

  std::string annotate_expression(const ElementMap& map, const OverlayStyle& style) const;
  static std::string clear_expression();

  // Draws index badges; returns the count reported by the script. Throws
  // Error(kScriptEvaluationFailure) when the page refuses the script.
  int annotate(BrowserSession& session, const ElementMap& map, const OverlayStyle& style = {}) const;
  // Best effort; never throws for evaluation failures.
  void clear(BrowserSession& session) const;

  const std::string& source() const { return source_; }

 private:
  explicit Overlay(std::string source) : source_(std::move(source)) {}
  std::string source_;
};

}  // namespace uxprobe::browser
