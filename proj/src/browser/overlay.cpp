#include "uxprobe/browser/overlay.hpp"

#include "json.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"

namespace uxprobe::browser {

using nlohmann::json;

Overlay Overlay::load(const std::filesystem::path& script_path) {
  std::string source;
  try {
    source = read_text_file(script_path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, "cannot read overlay script: " + std::string(e.what()));
  }
  return from_source(std::move(source));
}

Overlay Overlay::from_source(std::string source) {
  if (source.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "overlay script is empty");
  }
  return Overlay(std::move(source));
}

std::string Overlay::spec_json(const ElementMap& map, const OverlayStyle& style) {
  json elements = json::array();
  for (const auto& e : map.entries) {
    elements.push_back({{"index", e.index},
                        {"x", e.bounding_box.x},
                        {"y", e.bounding_box.y},
                        {"width", e.bounding_box.width},
                        {"height", e.bounding_box.height}});
  }
  json spec = {{"elements", elements},
               {"style",
                {{"fontPx", style.font_px}, {"background", style.background}, {"color", style.text_color}}}};
  return spec.dump();
}

std::string Overlay::annotate_expression(const ElementMap& map, const OverlayStyle& style) const {
  // The script runs inside a function body so repeated injection does not
  // collide on top-level declarations.
  std::string registry(kOverlayRegistry);
  return "(() => {\n" + source_ +
         "\n;const registry = globalThis." + registry +
         ";\nif (!registry || typeof registry.annotate !== 'function') throw new Error('overlay registry " + registry +
         " is missing');\nreturn registry.annotate(" + spec_json(map, style) + ");\n})()";
}

std::string Overlay::clear_expression() {
  std::string registry(kOverlayRegistry);
  return "(() => { const registry = globalThis." + registry +
         "; if (registry && typeof registry.clear === 'function') registry.clear(); return true; })()";
}

int Overlay::annotate(BrowserSession& session, const ElementMap& map, const OverlayStyle& style) const {
  std::string reply = session.evaluate(annotate_expression(map, style));
  json value = json::parse(reply, nullptr, false);
  if (value.is_number_integer()) return value.get<int>();
  if (value.is_number()) return static_cast<int>(value.get<double>());
  return 0;
}

void Overlay::clear(BrowserSession& session) const {
  try {
    session.evaluate(clear_expression());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kScriptEvaluationFailure) throw;
  }
}

}  // namespace uxprobe::browser
