#include "uxprobe/browser/types.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "uxprobe/common/error.hpp"

namespace uxprobe::browser {

void SessionConfig::validate() const {
  if (viewport_width <= 0 || viewport_height <= 0) {
    throw Error(ErrorCode::kConfigError, "viewport dimensions must be positive");
  }
  if (navigation_timeout.count() <= 0 || action_settle_delay.count() <= 0) {
    throw Error(ErrorCode::kConfigError, "timeouts must be positive");
  }
  if (browser_endpoint.empty()) throw Error(ErrorCode::kConfigError, "browser endpoint is empty");
}

std::string_view to_string(ElementRole role) {
  switch (role) {
    case ElementRole::kLink: return "link";
    case ElementRole::kButton: return "button";
    case ElementRole::kTextInput: return "text-input";
    case ElementRole::kSelect: return "select";
    case ElementRole::kCheckbox: return "checkbox";
    case ElementRole::kOtherInteractive: return "other-interactive";
  }
  return "other-interactive";
}

std::optional<ElementRole> parse_element_role(std::string_view text) {
  for (ElementRole role : {ElementRole::kLink, ElementRole::kButton, ElementRole::kTextInput, ElementRole::kSelect,
                           ElementRole::kCheckbox, ElementRole::kOtherInteractive}) {
    if (text == to_string(role)) return role;
  }
  return std::nullopt;
}

std::string_view to_string(OutcomeStatus status) {
  switch (status) {
    case OutcomeStatus::kOk: return "ok";
    case OutcomeStatus::kElementGone: return "element-gone";
    case OutcomeStatus::kNavigationFailed: return "navigation-failed";
    case OutcomeStatus::kTimeout: return "timeout";
    case OutcomeStatus::kProtocolError: return "protocol-error";
  }
  return "protocol-error";
}

std::optional<OutcomeStatus> parse_outcome_status(std::string_view text) {
  for (OutcomeStatus status : {OutcomeStatus::kOk, OutcomeStatus::kElementGone, OutcomeStatus::kNavigationFailed,
                               OutcomeStatus::kTimeout, OutcomeStatus::kProtocolError}) {
    if (text == to_string(status)) return status;
  }
  return std::nullopt;
}

const ElementEntry* ElementMap::find(int index) const {
  if (index < 1 || static_cast<std::size_t>(index) > entries.size()) return nullptr;
  const ElementEntry& entry = entries[static_cast<std::size_t>(index) - 1];
  return entry.index == index ? &entry : nullptr;
}

std::string ElementMap::describe() const {
  if (entries.empty()) return "(no interactive elements visible)\n";
  std::ostringstream out;
  for (const auto& e : entries) {
    out << '[' << e.index << "] " << to_string(e.role) << ' ' << nlohmann::json(e.label).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    if (e.target_url) out << " -> " << *e.target_url;
    if (!e.value.empty()) out << " value=" << nlohmann::json(e.value).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    if (e.off_screen) out << " (partly off-screen)";
    out << " @(" << std::lround(e.bounding_box.x) << ',' << std::lround(e.bounding_box.y) << ' '
        << std::lround(e.bounding_box.width) << 'x' << std::lround(e.bounding_box.height) << ")\n";
  }
  return out.str();
}

void validate(const ElementMap& map) {
  for (std::size_t i = 0; i < map.entries.size(); ++i) {
    const auto& e = map.entries[i];
    if (e.index != static_cast<int>(i) + 1) throw Error(ErrorCode::kPrecondition, "element indices must be 1..N");
    if (e.label.empty() && e.role != ElementRole::kOtherInteractive) {
      throw Error(ErrorCode::kPrecondition, "element " + std::to_string(e.index) + " has an empty label");
    }
    if (!(e.bounding_box.width > 0) || !(e.bounding_box.height > 0)) {
      throw Error(ErrorCode::kPrecondition, "element " + std::to_string(e.index) + " has a degenerate box");
    }
    if (e.target_url && e.role != ElementRole::kLink) {
      throw Error(ErrorCode::kPrecondition, "only links carry a target url");
    }
  }
}

}  // namespace uxprobe::browser
