#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uxprobe::browser {

struct SessionConfig {
  // ws://host:port/devtools/browser/<id> or http://host:port (resolved via /json/version).
  std::string browser_endpoint = "http://127.0.0.1:9222";
  int viewport_width = 1280;
  int viewport_height = 1024;
  std::chrono::milliseconds navigation_timeout{15000};
  std::chrono::milliseconds action_settle_delay{500};

  // Throws Error(kConfigError) on non-positive dimensions or timeouts.
  void validate() const;
};

// CSS pixels relative to the viewport at capture time.
struct BoundingBox {
  double x = 0;
  double y = 0;
  double width = 0;
  double height = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class ElementRole { kLink, kButton, kTextInput, kSelect, kCheckbox, kOtherInteractive };
std::string_view to_string(ElementRole role);
std::optional<ElementRole> parse_element_role(std::string_view text);

struct ElementEntry {
  int index = 0;
  ElementRole role = ElementRole::kOtherInteractive;
  std::string label;
  BoundingBox bounding_box;
  std::optional<std::string> target_url;  // links whose href resolves to http(s)
  bool off_screen = false;                // box extends past the viewport
  std::string value;                      // current value of form controls
  int backend_node_id = 0;
  // Backend ids of the element and its descendants; a hit test landing on any
  // of them counts as hitting the element.
  std::vector<int> hit_node_ids;

  friend bool operator==(const ElementEntry&, const ElementEntry&) = default;
};

struct ElementMap {
  std::vector<ElementEntry> entries;
  std::string page_url;
  int captured_at = 0;

  const ElementEntry* find(int index) const;
  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  // Textual listing handed to the model, one element per line.
  std::string describe() const;

  friend bool operator==(const ElementMap&, const ElementMap&) = default;
};

// Throws Error(kPrecondition) if indices are not 1..N or an entry breaks the
// role/label/box rules.
void validate(const ElementMap& map);

enum class OutcomeStatus { kOk, kElementGone, kNavigationFailed, kTimeout, kProtocolError };
std::string_view to_string(OutcomeStatus status);
std::optional<OutcomeStatus> parse_outcome_status(std::string_view text);

struct ActionOutcome {
  OutcomeStatus status = OutcomeStatus::kOk;
  std::string resulting_url;
  std::vector<std::string> console_errors;
  std::string detail;

  bool ok() const { return status == OutcomeStatus::kOk; }
  friend bool operator==(const ActionOutcome&, const ActionOutcome&) = default;
};

}  // namespace uxprobe::browser
