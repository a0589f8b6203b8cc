#pragma once

#include "json.hpp"
#include "uxprobe/browser/types.hpp"

namespace uxprobe::browser {

// Computed styles requested with DOMSnapshot.captureSnapshot, in the order
// elements_from_snapshot expects them.
inline constexpr const char* kSnapshotStyles[] = {"display", "visibility"};

// Builds the element map from a DOMSnapshot.captureSnapshot result (main
// document only). An element is kept when it is interactive, rendered, not
// visibility:hidden and its box intersects the viewport.
ElementMap elements_from_snapshot(const nlohmann::json& snapshot, int viewport_width, int viewport_height,
                                  int captured_at);

}  // namespace uxprobe::browser
