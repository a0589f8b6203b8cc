#include "uxprobe/browser/snapshot.hpp"

#include <algorithm>
#include <unordered_map>

#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/url.hpp"

namespace uxprobe::browser {
namespace {

using nlohmann::json;

constexpr std::size_t kMaxLabelLength = 120;
constexpr int kElementNode = 1;
constexpr int kTextNode = 3;

class SnapshotView {
 public:
  explicit SnapshotView(const json& snapshot)
      : strings_(snapshot.at("strings")), doc_(snapshot.at("documents").at(0)), nodes_(doc_.at("nodes")) {
    const json& layout = doc_.at("layout");
    const json& node_index = layout.at("nodeIndex");
    const json& bounds = layout.at("bounds");
    const json& styles = layout.at("styles");
    for (std::size_t i = 0; i < node_index.size(); ++i) {
      layout_of_[node_index[i].get<int>()] = i;
    }
    bounds_ = &bounds;
    styles_ = &styles;
    node_count_ = nodes_.at("parentIndex").size();
    if (auto it = nodes_.find("inputValue"); it != nodes_.end()) {
      const json& idx = it->at("index");
      const json& val = it->at("value");
      for (std::size_t i = 0; i < idx.size(); ++i) input_value_[idx[i].get<int>()] = string_at(val[i].get<int>());
    }
    if (auto it = nodes_.find("inputChecked"); it != nodes_.end()) {
      for (const auto& idx : it->at("index")) checked_.push_back(idx.get<int>());
    }
    subtree_end_.assign(node_count_, 0);
    for (std::size_t i = node_count_; i-- > 0;) {
      subtree_end_[i] = std::max(subtree_end_[i], i + 1);
      int parent = parent_of(i);
      if (parent >= 0 && static_cast<std::size_t>(parent) < node_count_) {
        subtree_end_[parent] = std::max(subtree_end_[parent], subtree_end_[i]);
      }
    }
  }

  std::size_t size() const { return node_count_; }
  int parent_of(std::size_t i) const { return nodes_.at("parentIndex")[i].get<int>(); }
  int node_type(std::size_t i) const { return nodes_.at("nodeType")[i].get<int>(); }
  int backend_id(std::size_t i) const { return nodes_.at("backendNodeId")[i].get<int>(); }
  std::string name(std::size_t i) const { return to_lower(string_at(nodes_.at("nodeName")[i].get<int>())); }
  std::string value(std::size_t i) const {
    auto it = nodes_.find("nodeValue");
    return it == nodes_.end() ? std::string{} : string_at((*it)[i].get<int>());
  }
  std::size_t subtree_end(std::size_t i) const { return subtree_end_[i]; }

  std::optional<std::string> attribute(std::size_t i, std::string_view attr) const {
    auto it = nodes_.find("attributes");
    if (it == nodes_.end()) return std::nullopt;
    const json& list = (*it)[i];
    for (std::size_t k = 0; k + 1 < list.size(); k += 2) {
      if (to_lower(string_at(list[k].get<int>())) == attr) return string_at(list[k + 1].get<int>());
    }
    return std::nullopt;
  }

  bool has_layout(std::size_t i) const { return layout_of_.contains(static_cast<int>(i)); }

  BoundingBox bounds(std::size_t i) const {
    const json& b = (*bounds_)[layout_of_.at(static_cast<int>(i))];
    return {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
  }

  std::string style(std::size_t i, std::size_t which) const {
    const json& s = (*styles_)[layout_of_.at(static_cast<int>(i))];
    if (which >= s.size()) return {};
    return string_at(s[which].get<int>());
  }

  std::string input_value(std::size_t i) const {
    auto it = input_value_.find(static_cast<int>(i));
    return it == input_value_.end() ? std::string{} : it->second;
  }
  bool checked(std::size_t i) const {
    return std::find(checked_.begin(), checked_.end(), static_cast<int>(i)) != checked_.end();
  }

  std::string document_string(std::string_view key) const {
    auto it = doc_.find(key);
    if (it == doc_.end() || !it->is_number_integer()) return {};
    return string_at(it->get<int>());
  }
  double document_number(std::string_view key) const {
    auto it = doc_.find(key);
    return it == doc_.end() || !it->is_number() ? 0.0 : it->get<double>();
  }

  std::string string_at(int idx) const {
    if (idx < 0 || static_cast<std::size_t>(idx) >= strings_.size()) return {};
    return strings_[static_cast<std::size_t>(idx)].get<std::string>();
  }

 private:
  const json& strings_;
  const json& doc_;
  const json& nodes_;
  const json* bounds_ = nullptr;
  const json* styles_ = nullptr;
  std::size_t node_count_ = 0;
  std::unordered_map<int, std::size_t> layout_of_;
  std::unordered_map<int, std::string> input_value_;
  std::vector<int> checked_;
  std::vector<std::size_t> subtree_end_;
};

std::optional<ElementRole> role_for(const SnapshotView& view, std::size_t i) {
  std::string tag = view.name(i);
  if (auto aria = view.attribute(i, "role")) {
    std::string r = to_lower(trim(*aria));
    if (r == "button") return ElementRole::kButton;
    if (r == "link") return ElementRole::kLink;
    if (r == "checkbox" || r == "switch") return ElementRole::kCheckbox;
    if (r == "textbox" || r == "searchbox" || r == "combobox") return ElementRole::kTextInput;
    if (r == "menuitem" || r == "tab" || r == "option" || r == "radio") return ElementRole::kOtherInteractive;
  }
  if (tag == "a" || tag == "area") {
    if (view.attribute(i, "href")) return ElementRole::kLink;
  } else if (tag == "button") {
    return ElementRole::kButton;
  } else if (tag == "input") {
    std::string type = to_lower(trim(view.attribute(i, "type").value_or("text")));
    if (type == "hidden") return std::nullopt;
    if (type == "checkbox") return ElementRole::kCheckbox;
    if (type == "submit" || type == "button" || type == "reset" || type == "image") return ElementRole::kButton;
    if (type == "radio" || type == "file" || type == "range" || type == "color") return ElementRole::kOtherInteractive;
    return ElementRole::kTextInput;
  } else if (tag == "textarea") {
    return ElementRole::kTextInput;
  } else if (tag == "select") {
    return ElementRole::kSelect;
  } else if (tag == "summary") {
    return ElementRole::kOtherInteractive;
  }
  if (view.attribute(i, "onclick")) return ElementRole::kOtherInteractive;
  if (auto editable = view.attribute(i, "contenteditable"); editable && to_lower(*editable) != "false") {
    return ElementRole::kTextInput;
  }
  if (auto tabindex = view.attribute(i, "tabindex")) {
    try {
      if (std::stoi(*tabindex) >= 0) return ElementRole::kOtherInteractive;
    } catch (...) {
    }
  }
  return std::nullopt;
}

std::string rendered_text(const SnapshotView& view, std::size_t i) {
  std::string text;
  std::string alt;
  for (std::size_t k = i + 1; k < view.subtree_end(i); ++k) {
    if (view.node_type(k) == kTextNode && view.has_layout(k)) {
      text += view.value(k);
      text += ' ';
    } else if (alt.empty() && view.node_type(k) == kElementNode && view.name(k) == "img") {
      alt = view.attribute(k, "alt").value_or("");
    }
  }
  std::string collapsed = collapse_whitespace(text);
  return collapsed.empty() ? collapse_whitespace(alt) : collapsed;
}

std::string label_for(const SnapshotView& view, std::size_t i, ElementRole role, const std::optional<std::string>& target) {
  auto attr = [&](std::string_view name) { return collapse_whitespace(view.attribute(i, name).value_or("")); };
  std::string label = attr("aria-label");
  std::string tag = view.name(i);
  if (label.empty() && tag == "input") {
    std::string type = to_lower(view.attribute(i, "type").value_or("text"));
    if (type == "submit" || type == "button" || type == "reset") {
      label = attr("value");
      if (label.empty()) label = type == "reset" ? "Reset" : "Submit";
    } else if (type == "image") {
      label = attr("alt");
    }
  }
  if (label.empty() && (role == ElementRole::kTextInput || role == ElementRole::kSelect)) {
    for (std::string_view name : {"placeholder", "name", "title", "id"}) {
      label = attr(name);
      if (!label.empty()) break;
    }
  }
  if (label.empty() && role != ElementRole::kSelect) label = rendered_text(view, i);
  if (label.empty()) label = attr("title");
  if (label.empty()) {
    switch (role) {
      case ElementRole::kLink: label = target.value_or(attr("href")); break;
      case ElementRole::kButton: label = "button"; break;
      case ElementRole::kTextInput: label = "text input"; break;
      case ElementRole::kSelect: label = "select"; break;
      case ElementRole::kCheckbox: label = "checkbox"; break;
      case ElementRole::kOtherInteractive: break;
    }
  }
  if (label.size() > kMaxLabelLength) {
    label.resize(kMaxLabelLength);
    // Never cut through a UTF-8 sequence.
    while (!label.empty() && (static_cast<unsigned char>(label.back()) & 0xC0) == 0x80) label.pop_back();
    if (!label.empty() && (static_cast<unsigned char>(label.back()) & 0x80) != 0) label.pop_back();
    label += "...";
  }
  return label;
}

}  // namespace

ElementMap elements_from_snapshot(const json& snapshot, int viewport_width, int viewport_height, int captured_at) {
  ElementMap map;
  map.captured_at = captured_at;
  try {
    if (!snapshot.contains("documents") || snapshot["documents"].empty()) return map;
    SnapshotView view(snapshot);
    map.page_url = view.document_string("documentURL");
    std::string base = view.document_string("baseURL");
    if (base.empty()) base = map.page_url;
    double scroll_x = view.document_number("scrollOffsetX");
    double scroll_y = view.document_number("scrollOffsetY");

    for (std::size_t i = 0; i < view.size(); ++i) {
      if (view.node_type(i) != kElementNode || !view.has_layout(i)) continue;
      auto role = role_for(view, i);
      if (!role) continue;
      std::string visibility = to_lower(view.style(i, 1));
      if (visibility == "hidden" || visibility == "collapse" || to_lower(view.style(i, 0)) == "none") continue;

      BoundingBox box = view.bounds(i);
      box.x -= scroll_x;
      box.y -= scroll_y;
      if (!(box.width > 0) || !(box.height > 0)) continue;
      bool intersects = box.x < viewport_width && box.y < viewport_height && box.x + box.width > 0 &&
                        box.y + box.height > 0;
      if (!intersects) continue;

      ElementEntry entry;
      entry.index = static_cast<int>(map.entries.size()) + 1;
      entry.role = *role;
      if (*role == ElementRole::kLink) {
        if (auto href = view.attribute(i, "href")) entry.target_url = resolve_http_url(base, *href);
      }
      entry.label = label_for(view, i, *role, entry.target_url);
      entry.bounding_box = box;
      entry.off_screen = box.x < 0 || box.y < 0 || box.x + box.width > viewport_width ||
                         box.y + box.height > viewport_height;
      if (*role == ElementRole::kCheckbox) {
        entry.value = view.checked(i) ? "checked" : "";
      } else if (*role == ElementRole::kTextInput || *role == ElementRole::kSelect) {
        entry.value = view.input_value(i);
      }
      entry.backend_node_id = view.backend_id(i);
      for (std::size_t k = i; k < view.subtree_end(i); ++k) entry.hit_node_ids.push_back(view.backend_id(k));
      map.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocolError, std::string("malformed DOM snapshot: ") + e.what());
  }
  return map;
}

}  // namespace uxprobe::browser
