#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace uxprobe::sim {

struct Node {
  enum class Type { kDocument, kElement, kText };

  Type type = Type::kElement;
  std::string name;  // lowercase tag name, "#text" or "#document"
  std::vector<std::pair<std::string, std::string>> attributes;
  std::string text;  // text nodes and raw-text elements (script, style, textarea)
  std::vector<std::unique_ptr<Node>> children;
  Node* parent = nullptr;
  int backend_id = 0;

  std::optional<std::string> attr(std::string_view key) const;
  void set_attr(std::string_view key, std::string value);
  void remove_attr(std::string_view key);
  Node* append(std::unique_ptr<Node> child);
  bool is(std::string_view tag) const { return type == Type::kElement && name == tag; }
  // Nearest ancestor-or-self element with the given tag.
  Node* closest(std::string_view tag);
};

std::string decode_entities(std::string_view text);

// Forgiving HTML parser: never fails, always returns a document whose single
// element child is <html> with <head> and <body>. Backend ids are assigned in
// document order starting at 1.
std::unique_ptr<Node> parse_html(std::string_view html);

// Pre-order walk.
template <typename F>
void walk(Node& node, F&& visit) {
  visit(node);
  for (auto& child : node.children) walk(*child, visit);
}

template <typename F>
void walk(const Node& node, F&& visit) {
  visit(node);
  for (const auto& child : node.children) walk(static_cast<const Node&>(*child), visit);
}

}  // namespace uxprobe::sim
