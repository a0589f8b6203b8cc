#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "uxprobe/sim/html.hpp"

namespace uxprobe::sim {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

std::optional<Rgb> parse_color(std::string_view text);

enum class Display { kNone, kBlock, kInline, kInlineBlock };

struct Style {
  Display display = Display::kInline;
  bool visible = true;
  Rgb color{0, 0, 0};
  std::optional<Rgb> background;
  double font_px = 16;
  bool underline = false;
  bool preformatted = false;
  bool animated = false;
  std::optional<double> width;
  std::optional<double> height;
};

struct Rect {
  double x = 0, y = 0, width = 0, height = 0;
  bool contains(double px, double py) const { return px >= x && py >= y && px < x + width && py < y + height; }
};

// A loaded document with a deterministic block/inline layout. Coordinates are
// document-relative CSS pixels; scroll_y shifts the viewport.
class Page {
 public:
  Page(std::string url, std::string_view html, int viewport_width, int viewport_height);

  const std::string& url() const { return url_; }
  const std::string& title() const { return title_; }
  Node& document() { return *doc_; }

  void set_viewport(int width, int height);
  // Resolved http(s) URLs of <img src> in document order.
  std::vector<std::string> image_urls() const;
  void mark_broken_image(const std::string& url);
  // Literal messages from console.error(...) in inline scripts.
  std::vector<std::string> script_errors() const;

  // DOMSnapshot.captureSnapshot result for the given computed style names.
  nlohmann::json snapshot(const std::vector<std::string>& styles) const;
  // Deepest painted element under a viewport point; nullptr when none.
  Node* hit_test(double x, double y) const;
  Node* find(int backend_id) const;
  std::optional<Rect> box_of(const Node& node) const;

  void scroll_by(double dy);
  double scroll_y() const { return scroll_y_; }

  // Viewport PNG; `frame` drives animated elements.
  std::vector<std::uint8_t> render_png(int frame) const;

  // Current value of a form control.
  std::string value_of(const Node& node) const;
  void set_value(Node& node, std::string value);

 private:
  void compute_styles(const Node& node, const Style& parent);
  void layout();
  double content_height() const { return content_height_; }

  std::string url_;
  std::string title_;
  std::unique_ptr<Node> doc_;
  int viewport_width_;
  int viewport_height_;
  double scroll_y_ = 0;
  double content_height_ = 0;
  std::set<std::string> broken_images_;

  struct TextRun {
    const Node* node;
    Rect rect;
    std::string text;
  };
  std::map<const Node*, Style> styles_;
  std::map<const Node*, Rect> boxes_;
  std::vector<const Node*> order_;  // nodes with layout, in document order
  std::vector<TextRun> runs_;

  friend class Layouter;
};

std::vector<std::uint8_t> encode_png(int width, int height, const std::vector<std::uint8_t>& rgb);

}  // namespace uxprobe::sim
