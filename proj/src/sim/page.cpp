#include "uxprobe/sim/page.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <regex>
#include <sstream>

#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/url.hpp"

namespace uxprobe::sim {
namespace {

using nlohmann::json;

constexpr std::array kHiddenTags = {"head", "script", "style", "title", "meta", "link", "base", "template", "noscript"};
constexpr std::array kBlockTags = {"html",   "body",    "div",  "p",     "h1",      "h2",     "h3",     "h4",
                                   "h5",     "h6",      "ul",   "ol",    "li",      "section", "article", "header",
                                   "footer", "nav",     "main", "form",  "table",   "tr",     "tbody",  "thead",
                                   "pre",    "blockquote", "hr", "figure", "figcaption", "dl", "dt",   "dd",
                                   "aside",  "address", "details", "fieldset", "center", "summary"};
constexpr std::array kReplacedTags = {"img", "input", "button", "select", "textarea"};

template <std::size_t N>
bool one_of(std::string_view name, const std::array<const char*, N>& set) {
  return std::any_of(set.begin(), set.end(), [&](const char* s) { return name == s; });
}

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::optional<double> parse_px(std::string_view text) {
  std::string t = trim(text);
  if (t.ends_with("px")) t.resize(t.size() - 2);
  try {
    std::size_t used = 0;
    double v = std::stod(t, &used);
    if (used == t.size() && v >= 0) return v;
  } catch (...) {
  }
  return std::nullopt;
}

std::string to_upper_ascii(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string input_type(const Node& n) { return to_lower(trim(n.attr("type").value_or("text"))); }

Rgb animation_color(int frame) {
  static constexpr std::array<Rgb, 6> kCycle = {
      Rgb{230, 60, 60}, Rgb{230, 160, 40}, Rgb{200, 200, 40}, Rgb{60, 180, 80}, Rgb{50, 120, 220}, Rgb{150, 70, 200}};
  return kCycle[static_cast<std::size_t>(frame) % kCycle.size()];
}

}  // namespace

std::optional<Rgb> parse_color(std::string_view text) {
  std::string t = to_lower(trim(text));
  static const std::map<std::string, Rgb, std::less<>> kNamed = {
      {"black", {0, 0, 0}},         {"white", {255, 255, 255}},   {"red", {255, 0, 0}},
      {"green", {0, 128, 0}},       {"blue", {0, 0, 255}},        {"gray", {128, 128, 128}},
      {"grey", {128, 128, 128}},    {"silver", {192, 192, 192}},  {"lightgray", {211, 211, 211}},
      {"lightgrey", {211, 211, 211}}, {"yellow", {255, 255, 0}},  {"orange", {255, 165, 0}},
      {"navy", {0, 0, 128}},        {"whitesmoke", {245, 245, 245}}, {"gainsboro", {220, 220, 220}},
      {"ivory", {255, 255, 240}},   {"beige", {245, 245, 220}},   {"purple", {128, 0, 128}}};
  if (auto it = kNamed.find(t); it != kNamed.end()) return it->second;
  auto hex = [](std::string_view h) { return static_cast<std::uint8_t>(std::stoi(std::string(h), nullptr, 16)); };
  try {
    if (t.size() == 4 && t[0] == '#') {
      return Rgb{static_cast<std::uint8_t>(hex(t.substr(1, 1)) * 17), static_cast<std::uint8_t>(hex(t.substr(2, 1)) * 17),
                 static_cast<std::uint8_t>(hex(t.substr(3, 1)) * 17)};
    }
    if (t.size() == 7 && t[0] == '#') return Rgb{hex(t.substr(1, 2)), hex(t.substr(3, 2)), hex(t.substr(5, 2))};
    std::smatch m;
    static const std::regex kRgb(R"(rgba?\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+).*\))");
    if (std::regex_match(t, m, kRgb)) {
      auto c = [&](int i) { return static_cast<std::uint8_t>(std::min(255, std::stoi(m[i].str()))); };
      return Rgb{c(1), c(2), c(3)};
    }
  } catch (...) {
  }
  return std::nullopt;
}

class Layouter {
 public:
  explicit Layouter(Page& page) : p_(page) {}

  struct Flow {
    double left, right, y, x, line_h;
    void newline() {
      y += line_h;
      x = left;
      line_h = 0;
    }
  };

  void run() {
    Node& html = *p_.doc_->children.front();
    Flow flow{0, static_cast<double>(p_.viewport_width_), 0, 0, 0};
    place(html, flow);
    flow.newline();
    p_.content_height_ = std::max(flow.y, static_cast<double>(p_.viewport_height_));
    p_.boxes_[&html] = {0, 0, static_cast<double>(p_.viewport_width_), p_.content_height_};
    union_inline_boxes(*p_.doc_);
    p_.order_.clear();
    walk(static_cast<const Node&>(*p_.doc_), [&](const Node& n) {
      if (p_.boxes_.contains(&n)) p_.order_.push_back(&n);
    });
  }

 private:
  void add_run(const Node& node, Rect rect, std::string text) {
    p_.runs_.push_back({&node, rect, std::move(text)});
    extend(node, rect);
  }

  void extend(const Node& node, const Rect& r) {
    auto [it, fresh] = p_.boxes_.try_emplace(&node, r);
    if (fresh) return;
    Rect& b = it->second;
    double x1 = std::min(b.x, r.x), y1 = std::min(b.y, r.y);
    double x2 = std::max(b.x + b.width, r.x + r.width), y2 = std::max(b.y + b.height, r.y + r.height);
    b = {x1, y1, x2 - x1, y2 - y1};
  }

  // Inline elements take the union of their descendants' boxes.
  std::optional<Rect> union_inline_boxes(const Node& node) {
    std::optional<Rect> acc;
    if (auto it = p_.boxes_.find(&node); it != p_.boxes_.end()) acc = it->second;
    for (const auto& child : node.children) {
      auto r = union_inline_boxes(*child);
      if (!r) continue;
      auto st = p_.styles_.find(&node);
      bool is_inline = node.type == Node::Type::kElement && st != p_.styles_.end() &&
                       st->second.display == Display::kInline;
      if (is_inline) {
        extend(node, *r);
        acc = p_.boxes_[&node];
      }
    }
    return acc;
  }

  void text(const Node& node, Flow& f) {
    const Style& st = p_.styles_.at(&node);
    double cw = st.font_px * 0.5;
    double lh = st.font_px * 1.25;
    if (st.preformatted) {
      std::istringstream lines(node.text);
      std::string line;
      bool first = true;
      while (std::getline(lines, line)) {
        if (!first) {
          f.line_h = std::max(f.line_h, lh);
          f.newline();
        }
        first = false;
        if (!line.empty()) {
          double w = cw * static_cast<double>(utf8_length(line));
          add_run(node, {f.x, f.y, w, lh}, line);
          f.x += w;
          f.line_h = std::max(f.line_h, lh);
        }
      }
      if (!node.text.empty() && node.text.back() == '\n') {
        f.line_h = std::max(f.line_h, lh);
        f.newline();
      }
      return;
    }
    bool leading = !node.text.empty() && std::isspace(static_cast<unsigned char>(node.text.front()));
    std::string collapsed = collapse_whitespace(node.text);
    if (leading && f.x > f.left) f.x += cw;
    if (collapsed.empty()) return;
    std::istringstream words(collapsed);
    std::string word;
    bool first = true;
    while (words >> word) {
      if (!first) f.x += cw;
      first = false;
      double w = cw * static_cast<double>(utf8_length(word));
      if (f.x + w > f.right && f.x > f.left) f.newline();
      add_run(node, {f.x, f.y, w, lh}, word);
      f.x += w;
      f.line_h = std::max(f.line_h, lh);
    }
    if (std::isspace(static_cast<unsigned char>(node.text.back()))) f.x += cw;
  }

  std::pair<double, double> replaced_size(const Node& n, const Style& st) {
    if (n.name == "img") {
      bool broken = p_.broken_images_.contains(resolve_http_url(p_.url_, n.attr("src").value_or("")).value_or(""));
      std::optional<double> w = st.width ? st.width : parse_px(n.attr("width").value_or(""));
      std::optional<double> h = st.height ? st.height : parse_px(n.attr("height").value_or(""));
      if (broken && !w && !h) {
        double alt = static_cast<double>(utf8_length(n.attr("alt").value_or("")));
        return {alt > 0 ? 20 + alt * 8 : 16, alt > 0 ? 20 : 16};
      }
      return {w.value_or(100), h.value_or(60)};
    }
    if (n.name == "input") {
      std::string type = input_type(n);
      if (type == "checkbox" || type == "radio") return {13, 13};
      if (type == "submit" || type == "button" || type == "reset") {
        std::string label = n.attr("value").value_or(type == "reset" ? "Reset" : "Submit");
        return {static_cast<double>(utf8_length(label)) * 8 + 16, 24};
      }
      return {st.width.value_or(200), 22};
    }
    if (n.name == "select") return {st.width.value_or(150), 22};
    if (n.name == "textarea") return {st.width.value_or(300), st.height.value_or(60)};
    std::string label;
    walk(n, [&](const Node& d) {
      if (d.type == Node::Type::kText) label += d.text + " ";
    });
    return {st.width.value_or(static_cast<double>(utf8_length(collapse_whitespace(label))) * 8 + 16),
            st.height.value_or(24)};
  }

  void place(const Node& node, Flow& f) {
    if (node.type == Node::Type::kText) {
      text(node, f);
      return;
    }
    const auto it = p_.styles_.find(&node);
    if (it == p_.styles_.end() || it->second.display == Display::kNone) return;
    const Style& st = it->second;
    if (node.name == "br") {
      f.line_h = std::max(f.line_h, st.font_px * 1.25);
      f.newline();
      return;
    }
    if (st.display == Display::kBlock) {
      f.newline();
      bool spaced = node.name == "p" || node.name == "ul" || node.name == "ol" || node.name == "pre" ||
                    node.name == "blockquote" || node.name == "dl" || node.name == "figure" ||
                    (node.name.size() == 2 && node.name[0] == 'h' && std::isdigit(static_cast<unsigned char>(node.name[1])));
      double margin = spaced ? std::round(st.font_px * 0.75) : 0;
      if (node.name == "hr") margin = 8;
      double pad = node.name == "body" ? 8 : 0;
      double indent = (node.name == "ul" || node.name == "ol" || node.name == "blockquote" || node.name == "dd") ? 40 : 0;
      double y0 = f.y + margin;
      double width = st.width.value_or(f.right - f.left);
      Flow inner{f.left + pad + indent, f.left + width - pad, y0 + pad, f.left + pad + indent, 0};
      for (const auto& child : node.children) place(*child, inner);
      inner.newline();
      double h = inner.y - y0 + pad;
      if (node.name == "hr") h = 2;
      if (st.height) h = *st.height;
      p_.boxes_[&node] = {f.left, y0, width, h};
      f.y = y0 + h + margin;
      f.x = f.left;
      f.line_h = 0;
      return;
    }
    if (st.display == Display::kInlineBlock) {
      auto [w, h] = replaced_size(node, st);
      if (f.x + w > f.right && f.x > f.left) f.newline();
      Rect rect{f.x, f.y, w, h};
      p_.boxes_[&node] = rect;
      if (node.name == "button") {
        Flow inner{rect.x + 8, rect.x + w, rect.y + 4, rect.x + 8, 0};
        for (const auto& child : node.children) place(*child, inner);
      }
      f.x += w;
      f.line_h = std::max(f.line_h, h);
      return;
    }
    for (const auto& child : node.children) place(*child, f);
  }

  Page& p_;
};

Page::Page(std::string url, std::string_view html, int viewport_width, int viewport_height)
    : url_(std::move(url)), doc_(parse_html(html)), viewport_width_(viewport_width), viewport_height_(viewport_height) {
  walk(static_cast<const Node&>(*doc_), [&](const Node& n) {
    if (n.is("title") && title_.empty()) title_ = collapse_whitespace(n.text);
  });
  Style root;
  root.display = Display::kBlock;
  compute_styles(*doc_, root);
  layout();
}

void Page::compute_styles(const Node& node, const Style& parent) {
  Style st;
  st.visible = parent.visible;
  st.color = parent.color;
  st.font_px = parent.font_px;
  st.underline = parent.underline;
  st.preformatted = parent.preformatted;
  if (node.type == Node::Type::kText) {
    st.display = Display::kInline;
    styles_[&node] = st;
    return;
  }
  if (node.type == Node::Type::kElement) {
    const std::string& tag = node.name;
    if (one_of(tag, kHiddenTags)) {
      st.display = Display::kNone;
    } else if (one_of(tag, kBlockTags)) {
      st.display = Display::kBlock;
    } else if (one_of(tag, kReplacedTags)) {
      st.display = Display::kInlineBlock;
    }
    if (tag == "h1") st.font_px = 32;
    if (tag == "h2") st.font_px = 24;
    if (tag == "h3") st.font_px = 20;
    if (tag == "small") st.font_px = 13;
    if (tag == "code" || tag == "pre" || tag == "kbd" || tag == "samp") st.font_px = 14;
    if (tag == "pre") st.preformatted = true;
    if (tag == "a" && node.attr("href")) {
      st.color = {0, 0, 238};
      st.underline = true;
    }
    if (node.attr("hidden") || (tag == "input" && input_type(node) == "hidden")) st.display = Display::kNone;
    if (auto cls = node.attr("class")) {
      std::string c = " " + *cls + " ";
      if (c.find(" animated ") != std::string::npos || c.find(" spinner ") != std::string::npos) st.animated = true;
    }
    if (auto inline_style = node.attr("style")) {
      std::istringstream decls(*inline_style);
      std::string decl;
      while (std::getline(decls, decl, ';')) {
        auto colon = decl.find(':');
        if (colon == std::string::npos) continue;
        std::string key = to_lower(trim(std::string_view(decl).substr(0, colon)));
        std::string value = to_lower(trim(std::string_view(decl).substr(colon + 1)));
        if (key == "display") {
          if (value == "none") st.display = Display::kNone;
          if (value == "block") st.display = Display::kBlock;
          if (value == "inline") st.display = Display::kInline;
          if (value == "inline-block") st.display = Display::kInlineBlock;
        } else if (key == "visibility") {
          st.visible = value == "visible";
        } else if (key == "color") {
          if (auto c = parse_color(value)) st.color = *c;
        } else if (key == "background" || key == "background-color") {
          std::string first = value.substr(0, value.find(' '));
          if (value.starts_with("rgb")) first = value;
          if (auto c = parse_color(first)) st.background = *c;
        } else if (key == "font-size") {
          if (auto px = parse_px(value)) st.font_px = *px;
        } else if (key == "width") {
          st.width = parse_px(value);
        } else if (key == "height") {
          st.height = parse_px(value);
        } else if (key == "animation" || key == "animation-name") {
          st.animated = value != "none";
        } else if (key == "text-decoration") {
          st.underline = value.find("underline") != std::string::npos;
        }
      }
    }
  } else {
    st.display = Display::kBlock;
  }
  styles_[&node] = st;
  if (st.display == Display::kNone) return;
  for (const auto& child : node.children) compute_styles(*child, st);
}

void Page::layout() {
  boxes_.clear();
  runs_.clear();
  Layouter(*this).run();
  scroll_by(0);
}

void Page::set_viewport(int width, int height) {
  if (width == viewport_width_ && height == viewport_height_) return;
  viewport_width_ = width;
  viewport_height_ = height;
  layout();
}

std::vector<std::string> Page::image_urls() const {
  std::vector<std::string> urls;
  walk(static_cast<const Node&>(*doc_), [&](const Node& n) {
    if (n.is("img") && styles_.contains(&n)) {
      if (auto resolved = resolve_http_url(url_, n.attr("src").value_or(""))) urls.push_back(*resolved);
    }
  });
  return urls;
}

void Page::mark_broken_image(const std::string& url) {
  if (broken_images_.insert(url).second) layout();
}

std::vector<std::string> Page::script_errors() const {
  static const std::regex kConsoleError(R"re(console\.error\(\s*(['"])(.*?)\1\s*\))re");
  static const std::regex kThrow(R"re(throw\s+new\s+(\w*Error)\(\s*(['"])(.*?)\2\s*\))re");
  std::vector<std::string> out;
  walk(static_cast<const Node&>(*doc_), [&](const Node& n) {
    if (!n.is("script")) return;
    for (std::sregex_iterator it(n.text.begin(), n.text.end(), kConsoleError), end; it != end; ++it) {
      out.push_back((*it)[2].str());
    }
    for (std::sregex_iterator it(n.text.begin(), n.text.end(), kThrow), end; it != end; ++it) {
      out.push_back("Uncaught " + (*it)[1].str() + ": " + (*it)[3].str());
    }
  });
  return out;
}

Node* Page::find(int backend_id) const {
  Node* found = nullptr;
  walk(*doc_, [&](Node& n) {
    if (n.backend_id == backend_id) found = &n;
  });
  return found;
}

std::optional<Rect> Page::box_of(const Node& node) const {
  auto it = boxes_.find(&node);
  if (it == boxes_.end()) return std::nullopt;
  return it->second;
}

Node* Page::hit_test(double x, double y) const {
  double dy = y + scroll_y_;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const Node* n = *it;
    if (n->type != Node::Type::kElement || !styles_.at(n).visible) continue;
    if (boxes_.at(n).contains(x, dy)) return const_cast<Node*>(n);
  }
  return nullptr;
}

void Page::scroll_by(double dy) {
  double max_scroll = std::max(0.0, content_height_ - viewport_height_);
  scroll_y_ = std::clamp(scroll_y_ + dy, 0.0, max_scroll);
}

std::string Page::value_of(const Node& node) const {
  if (node.is("textarea")) return node.attr("value").value_or(node.text);
  if (node.is("select")) {
    std::string first;
    for (const auto& child : node.children) {
      if (!child->is("option")) continue;
      std::string text = collapse_whitespace(child->children.empty() ? "" : child->children.front()->text);
      std::string value = child->attr("value").value_or(text);
      if (child->attr("selected")) return value;
      if (first.empty()) first = value;
    }
    return first;
  }
  return node.attr("value").value_or("");
}

void Page::set_value(Node& node, std::string value) { node.set_attr("value", std::move(value)); }

json Page::snapshot(const std::vector<std::string>& style_names) const {
  std::vector<std::string> strings;
  std::map<std::string, int, std::less<>> interned;
  auto intern = [&](std::string_view s) {
    auto it = interned.find(s);
    if (it != interned.end()) return it->second;
    int idx = static_cast<int>(strings.size());
    strings.emplace_back(s);
    interned.emplace(std::string(s), idx);
    return idx;
  };

  json parent_index = json::array(), node_type = json::array(), node_name = json::array(),
       node_value = json::array(), backend = json::array(), attributes = json::array();
  json input_idx = json::array(), input_val = json::array(), checked = json::array();
  json layout_nodes = json::array(), layout_styles = json::array(), layout_bounds = json::array(),
       layout_text = json::array();

  std::map<const Node*, int> index_of;
  walk(static_cast<const Node&>(*doc_), [&](const Node& n) {
    int idx = static_cast<int>(index_of.size());
    index_of[&n] = idx;
    parent_index.push_back(n.parent ? index_of.at(n.parent) : -1);
    node_type.push_back(n.type == Node::Type::kDocument ? 9 : n.type == Node::Type::kText ? 3 : 1);
    node_name.push_back(intern(n.type == Node::Type::kElement ? to_upper_ascii(n.name) : n.name));
    node_value.push_back(n.type == Node::Type::kText ? intern(n.text) : -1);
    backend.push_back(n.backend_id);
    json attrs = json::array();
    for (const auto& [k, v] : n.attributes) {
      attrs.push_back(intern(k));
      attrs.push_back(intern(v));
    }
    attributes.push_back(attrs);
    if (n.is("input") || n.is("textarea") || n.is("select")) {
      input_idx.push_back(idx);
      input_val.push_back(intern(value_of(n)));
      if (n.attr("checked")) checked.push_back(idx);
    }
    auto box = boxes_.find(&n);
    if (box == boxes_.end()) return;
    layout_nodes.push_back(idx);
    const Style& st = styles_.at(&n);
    json values = json::array();
    for (const auto& name : style_names) {
      std::string v;
      if (name == "display") {
        v = st.display == Display::kBlock ? "block" : st.display == Display::kInlineBlock ? "inline-block" : "inline";
      } else if (name == "visibility") {
        v = st.visible ? "visible" : "hidden";
      }
      values.push_back(intern(v));
    }
    layout_styles.push_back(values);
    const Rect& r = box->second;
    layout_bounds.push_back({r.x, r.y, r.width, r.height});
    layout_text.push_back(n.type == Node::Type::kText ? intern(n.text) : -1);
  });

  json doc = {{"documentURL", intern(url_)},
              {"baseURL", intern(url_)},
              {"title", intern(title_)},
              {"frameId", intern("")},
              {"nodes",
               {{"parentIndex", parent_index},
                {"nodeType", node_type},
                {"nodeName", node_name},
                {"nodeValue", node_value},
                {"backendNodeId", backend},
                {"attributes", attributes},
                {"inputValue", {{"index", input_idx}, {"value", input_val}}},
                {"inputChecked", {{"index", checked}}}}},
              {"layout", {{"nodeIndex", layout_nodes}, {"styles", layout_styles}, {"bounds", layout_bounds}, {"text", layout_text}}},
              {"textBoxes", {{"layoutIndex", json::array()}, {"bounds", json::array()}, {"start", json::array()}, {"length", json::array()}}},
              {"scrollOffsetX", 0},
              {"scrollOffsetY", scroll_y_},
              {"contentWidth", viewport_width_},
              {"contentHeight", content_height_}};
  return {{"documents", json::array({doc})}, {"strings", strings}};
}

namespace {

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3, 255) {}

  void fill(double x, double y, double w, double h, Rgb c) {
    int x0 = std::max(0, static_cast<int>(std::floor(x))), y0 = std::max(0, static_cast<int>(std::floor(y)));
    int x1 = std::min(w_, static_cast<int>(std::ceil(x + w))), y1 = std::min(h_, static_cast<int>(std::ceil(y + h)));
    for (int yy = y0; yy < y1; ++yy) {
      for (int xx = x0; xx < x1; ++xx) {
        std::size_t at = (static_cast<std::size_t>(yy) * w_ + xx) * 3;
        px_[at] = c.r;
        px_[at + 1] = c.g;
        px_[at + 2] = c.b;
      }
    }
  }

  void border(double x, double y, double w, double h, Rgb c) {
    fill(x, y, w, 1, c);
    fill(x, y + h - 1, w, 1, c);
    fill(x, y, 1, h, c);
    fill(x + w - 1, y, 1, h, c);
  }

  // Blocky deterministic glyphs: a 5x7 pattern hashed from each code point.
  void text(std::string_view s, double x, double y, double font_px, Rgb c, bool underline) {
    double cw = font_px * 0.5;
    double cell_w = cw / 6, cell_h = font_px * 0.8 / 7;
    double cx = x;
    for (std::size_t i = 0; i < s.size();) {
      auto lead = static_cast<unsigned char>(s[i]);
      std::size_t len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xE ? 3 : 4;
      std::uint32_t cp = 2166136261u;
      for (std::size_t k = i; k < std::min(s.size(), i + len); ++k) cp = (cp ^ static_cast<unsigned char>(s[k])) * 16777619u;
      i += len;
      if (lead != ' ') {
        std::uint64_t bits = (static_cast<std::uint64_t>(cp) << 3) ^ (cp * 2654435761u) ^ 0x1Fu;
        for (int r = 0; r < 7; ++r) {
          for (int col = 0; col < 5; ++col) {
            if ((bits >> (r * 5 + col)) & 1u) fill(cx + cell_w * (col + 0.5), y + font_px * 0.15 + cell_h * r, cell_w, cell_h, c);
          }
        }
      }
      cx += cw;
    }
    if (underline) fill(x, y + font_px * 1.1, cx - x, 1, c);
  }

  const std::vector<std::uint8_t>& pixels() const { return px_; }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

}  // namespace

std::vector<std::uint8_t> Page::render_png(int frame) const {
  Canvas canvas(viewport_width_, viewport_height_);
  const Rgb kBorder{118, 118, 118};
  double sy = scroll_y_;
  for (const Node* n : order_) {
    const Style& st = styles_.at(n);
    if (!st.visible || n->type != Node::Type::kElement) continue;
    Rect r = boxes_.at(n);
    r.y -= sy;
    if (r.y > viewport_height_ || r.y + r.height < 0) continue;
    if (st.animated) {
      canvas.fill(r.x, r.y, r.width, r.height, animation_color(frame));
    } else if (st.background) {
      canvas.fill(r.x, r.y, r.width, r.height, *st.background);
    }
    if (n->name == "img") {
      std::string src = resolve_http_url(url_, n->attr("src").value_or("")).value_or("");
      if (broken_images_.contains(src)) {
        canvas.border(r.x, r.y, r.width, r.height, {160, 160, 160});
        canvas.text(n->attr("alt").value_or(""), r.x + 18, r.y + 2, 14, {80, 80, 80}, false);
      } else if (!st.animated) {
        // Colour from the attribute, not the resolved URL, so the pixels do
        // not depend on which port served the page.
        std::uint32_t h = 2166136261u;
        for (char c : n->attr("src").value_or("")) h = (h ^ static_cast<unsigned char>(c)) * 16777619u;
        canvas.fill(r.x, r.y, r.width, r.height, {static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8),
                                                  static_cast<std::uint8_t>(h >> 16)});
      }
    } else if (n->name == "input" || n->name == "textarea" || n->name == "select") {
      std::string type = input_type(*n);
      if (n->name == "input" && (type == "submit" || type == "button" || type == "reset")) {
        canvas.fill(r.x, r.y, r.width, r.height, {233, 233, 237});
        canvas.border(r.x, r.y, r.width, r.height, kBorder);
        canvas.text(n->attr("value").value_or(type == "reset" ? "Reset" : "Submit"), r.x + 8, r.y + 4, 16, {0, 0, 0}, false);
      } else if (n->name == "input" && (type == "checkbox" || type == "radio")) {
        canvas.fill(r.x, r.y, r.width, r.height, {255, 255, 255});
        canvas.border(r.x, r.y, r.width, r.height, kBorder);
        if (n->attr("checked")) canvas.fill(r.x + 3, r.y + 3, r.width - 6, r.height - 6, {0, 117, 255});
      } else {
        canvas.fill(r.x, r.y, r.width, r.height, st.background.value_or(Rgb{255, 255, 255}));
        canvas.border(r.x, r.y, r.width, r.height, kBorder);
        std::string value = value_of(*n);
        if (value.empty()) {
          canvas.text(n->attr("placeholder").value_or(""), r.x + 4, r.y + 3, 14, {117, 117, 117}, false);
        } else {
          canvas.text(value, r.x + 4, r.y + 3, 14, st.color, false);
        }
      }
    } else if (n->name == "button") {
      if (!st.background && !st.animated) canvas.fill(r.x, r.y, r.width, r.height, {233, 233, 237});
      canvas.border(r.x, r.y, r.width, r.height, kBorder);
    } else if (n->name == "hr") {
      canvas.fill(r.x, r.y, r.width, r.height, {200, 200, 200});
    }
  }
  for (const auto& run : runs_) {
    const Style& st = styles_.at(run.node);
    if (!st.visible) continue;
    canvas.text(run.text, run.rect.x, run.rect.y - sy, st.font_px, st.color, st.underline);
  }
  return encode_png(viewport_width_, viewport_height_, canvas.pixels());
}

std::vector<std::uint8_t> encode_png(int width, int height, const std::vector<std::uint8_t>& rgb) {
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(height) * (width * 3 + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    auto row = rgb.begin() + static_cast<std::ptrdiff_t>(y) * width * 3;
    raw.insert(raw.end(), row, row + width * 3);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 6);
  packed.resize(packed_size);

  std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  auto put32 = [&](std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) png.push_back(static_cast<std::uint8_t>(v >> shift));
  };
  auto chunk = [&](const char* type, const std::vector<std::uint8_t>& data) {
    put32(static_cast<std::uint32_t>(data.size()));
    std::size_t start = png.size();
    png.insert(png.end(), type, type + 4);
    png.insert(png.end(), data.begin(), data.end());
    put32(static_cast<std::uint32_t>(crc32(0, png.data() + start, static_cast<uInt>(png.size() - start))));
  };
  std::vector<std::uint8_t> ihdr;
  for (std::uint32_t v : {static_cast<std::uint32_t>(width), static_cast<std::uint32_t>(height)}) {
    for (int shift = 24; shift >= 0; shift -= 8) ihdr.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
  chunk("IHDR", ihdr);
  chunk("IDAT", packed);
  chunk("IEND", {});
  return png;
}

}  // namespace uxprobe::sim
