#include "uxprobe/sim/html.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace uxprobe::sim {
namespace {

constexpr std::array kVoid = {"area", "base", "br", "col", "embed", "hr", "img", "input",
                              "link", "meta", "source", "track", "wbr"};
constexpr std::array kRawText = {"script", "style", "textarea", "title"};
constexpr std::array kHeadOnly = {"title", "meta", "link", "base", "style"};
constexpr std::array kClosesParagraph = {"p",  "div", "ul",  "ol",      "h1",      "h2",     "h3",     "h4",
                                         "h5", "h6",  "pre", "table",   "section", "article", "header", "footer",
                                         "nav", "form", "hr", "blockquote", "main", "aside",  "figure", "dl"};

template <std::size_t N>
bool one_of(std::string_view name, const std::array<const char*, N>& set) {
  return std::any_of(set.begin(), set.end(), [&](const char* s) { return name == s; });
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void append_utf8(std::string& out, unsigned long cp) {
  if (cp == 0 || cp > 0x10FFFF) cp = 0xFFFD;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

class Parser {
 public:
  explicit Parser(std::string_view html) : in_(html) {}

  std::unique_ptr<Node> run() {
    auto root = std::make_unique<Node>();
    root->type = Node::Type::kDocument;
    root->name = "#document";
    stack_.push_back(root.get());
    while (pos_ < in_.size()) {
      if (in_[pos_] == '<') {
        if (starts("<!--")) {
          auto end = in_.find("-->", pos_ + 4);
          pos_ = end == std::string_view::npos ? in_.size() : end + 3;
        } else if (starts("<!") || starts("<?")) {
          auto end = in_.find('>', pos_);
          pos_ = end == std::string_view::npos ? in_.size() : end + 1;
        } else if (starts("</")) {
          end_tag();
        } else if (pos_ + 1 < in_.size() && std::isalpha(static_cast<unsigned char>(in_[pos_ + 1]))) {
          start_tag();
        } else {
          text(std::string_view(in_).substr(pos_, 1));
          ++pos_;
        }
      } else {
        auto end = in_.find('<', pos_);
        if (end == std::string_view::npos) end = in_.size();
        text(in_.substr(pos_, end - pos_));
        pos_ = end;
      }
    }
    return root;
  }

 private:
  bool starts(std::string_view s) const { return in_.substr(pos_, s.size()) == s; }

  Node* top() { return stack_.back(); }

  void text(std::string_view raw) {
    if (raw.empty()) return;
    std::string decoded = decode_entities(raw);
    Node* parent = top();
    if (!parent->children.empty() && parent->children.back()->type == Node::Type::kText) {
      parent->children.back()->text += decoded;
      return;
    }
    auto node = std::make_unique<Node>();
    node->type = Node::Type::kText;
    node->name = "#text";
    node->text = std::move(decoded);
    parent->append(std::move(node));
  }

  void skip_space() {
    while (pos_ < in_.size() && std::isspace(static_cast<unsigned char>(in_[pos_]))) ++pos_;
  }

  std::string read_name() {
    std::size_t start = pos_;
    while (pos_ < in_.size() && !std::isspace(static_cast<unsigned char>(in_[pos_])) && in_[pos_] != '>' &&
           in_[pos_] != '/' && in_[pos_] != '=') {
      ++pos_;
    }
    return lower(in_.substr(start, pos_ - start));
  }

  void start_tag() {
    ++pos_;
    auto node = std::make_unique<Node>();
    node->name = read_name();
    bool self_closing = false;
    while (pos_ < in_.size()) {
      skip_space();
      if (pos_ >= in_.size()) break;
      if (in_[pos_] == '>') {
        ++pos_;
        break;
      }
      if (in_[pos_] == '/') {
        self_closing = true;
        ++pos_;
        continue;
      }
      std::string key = read_name();
      if (key.empty()) {
        ++pos_;
        continue;
      }
      skip_space();
      std::string value;
      if (pos_ < in_.size() && in_[pos_] == '=') {
        ++pos_;
        skip_space();
        if (pos_ < in_.size() && (in_[pos_] == '"' || in_[pos_] == '\'')) {
          char quote = in_[pos_++];
          auto end = in_.find(quote, pos_);
          if (end == std::string_view::npos) end = in_.size();
          value = decode_entities(in_.substr(pos_, end - pos_));
          pos_ = std::min(in_.size(), end + 1);
        } else {
          std::size_t start = pos_;
          while (pos_ < in_.size() && !std::isspace(static_cast<unsigned char>(in_[pos_])) && in_[pos_] != '>') ++pos_;
          value = decode_entities(in_.substr(start, pos_ - start));
        }
      }
      if (!node->attr(key)) node->attributes.emplace_back(std::move(key), std::move(value));
    }

    const std::string name = node->name;
    if (top()->is("p") && one_of(name, kClosesParagraph)) stack_.pop_back();
    if (name == "li") {
      for (std::size_t i = stack_.size(); i-- > 1;) {
        if (stack_[i]->is("ul") || stack_[i]->is("ol")) break;
        if (stack_[i]->is("li")) {
          stack_.resize(i);
          break;
        }
      }
    }
    Node* added = top()->append(std::move(node));
    if (one_of(name, kRawText)) {
      std::string close = "</" + name;
      std::size_t end = pos_;
      while (true) {
        end = in_.find("</", end);
        if (end == std::string_view::npos || lower(in_.substr(end, close.size())) == close) break;
        end += 2;
      }
      if (end == std::string_view::npos) end = in_.size();
      std::string_view body = in_.substr(pos_, end - pos_);
      added->text = (name == "script" || name == "style") ? std::string(body) : decode_entities(body);
      auto gt = in_.find('>', end);
      pos_ = gt == std::string_view::npos ? in_.size() : gt + 1;
      return;
    }
    if (!self_closing && !one_of(name, kVoid)) stack_.push_back(added);
  }

  void end_tag() {
    pos_ += 2;
    std::string name = read_name();
    auto gt = in_.find('>', pos_);
    pos_ = gt == std::string_view::npos ? in_.size() : gt + 1;
    for (std::size_t i = stack_.size(); i-- > 1;) {
      if (stack_[i]->is(name)) {
        stack_.resize(i);
        return;
      }
    }
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  std::vector<Node*> stack_;
};

std::unique_ptr<Node> make_element(std::string name) {
  auto node = std::make_unique<Node>();
  node->name = std::move(name);
  return node;
}

// Rebuilds the parsed tree as #document > html > (head, body).
std::unique_ptr<Node> normalize(std::unique_ptr<Node> parsed) {
  std::vector<std::unique_ptr<Node>> loose;
  std::unique_ptr<Node> html;
  for (auto& child : parsed->children) {
    if (!html && child->is("html")) {
      html = std::move(child);
    } else {
      loose.push_back(std::move(child));
    }
  }
  if (!html) html = make_element("html");
  std::vector<std::unique_ptr<Node>> content = std::move(html->children);
  html->children.clear();
  for (auto& extra : loose) content.push_back(std::move(extra));

  std::unique_ptr<Node> head;
  std::unique_ptr<Node> body;
  std::vector<std::unique_ptr<Node>> rest;
  for (auto& child : content) {
    if (!head && child->is("head")) {
      head = std::move(child);
    } else if (!body && child->is("body")) {
      body = std::move(child);
    } else {
      rest.push_back(std::move(child));
    }
  }
  bool had_body = body != nullptr;
  if (!head) head = make_element("head");
  if (!body) body = make_element("body");
  for (auto& child : rest) {
    if (child->type == Node::Type::kText && child->text.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    if (!had_body && child->type == Node::Type::kElement && one_of(child->name, kHeadOnly)) {
      head->append(std::move(child));
    } else {
      body->append(std::move(child));
    }
  }

  auto doc = std::make_unique<Node>();
  doc->type = Node::Type::kDocument;
  doc->name = "#document";
  html->append(std::move(head));
  html->append(std::move(body));
  doc->append(std::move(html));
  int next_id = 1;
  walk(*doc, [&](Node& n) { n.backend_id = next_id++; });
  return doc;
}

}  // namespace

std::optional<std::string> Node::attr(std::string_view key) const {
  for (const auto& [k, v] : attributes) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void Node::set_attr(std::string_view key, std::string value) {
  for (auto& [k, v] : attributes) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  attributes.emplace_back(std::string(key), std::move(value));
}

void Node::remove_attr(std::string_view key) {
  std::erase_if(attributes, [&](const auto& kv) { return kv.first == key; });
}

Node* Node::append(std::unique_ptr<Node> child) {
  child->parent = this;
  children.push_back(std::move(child));
  return children.back().get();
}

Node* Node::closest(std::string_view tag) {
  for (Node* n = this; n != nullptr; n = n->parent) {
    if (n->is(tag)) return n;
  }
  return nullptr;
}

std::string decode_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '&') {
      out += text[i];
      continue;
    }
    auto semi = text.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out += '&';
      continue;
    }
    std::string_view name = text.substr(i + 1, semi - i - 1);
    std::string replacement;
    if (name.size() > 1 && name[0] == '#') {
      try {
        unsigned long cp = (name[1] == 'x' || name[1] == 'X') ? std::stoul(std::string(name.substr(2)), nullptr, 16)
                                                              : std::stoul(std::string(name.substr(1)));
        append_utf8(replacement, cp);
      } catch (...) {
      }
    } else if (name == "amp") {
      replacement = "&";
    } else if (name == "lt") {
      replacement = "<";
    } else if (name == "gt") {
      replacement = ">";
    } else if (name == "quot") {
      replacement = "\"";
    } else if (name == "apos") {
      replacement = "'";
    } else if (name == "nbsp") {
      replacement = "\xC2\xA0";
    } else if (name == "copy") {
      replacement = "\xC2\xA9";
    } else if (name == "mdash") {
      replacement = "\xE2\x80\x94";
    } else if (name == "ndash") {
      replacement = "\xE2\x80\x93";
    }
    if (replacement.empty()) {
      out += '&';
      continue;
    }
    out += replacement;
    i = semi;
  }
  return out;
}

std::unique_ptr<Node> parse_html(std::string_view html) { return normalize(Parser(html).run()); }

}  // namespace uxprobe::sim
