#include <gtest/gtest.h>

#include "uxprobe/browser/snapshot.hpp"
#include "uxprobe/common/image.hpp"
#include "uxprobe/sim/html.hpp"
#include "uxprobe/sim/page.hpp"

namespace uxprobe::sim {
namespace {

browser::ElementMap elements_of(const Page& page, int width = 1280, int height = 1024) {
  std::vector<std::string> styles(std::begin(browser::kSnapshotStyles), std::end(browser::kSnapshotStyles));
  return browser::elements_from_snapshot(page.snapshot(styles), width, height, 1);
}

TEST(Html, ForgivingParse) {
  auto doc = parse_html("<p>one<p>two <b>bold</b><br>three &amp; &lt;four&gt; &#65;&#x42;");
  ASSERT_EQ(doc->children.size(), 1u);
  Node& html = *doc->children[0];
  EXPECT_TRUE(html.is("html"));
  ASSERT_GE(html.children.size(), 2u);
  EXPECT_TRUE(html.children[0]->is("head"));
  EXPECT_TRUE(html.children[1]->is("body"));
  int paragraphs = 0;
  walk(*doc, [&](const Node& n) { paragraphs += n.is("p") ? 1 : 0; });
  EXPECT_EQ(paragraphs, 2);
  EXPECT_EQ(decode_entities("&amp;&lt;&gt;&quot;&#65;&#x42;&nbsp;"), "&<>\"AB\xC2\xA0");
}

TEST(Html, BackendIdsInDocumentOrder) {
  auto doc = parse_html("<a href='/x'>x</a><div><span>y</span></div>");
  int last = 0;
  bool increasing = true;
  walk(*doc, [&](const Node& n) {
    if (n.backend_id <= last) increasing = false;
    last = n.backend_id;
  });
  EXPECT_TRUE(increasing);
  EXPECT_EQ(doc->backend_id, 1);
}

TEST(Html, NeverFailsOnGarbage) {
  const char* inputs[] = {"", "<", "<<<>>>", "<a href=", "</div></div>", "<script>if (a < b) {}</script>",
                          "<!-- unterminated", "<textarea><b>raw</b>", "\xff\xfe\x00garbage"};
  for (const char* in : inputs) {
    auto doc = parse_html(in);
    ASSERT_TRUE(doc);
    ASSERT_EQ(doc->children.size(), 1u);
  }
}

TEST(Color, ParsesCommonForms) {
  EXPECT_EQ(parse_color("#fff"), (Rgb{255, 255, 255}));
  EXPECT_EQ(parse_color("#f2f2f2"), (Rgb{0xf2, 0xf2, 0xf2}));
  EXPECT_EQ(parse_color("rgb(1, 2, 3)"), (Rgb{1, 2, 3}));
  EXPECT_EQ(parse_color("white"), (Rgb{255, 255, 255}));
  EXPECT_FALSE(parse_color("not-a-colour"));
}

// Oracle: anchors with href plus buttons counted straight from the source.
TEST(Page, ExtractsLinksAndButtonsInDocumentOrder) {
  std::string html =
      "<h1>Title</h1><p><a href='/one'>One</a> and <a href='two.html'>Two</a></p>"
      "<a href='https://other.org/'>Three</a><button>Go</button>";
  Page page("http://site.test/dir/index.html", html, 1280, 1024);
  auto map = elements_of(page);
  ASSERT_EQ(map.size(), 4u);
  for (std::size_t i = 0; i < map.size(); ++i) EXPECT_EQ(map.entries[i].index, static_cast<int>(i) + 1);
  EXPECT_EQ(map.entries[0].role, browser::ElementRole::kLink);
  EXPECT_EQ(map.entries[0].label, "One");
  EXPECT_EQ(map.entries[0].target_url, "http://site.test/one");
  EXPECT_EQ(map.entries[1].target_url, "http://site.test/dir/two.html");
  EXPECT_EQ(map.entries[2].target_url, "https://other.org/");
  EXPECT_EQ(map.entries[3].role, browser::ElementRole::kButton);
  EXPECT_EQ(map.entries[3].label, "Go");
  EXPECT_FALSE(map.entries[3].target_url);
  EXPECT_NO_THROW(browser::validate(map));
}

TEST(Page, HiddenElementsAreExcluded) {
  std::string html =
      "<a href='/a'>Visible</a><a href='/b' style='display:none'>Gone</a>"
      "<a href='/c' style='visibility: hidden'>Hidden</a><div style='display:none'><a href='/d'>Inner</a></div>";
  Page page("http://site.test/", html, 1280, 1024);
  auto map = elements_of(page);
  ASSERT_EQ(map.size(), 1u);
  EXPECT_EQ(map.entries[0].label, "Visible");
}

TEST(Page, BlankPageHasNoElements) {
  Page page("about:blank", "", 1280, 1024);
  EXPECT_TRUE(elements_of(page).empty());
}

TEST(Page, FormControlsAndValues) {
  std::string html =
      "<form><input type='text' name='q' placeholder='Search'><input type='checkbox' name='c'>"
      "<select name='s'><option>a</option></select><input type='submit' value='Send'>"
      "<input type='hidden' name='h' value='x'></form>";
  Page page("http://site.test/", html, 1280, 1024);
  auto map = elements_of(page);
  ASSERT_EQ(map.size(), 4u);
  EXPECT_EQ(map.entries[0].role, browser::ElementRole::kTextInput);
  EXPECT_EQ(map.entries[0].label, "Search");
  EXPECT_EQ(map.entries[1].role, browser::ElementRole::kCheckbox);
  EXPECT_EQ(map.entries[2].role, browser::ElementRole::kSelect);
  EXPECT_EQ(map.entries[3].role, browser::ElementRole::kButton);
  EXPECT_EQ(map.entries[3].label, "Send");

  Node* input = page.find(map.entries[0].backend_node_id);
  ASSERT_NE(input, nullptr);
  page.set_value(*input, "hello");
  EXPECT_EQ(page.value_of(*input), "hello");
  EXPECT_EQ(elements_of(page).entries[0].value, "hello");
}

TEST(Page, ExtractionIsStable) {
  std::string html = "<a href='/1'>1</a><p>text</p><a href='/2'>2</a><button>b</button>";
  Page page("http://site.test/", html, 1280, 1024);
  EXPECT_EQ(elements_of(page), elements_of(page));
}

TEST(Page, ViewportLimitsAndScrolling) {
  std::string html;
  for (int i = 0; i < 80; ++i) html += "<p>filler paragraph " + std::to_string(i) + "</p>";
  html += "<a href='/bottom'>Bottom</a>";
  Page page("http://site.test/", html, 800, 600);
  EXPECT_TRUE(elements_of(page, 800, 600).empty());
  for (int i = 0; i < 20 && elements_of(page, 800, 600).empty(); ++i) page.scroll_by(600);
  auto map = elements_of(page, 800, 600);
  ASSERT_EQ(map.size(), 1u);
  EXPECT_EQ(map.entries[0].label, "Bottom");
  const auto& box = map.entries[0].bounding_box;
  EXPECT_GE(box.y, 0);
  EXPECT_LT(box.y, 600);
}

TEST(Page, HitTestFindsElementAtItsCentre) {
  Page page("http://site.test/", "<p>intro</p><a href='/x'>Target link</a>", 1280, 1024);
  auto map = elements_of(page);
  ASSERT_EQ(map.size(), 1u);
  const auto& b = map.entries[0].bounding_box;
  Node* hit = page.hit_test(b.x + b.width / 2, b.y + b.height / 2);
  ASSERT_NE(hit, nullptr);
  const auto& ids = map.entries[0].hit_node_ids;
  EXPECT_NE(std::find(ids.begin(), ids.end(), hit->backend_id), ids.end());
}

TEST(Page, RenderIsViewportSizedAndDeterministic) {
  Page page("http://site.test/", "<h1>Hello</h1><p style='color:#f2f2f2;background-color:#fff'>pale</p>", 640, 480);
  auto first = page.render_png(0);
  auto second = page.render_png(0);
  EXPECT_EQ(first, second);
  auto blob = ImageBlob::from_png(first);
  ASSERT_TRUE(blob);
  EXPECT_EQ(blob->width, 640);
  EXPECT_EQ(blob->height, 480);
}

TEST(Page, ConsoleErrorsFromInlineScripts) {
  Page page("http://site.test/", "<script>console.error('widget failed to initialise');</script><p>x</p>", 800,
            600);
  auto errors = page.script_errors();
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0], "widget failed to initialise");
}

TEST(Page, ImageUrlsResolved) {
  Page page("http://site.test/a/", "<img src='p.png' alt='x'><img src='/abs.png'>", 800, 600);
  EXPECT_EQ(page.image_urls(), (std::vector<std::string>{"http://site.test/a/p.png", "http://site.test/abs.png"}));
}

}  // namespace
}  // namespace uxprobe::sim
