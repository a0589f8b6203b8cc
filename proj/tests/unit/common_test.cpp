#include <gtest/gtest.h>

#include "support.hpp"
#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"
#include "uxprobe/common/image.hpp"
#include "uxprobe/common/url.hpp"

namespace uxprobe {
namespace {

std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

TEST(Base64, Rfc4648Vectors) {
  const std::pair<const char*, const char*> vectors[] = {
      {"", ""},         {"f", "Zg=="},         {"fo", "Zm8="},         {"foo", "Zm9v"},
      {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"},
  };
  for (auto [plain, encoded] : vectors) {
    EXPECT_EQ(base64_encode(bytes_of(plain)), encoded);
    EXPECT_EQ(base64_decode(encoded), bytes_of(plain));
  }
}

TEST(Base64, RoundTripsArbitraryBytes) {
  test::Gen gen(7);
  for (int i = 0; i < 500; ++i) {
    auto raw = gen.bytes(64);
    std::vector<std::uint8_t> data(raw.begin(), raw.end());
    EXPECT_EQ(base64_decode(base64_encode(data)), data);
  }
}

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex(std::string_view("")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex(std::string_view("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Sha1, WebSocketAcceptKey) {
  // RFC 6455 handshake example.
  std::string digest = sha1_raw("dGhlIHNhbXBsZSBub25jZQ==258EAFA5-E914-47DA-95CA-C5AB0DC85B11");
  EXPECT_EQ(base64_encode(bytes_of(digest)), "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
}

TEST(Text, ValidUtf8) {
  EXPECT_EQ(valid_utf8("plain é 日本"), "plain é 日本");
  EXPECT_EQ(valid_utf8(std::string("a\xff" "b")), "a\xEF\xBF\xBD" "b");
  test::Gen gen(5);
  for (int i = 0; i < 2000; ++i) {
    std::string once = valid_utf8(gen.bytes(64));
    ASSERT_EQ(valid_utf8(once), once) << "idempotent";
  }
}

TEST(Text, TrimCollapseLower) {
  EXPECT_EQ(trim("  a b \n"), "a b");
  EXPECT_EQ(trim(" \t"), "");
  EXPECT_EQ(collapse_whitespace("  a \n\n b\tc  "), "a b c");
  EXPECT_EQ(to_lower("MiXeD"), "mixed");
  EXPECT_TRUE(contains_icase("Fall Break", "fall b"));
  EXPECT_FALSE(contains_icase("spring", "fall"));
}

TEST(Url, ParsesComponents) {
  auto u = Url::parse("HTTP://Example.COM:8080/a/b?x=1#frag");
  ASSERT_TRUE(u);
  EXPECT_EQ(u->scheme, "http");
  EXPECT_EQ(u->host, "example.com");
  EXPECT_EQ(u->port, 8080);
  EXPECT_EQ(u->path, "/a/b");
  EXPECT_EQ(u->query, "x=1");
  EXPECT_EQ(u->fragment, "frag");
  EXPECT_EQ(u->authority(), "example.com:8080");
  EXPECT_EQ(u->origin(), "http://example.com:8080");
  EXPECT_EQ(u->path_and_query(), "/a/b?x=1");

  auto bare = Url::parse("https://host");
  ASSERT_TRUE(bare);
  EXPECT_EQ(bare->path, "/");
  EXPECT_EQ(bare->effective_port(), 443);
}

TEST(Url, WellFormedHttp) {
  EXPECT_TRUE(is_well_formed_http_url("http://localhost:8080/site1/"));
  EXPECT_TRUE(is_well_formed_http_url("https://example.com"));
  EXPECT_FALSE(is_well_formed_http_url("ftp://example.com/"));
  EXPECT_FALSE(is_well_formed_http_url("/relative"));
  EXPECT_FALSE(is_well_formed_http_url("http://"));
  EXPECT_FALSE(is_well_formed_http_url(""));
}

TEST(Url, ResolvesRfc3986NormalExamples) {
  const std::string base = "http://a/b/c/d;p?q";
  const std::pair<const char*, const char*> cases[] = {
      {"g", "http://a/b/c/g"},         {"./g", "http://a/b/c/g"},      {"g/", "http://a/b/c/g/"},
      {"/g", "http://a/g"},            {"?y", "http://a/b/c/d;p?y"},   {"g?y", "http://a/b/c/g?y"},
      {"#s", "http://a/b/c/d;p?q#s"},  {"g#s", "http://a/b/c/g#s"},    {"..", "http://a/b/"},
      {"../g", "http://a/b/g"},        {"../..", "http://a/"},         {"../../g", "http://a/g"},
      {"../../../g", "http://a/g"},    {"", "http://a/b/c/d;p?q"},
  };
  for (auto [ref, expected] : cases) {
    auto resolved = resolve_http_url(base, ref);
    ASSERT_TRUE(resolved) << ref;
    EXPECT_EQ(*resolved, expected) << ref;
  }
}

TEST(Url, RejectsNonHttpReferences) {
  EXPECT_FALSE(resolve_http_url("http://a/b", "mailto:x@y.z"));
  EXPECT_FALSE(resolve_http_url("http://a/b", "javascript:void(0)"));
  EXPECT_FALSE(resolve_http_url("http://a/b", "data:,"));
  EXPECT_TRUE(resolve_http_url("http://a/b", "https://other.org/x"));
}

TEST(Url, Slug) { EXPECT_EQ(url_slug("http://localhost:8080/site1/"), "localhost_8080_site1"); }

TEST(Files, AtomicWriteReplacesContent) {
  test::TempDir dir;
  auto path = dir / "f.txt";
  write_file_atomic(path, std::string_view("first"));
  EXPECT_EQ(read_text_file(path), "first");
  write_file_atomic(path, std::string_view("second"));
  EXPECT_EQ(read_text_file(path), "second");
  for (const auto& entry : std::filesystem::directory_iterator(dir.path())) {
    EXPECT_EQ(entry.path().filename(), "f.txt") << "temp file left behind";
  }
}

TEST(Files, MissingFileIsStorageFailure) {
  try {
    read_text_file("/nonexistent/definitely/missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStorageFailure);
  }
}

TEST(Files, Iso8601Shape) {
  std::string now = iso8601_now();
  ASSERT_EQ(now.size(), 20u);
  EXPECT_EQ(now[4], '-');
  EXPECT_EQ(now[10], 'T');
  EXPECT_EQ(now.back(), 'Z');
}

TEST(Image, ReadsPngHeader) {
  auto blob = test::solid_png(37, 11, 200);
  EXPECT_EQ(blob.width, 37);
  EXPECT_EQ(blob.height, 11);
  EXPECT_EQ(blob.content_hash(), sha256_hex(std::span<const std::uint8_t>(blob.png)));
  EXPECT_FALSE(ImageBlob::from_png(bytes_of("not a png at all, clearly")));
  EXPECT_FALSE(ImageBlob::from_png({}));
}

TEST(ErrorType, MessageCarriesCode) {
  Error e(ErrorCode::kScriptExhausted, "no more replies");
  EXPECT_STREQ(e.what(), "script-exhausted: no more replies");
  EXPECT_EQ(to_string(ErrorCode::kConnectionRefused), "connection-refused");
  EXPECT_EQ(to_string(ErrorCode::kUnparseableReport), "unparseable-report");
}

}  // namespace
}  // namespace uxprobe
