#include "uxprobe/prompt/bug_database.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <map>

#include "json.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/files.hpp"

namespace uxprobe::prompt {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr BugCategory kAllCategories[] = {BugCategory::kBrokenElement, BugCategory::kInteractionFailure,
                                          BugCategory::kUiUxFlaw, BugCategory::kContentInconsistency,
                                          BugCategory::kDomainSpecific};

json optional_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(BugCategory category) {
  switch (category) {
    case BugCategory::kBrokenElement: return "broken-element";
    case BugCategory::kInteractionFailure: return "interaction-failure";
    case BugCategory::kUiUxFlaw: return "ui-ux-flaw";
    case BugCategory::kContentInconsistency: return "content-inconsistency";
    case BugCategory::kDomainSpecific: return "domain-specific";
  }
  return "broken-element";
}

std::optional<BugCategory> parse_bug_category(std::string_view text) {
  for (BugCategory c : kAllCategories) {
    if (text == to_string(c)) return c;
  }
  return std::nullopt;
}

void validate(const BugRecord& record) {
  if (record.description.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::kInvalidRecord, "bug description is empty");
  }
  if (record.site_class.empty()) throw Error(ErrorCode::kInvalidRecord, "bug has no website class");
}

BugDatabase BugDatabase::in_memory() { return BugDatabase(); }

BugDatabase::BugDatabase(BugDatabase&& other) noexcept
    : path_(std::move(other.path_)), records_(std::move(other.records_)), next_sequence_(other.next_sequence_) {}

BugDatabase BugDatabase::open(const fs::path& path) {
  BugDatabase db;
  db.path_ = path;
  if (!fs::exists(path)) return db;
  std::string text = read_text_file(path);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::kCorruptRecord, path.string() + " line " + std::to_string(line_no) + ": " + why);
    };
    json event = json::parse(line, nullptr, false);
    if (event.is_discarded() || !event.is_object()) throw fail("not a JSON object");
    try {
      std::string op = event.at("op").get<std::string>();
      if (op == "add") {
        const json& r = event.at("record");
        BugRecord rec;
        rec.id = r.at("id").get<std::string>();
        auto category = parse_bug_category(r.at("category").get<std::string>());
        if (!category) throw fail("unknown category");
        rec.category = *category;
        rec.description = r.at("description").get<std::string>();
        rec.site_class = r.at("site_class").get<std::string>();
        rec.reproducible = r.value("reproducible", false);
        rec.source_url = optional_string(r, "source_url");
        rec.discovered_by_prompt = optional_string(r, "discovered_by_prompt");
        rec.recorded_at = r.value("recorded_at", "");
        rec.sequence = r.at("sequence").get<long>();
        if (std::any_of(db.records_.begin(), db.records_.end(), [&](const BugRecord& b) { return b.id == rec.id; })) {
          throw fail("duplicate id " + rec.id);
        }
        db.next_sequence_ = std::max(db.next_sequence_, rec.sequence + 1);
        db.records_.push_back(std::move(rec));
      } else if (op == "set_reproducible") {
        std::string id = event.at("id").get<std::string>();
        auto it = std::find_if(db.records_.begin(), db.records_.end(), [&](const BugRecord& b) { return b.id == id; });
        if (it == db.records_.end()) throw fail("flag change for unknown id " + id);
        it->reproducible = event.at("reproducible").get<bool>();
      } else {
        throw fail("unknown op '" + op + "'");
      }
    } catch (const json::exception& e) {
      throw fail(e.what());
    }
  }
  return db;
}

void BugDatabase::append_line(const std::string& line) {
  if (path_.empty()) return;
  std::error_code ec;
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path(), ec);
  int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::kStorageFailure, "cannot open bug database " + path_.string());
  std::string data = line + "\n";
  // One write() per event: with O_APPEND the line lands whole or not at all.
  ssize_t n = ::write(fd, data.data(), data.size());
  bool ok = n == static_cast<ssize_t>(data.size()) && ::fsync(fd) == 0;
  ::close(fd);
  if (!ok) throw Error(ErrorCode::kStorageFailure, "short write to bug database " + path_.string());
}

std::string BugDatabase::record(BugRecord record) {
  validate(record);
  std::lock_guard lock(mutex_);
  for (const auto& existing : records_) {
    if (existing.category == record.category && existing.description == record.description &&
        existing.source_url == record.source_url) {
      throw Error(ErrorCode::kDuplicateRecord, "bug already recorded as " + existing.id);
    }
  }
  record.sequence = next_sequence_;
  char id[32];
  std::snprintf(id, sizeof id, "bug-%04ld", record.sequence);
  record.id = id;
  if (record.recorded_at.empty()) record.recorded_at = iso8601_now();
  json event = {{"op", "add"},
                {"record",
                 {{"id", record.id},
                  {"category", to_string(record.category)},
                  {"description", record.description},
                  {"site_class", record.site_class},
                  {"reproducible", record.reproducible},
                  {"source_url", optional_json(record.source_url)},
                  {"discovered_by_prompt", optional_json(record.discovered_by_prompt)},
                  {"recorded_at", record.recorded_at},
                  {"sequence", record.sequence}}}};
  append_line(event.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
  ++next_sequence_;
  records_.push_back(record);
  return record.id;
}

void BugDatabase::set_reproducible(std::string_view id, bool reproducible) {
  std::lock_guard lock(mutex_);
  auto it = std::find_if(records_.begin(), records_.end(), [&](const BugRecord& b) { return b.id == id; });
  if (it == records_.end()) throw Error(ErrorCode::kPrecondition, "no bug with id " + std::string(id));
  append_line(json{{"op", "set_reproducible"}, {"id", it->id}, {"reproducible", reproducible}}.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
  it->reproducible = reproducible;
}

std::vector<BugRecord> BugDatabase::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::optional<BugRecord> BugDatabase::find(std::string_view id) const {
  std::lock_guard lock(mutex_);
  for (const auto& r : records_) {
    if (r.id == id) return r;
  }
  return std::nullopt;
}

std::size_t BugDatabase::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::vector<BugRecord> select_representative(const std::vector<BugRecord>& records, std::string_view site_class,
                                             int k) {
  if (k < 1) throw Error(ErrorCode::kPrecondition, "k must be at least 1");
  std::map<BugCategory, std::vector<const BugRecord*>> by_category;
  for (const auto& r : records) {
    if (r.reproducible && r.site_class == site_class) by_category[r.category].push_back(&r);
  }
  std::vector<std::vector<const BugRecord*>> queues;
  for (auto& [category, list] : by_category) {
    std::sort(list.begin(), list.end(), [](const BugRecord* a, const BugRecord* b) {
      return a->sequence != b->sequence ? a->sequence > b->sequence : a->id > b->id;
    });
    queues.push_back(list);
  }
  std::sort(queues.begin(), queues.end(), [](const auto& a, const auto& b) {
    return a.front()->sequence != b.front()->sequence ? a.front()->sequence > b.front()->sequence
                                                      : a.front()->id > b.front()->id;
  });
  std::vector<BugRecord> picked;
  for (std::size_t round = 0; static_cast<int>(picked.size()) < k; ++round) {
    bool any = false;
    for (const auto& q : queues) {
      if (round < q.size() && static_cast<int>(picked.size()) < k) {
        picked.push_back(*q[round]);
        any = true;
      }
    }
    if (!any) break;
  }
  return picked;
}

}  // namespace uxprobe::prompt
