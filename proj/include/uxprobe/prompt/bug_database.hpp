#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uxprobe::prompt {

enum class BugCategory { kBrokenElement, kInteractionFailure, kUiUxFlaw, kContentInconsistency, kDomainSpecific };

std::string_view to_string(BugCategory category);
std::optional<BugCategory> parse_bug_category(std::string_view text);

struct BugRecord {
  std::string id;  // assigned by the database
  BugCategory category = BugCategory::kBrokenElement;
  std::string description;
  std::string site_class;
  bool reproducible = false;
  std::optional<std::string> source_url;
  std::optional<std::string> discovered_by_prompt;
  std::string recorded_at;  // ISO-8601, assigned by the database
  long sequence = 0;        // insertion order, assigned by the database

  friend bool operator==(const BugRecord&, const BugRecord&) = default;
};

// Throws Error(kInvalidRecord) on an empty description or class.
void validate(const BugRecord& record);

// Append-only store backed by a newline-delimited JSON event log. Each line
// is either an insertion or a reproducible-flag change, so existing lines are
// never rewritten.
class BugDatabase {
 public:
  // Creates the file on first write. Errors: kStorageFailure on unreadable
  // files, kCorruptRecord on a malformed line.
  static BugDatabase open(const std::filesystem::path& path);
  // Purely in memory; nothing is persisted.
  static BugDatabase in_memory();

  BugDatabase(BugDatabase&& other) noexcept;

  // Returns the new id. Errors: kInvalidRecord, kDuplicateRecord (same
  // category, description and source url), kStorageFailure.
  std::string record(BugRecord record);
  // Errors: kPrecondition for unknown ids, kStorageFailure.
  void set_reproducible(std::string_view id, bool reproducible);

  std::vector<BugRecord> records() const;
  std::optional<BugRecord> find(std::string_view id) const;
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  BugDatabase() = default;
  void append_line(const std::string& line);

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<BugRecord> records_;
  long next_sequence_ = 1;
};

// Up to k reproducible records of `site_class`, spread across categories:
// categories are visited in order of their most recent record and each turn
// takes that category's next most recent record. Deterministic.
std::vector<BugRecord> select_representative(const std::vector<BugRecord>& records, std::string_view site_class,
                                             int k = 10);

}  // namespace uxprobe::prompt
