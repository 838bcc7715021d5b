#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace spamprop {

struct Message {
  std::string id;
  std::string author;
  std::int64_t timestamp = 0;
  std::string text;
  bool is_repost = false;
};

/// A user's messages, oldest first.
struct Timeline {
  std::string user;
  std::vector<Message> messages;
};

using TokenList = std::vector<std::string>;
using StopWords = std::unordered_set<std::string>;

/// A fixed-length bundle of consecutive timeline messages.
struct Document {
  std::string doc_id;
  std::string user;
  TokenList tokens;
  std::vector<std::string> source_message_ids;
};

struct RecordError {
  std::size_t line = 0;
  std::string reason;
};

struct ParseReport {
  std::size_t records = 0;
  std::size_t duplicates = 0;
  std::size_t truncated = 0;
  std::vector<RecordError> errors;
};

struct ParsedTimelines {
  std::vector<Timeline> timelines;  // sorted by user
  ParseReport report;
};

inline constexpr std::size_t kMaxMessageCodePoints = 280;

/// Reads one JSON object per line ({"user","id","ts","text","repost"?}).
/// Malformed records are reported with their 1-based line number and
/// skipped; a repeated id for the same user keeps the first occurrence.
/// Each timeline keeps only its `per_user_cap` newest messages.
ParsedTimelines parse_timelines(std::istream& in, std::size_t per_user_cap);

enum class TokenizeMode {
  grouping,  // URLs become single "<url:...>" tokens
  topic,     // URLs are dropped
};

TokenList clean_and_tokenize(std::string_view text, const StopWords& stopwords,
                             TokenizeMode mode = TokenizeMode::grouping);

/// Splits a timeline into documents of `messages_per_doc` messages; the last
/// document keeps the remainder. Tokens are produced in topic mode.
std::vector<Document> build_documents(const Timeline& timeline, std::size_t messages_per_doc,
                                      const StopWords& stopwords);

/// Built-in English stop-word list.
const StopWords& default_stopwords();

/// One word per line; blank lines and lines starting with '#' are ignored.
StopWords load_stopwords(const std::filesystem::path& path);

std::size_t count_code_points(std::string_view utf8);

}  // namespace spamprop
