#include "spamprop/ingest.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <set>

#include <json.hpp>

#include "spamprop/error.hpp"
#include "spamprop/text_io.hpp"

namespace spamprop {

namespace {

constexpr char32_t kInvalid = 0xFFFD;

// Decodes one code point starting at text[pos]; advances pos. Malformed
// sequences yield U+FFFD and consume one byte.
char32_t decode_utf8(std::string_view text, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return kInvalid;
  }
  if (pos + len > text.size()) {
    ++pos;
    return kInvalid;
  }
  for (int i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(text[pos + i]);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t c) {
  return c == ' ' || (c >= 0x09 && c <= 0x0D) || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

// Control characters, zero-width format characters, variation selectors
// and undecodable bytes.
bool is_nonprintable(char32_t c) {
  return c < 0x20 || (c >= 0x7F && c <= 0x9F) || (c >= 0x200B && c <= 0x200F) ||
         c == 0xFEFF || (c >= 0xFE00 && c <= 0xFE0F) || (c >= 0xE0100 && c <= 0xE01EF) ||
         c == kInvalid;
}

// General category P* over the blocks that matter for short messages.
bool is_punctuation(char32_t c) {
  if (c < 0x80) {
    switch (c) {
      case '!': case '"': case '#': case '%': case '&': case '\'': case '(': case ')':
      case '*': case ',': case '-': case '.': case '/': case ':': case ';': case '?':
      case '@': case '[': case '\\': case ']': case '_': case '{': case '}':
        return true;
      default:
        return false;
    }
  }
  switch (c) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
    case 0x37E: case 0x387: case 0x55A: case 0x589: case 0x5BE: case 0x60C: case 0x61F:
      return true;
    default:
      break;
  }
  if (c >= 0x2010 && c <= 0x2027) return true;
  if (c >= 0x2030 && c <= 0x2043) return true;
  if (c >= 0x2045 && c <= 0x2051) return true;
  if (c >= 0x2053 && c <= 0x205E) return true;
  if (c >= 0x2E00 && c <= 0x2E4F) return true;
  if ((c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
      (c >= 0x3014 && c <= 0x301F)) {
    return true;
  }
  if ((c >= 0xFF01 && c <= 0xFF03) || (c >= 0xFF05 && c <= 0xFF0A) ||
      (c >= 0xFF0C && c <= 0xFF0F) || c == 0xFF1A || c == 0xFF1B || c == 0xFF1F ||
      c == 0xFF20 || (c >= 0xFF3B && c <= 0xFF3D) || c == 0xFF3F || c == 0xFF5B ||
      c == 0xFF5D || (c >= 0xFF5F && c <= 0xFF65)) {
    return true;
  }
  return false;
}

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0xC0) return c;
  if ((c >= 0xC0 && c <= 0xDE) && c != 0xD7) return c + 32;
  if (c == 0x178) return 0xFF;
  if (c >= 0x100 && c <= 0x17F) {
    // Latin Extended-A alternates upper/lower, with a parity shift after 0x138.
    if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) {
      return (c % 2 == 1) ? c + 1 : c;
    }
    if (c != 0x130 && c != 0x138 && c != 0x149 && c != 0x17F) {
      return (c % 2 == 0) ? c + 1 : c;
    }
    return c;
  }
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

bool starts_with_scheme(std::string_view s) {
  auto lower_prefix = [&](std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      char ch = s[i];
      if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch + 32);
      if (ch != prefix[i]) return false;
    }
    return true;
  };
  return lower_prefix("http://") || lower_prefix("https://");
}

// Position of the first http(s):// in chunk, or npos.
std::size_t find_url(std::string_view chunk) {
  for (std::size_t i = 0; i + 7 <= chunk.size(); ++i) {
    if ((chunk[i] == 'h' || chunk[i] == 'H') && starts_with_scheme(chunk.substr(i))) {
      return i;
    }
  }
  return std::string_view::npos;
}

std::string normalize_word(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t pos = 0;
  while (pos < raw.size()) {
    const char32_t c = decode_utf8(raw, pos);
    if (is_nonprintable(c) || is_punctuation(c)) continue;
    append_utf8(out, to_lower(c));
  }
  return out;
}

std::string strip_nonprintable(std::string_view raw) {
  std::string out;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    const char32_t c = decode_utf8(raw, pos);
    if (!is_nonprintable(c)) append_utf8(out, c);
  }
  return out;
}

}  // namespace

std::size_t count_code_points(std::string_view utf8) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos < utf8.size()) {
    decode_utf8(utf8, pos);
    ++n;
  }
  return n;
}

TokenList clean_and_tokenize(std::string_view text, const StopWords& stopwords,
                             TokenizeMode mode) {
  TokenList tokens;
  auto push_word = [&](std::string_view raw) {
    std::string word = normalize_word(raw);
    if (!word.empty() && !stopwords.contains(word)) {
      tokens.push_back(std::move(word));
    }
  };

  std::size_t pos = 0;
  std::size_t chunk_start = 0;
  auto flush_chunk = [&](std::size_t end) {
    std::string_view chunk = text.substr(chunk_start, end - chunk_start);
    if (chunk.empty()) return;
    const auto url_at = find_url(chunk);
    if (url_at == std::string_view::npos) {
      push_word(chunk);
      return;
    }
    push_word(chunk.substr(0, url_at));
    if (mode == TokenizeMode::grouping) {
      tokens.push_back("<url:" + strip_nonprintable(chunk.substr(url_at)) + ">");
    }
  };

  while (pos < text.size()) {
    const std::size_t here = pos;
    const char32_t c = decode_utf8(text, pos);
    if (is_space(c)) {
      flush_chunk(here);
      chunk_start = pos;
    }
  }
  flush_chunk(text.size());
  return tokens;
}

ParsedTimelines parse_timelines(std::istream& in, std::size_t per_user_cap) {
  ParsedTimelines result;
  std::map<std::string, std::vector<Message>> by_user;
  std::map<std::string, std::set<std::string>> seen_ids;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++result.report.records;

    Message msg;
    try {
      const auto obj = nlohmann::json::parse(line);
      if (!obj.is_object()) throw DataError("record is not an object");
      for (const char* key : {"user", "id", "text"}) {
        if (!obj.contains(key) || !obj[key].is_string()) {
          throw DataError(std::string("missing or non-string field '") + key + "'");
        }
      }
      if (!obj.contains("ts") || !obj["ts"].is_number_integer()) {
        throw DataError("missing or non-integer field 'ts'");
      }
      msg.author = obj["user"].get<std::string>();
      msg.id = obj["id"].get<std::string>();
      msg.timestamp = obj["ts"].get<std::int64_t>();
      msg.text = obj["text"].get<std::string>();
      if (obj.contains("repost")) {
        if (!obj["repost"].is_boolean()) throw DataError("field 'repost' is not a boolean");
        msg.is_repost = obj["repost"].get<bool>();
      }
    } catch (const nlohmann::json::exception& e) {
      result.report.errors.push_back({line_no, std::string("invalid JSON: ") + e.what()});
      continue;
    } catch (const DataError& e) {
      result.report.errors.push_back({line_no, e.what()});
      continue;
    }

    if (msg.author.empty() || msg.id.empty()) {
      result.report.errors.push_back({line_no, "empty user or id"});
      continue;
    }
    if (msg.text.empty()) {
      result.report.errors.push_back({line_no, "empty text"});
      continue;
    }
    if (count_code_points(msg.text) > kMaxMessageCodePoints) {
      result.report.errors.push_back({line_no, "text longer than 280 code points"});
      continue;
    }
    if (!seen_ids[msg.author].insert(msg.id).second) {
      ++result.report.duplicates;
      continue;
    }
    by_user[msg.author].push_back(std::move(msg));
  }

  result.timelines.reserve(by_user.size());
  for (auto& [user, messages] : by_user) {
    std::sort(messages.begin(), messages.end(), [](const Message& a, const Message& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.id < b.id;
    });
    if (messages.size() > per_user_cap) {
      result.report.truncated += messages.size() - per_user_cap;
      messages.erase(messages.begin(),
                     messages.begin() + static_cast<std::ptrdiff_t>(messages.size() - per_user_cap));
    }
    result.timelines.push_back(Timeline{user, std::move(messages)});
  }
  return result;
}

std::vector<Document> build_documents(const Timeline& timeline, std::size_t messages_per_doc,
                                      const StopWords& stopwords) {
  if (messages_per_doc == 0) {
    throw ConfigError("messages per document must be at least 1");
  }
  std::vector<Document> docs;
  const auto& msgs = timeline.messages;
  for (std::size_t start = 0, index = 0; start < msgs.size(); start += messages_per_doc, ++index) {
    Document doc;
    doc.doc_id = timeline.user + "#" + std::to_string(index);
    doc.user = timeline.user;
    const std::size_t end = std::min(msgs.size(), start + messages_per_doc);
    for (std::size_t i = start; i < end; ++i) {
      doc.source_message_ids.push_back(msgs[i].id);
      auto toks = clean_and_tokenize(msgs[i].text, stopwords, TokenizeMode::topic);
      doc.tokens.insert(doc.tokens.end(), std::make_move_iterator(toks.begin()),
                        std::make_move_iterator(toks.end()));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

StopWords load_stopwords(const std::filesystem::path& path) {
  StopWords words;
  const std::string content = read_file(path);
  for (auto line : split(content, '\n')) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    words.insert(normalize_word(line));
  }
  return words;
}

const StopWords& default_stopwords() {
  static const StopWords words = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
      "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
      "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during",
      "each", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
      "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into",
      "is", "it", "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor",
      "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
      "ourselves", "out", "over", "own", "same", "she", "should", "so", "some", "such",
      "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
      "these", "they", "this", "those", "through", "to", "too", "under", "until", "up",
      "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom",
      "why", "will", "with", "would", "you", "your", "yours", "yourself", "yourselves",
      "im", "ive", "youre", "dont", "doesnt", "didnt", "isnt", "arent", "wasnt", "cant",
      "wont", "rt", "via", "u", "ur"};
  return words;
}

}  // namespace spamprop
