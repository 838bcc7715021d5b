#pragma once

#include <span>
#include <string>
#include <vector>

#include "spamprop/ingest.hpp"

namespace spamprop {

using Shingle = std::vector<std::string>;

/// All windows of four consecutive tokens; a message shorter than four
/// tokens yields its whole token sequence as a single shingle.
std::vector<Shingle> four_grams(const TokenList& tokens);

struct GroupInput {
  std::string message_id;
  std::string author;
  TokenList tokens;
};

struct GroupMember {
  std::string message_id;
  std::string author;
  friend bool operator==(const GroupMember&, const GroupMember&) = default;
};

/// A set of near-duplicate messages. group_id is the smallest member id.
struct MessageGroup {
  std::string group_id;
  std::vector<GroupMember> members;  // sorted by message id

  std::size_t size() const { return members.size(); }
  std::vector<std::string> authors() const;  // sorted, unique
  friend bool operator==(const MessageGroup&, const MessageGroup&) = default;
};

/// Connected components of the link relation, singletons dropped, sorted by
/// group_id. Message ids must be unique.
std::vector<MessageGroup> group_similar(std::span<const GroupInput> messages);

}  // namespace spamprop
