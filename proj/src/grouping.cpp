#include "spamprop/grouping.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "spamprop/error.hpp"

namespace spamprop {

namespace {

// Tokens never contain whitespace or control bytes, so a unit separator
// gives an unambiguous key.
std::string join_key(const TokenList& tokens, std::size_t begin, std::size_t len) {
  std::string key;
  for (std::size_t i = begin; i < begin + len; ++i) {
    if (i > begin) key.push_back('\x1f');
    key += tokens[i];
  }
  return key;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned char> rank_;
};

}  // namespace

std::vector<Shingle> four_grams(const TokenList& tokens) {
  std::vector<Shingle> out;
  if (tokens.empty()) return out;
  if (tokens.size() < 4) {
    out.push_back(tokens);
    return out;
  }
  for (std::size_t i = 0; i + 4 <= tokens.size(); ++i) {
    out.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                     tokens.begin() + static_cast<std::ptrdiff_t>(i + 4));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> MessageGroup::authors() const {
  std::vector<std::string> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.author);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<MessageGroup> group_similar(std::span<const GroupInput> messages) {
  const auto n = messages.size();
  {
    std::unordered_set<std::string_view> ids;
    for (const auto& m : messages) {
      if (!ids.insert(m.message_id).second) {
        throw DataError("duplicate message id '" + m.message_id + "' in grouping input");
      }
    }
  }

  UnionFind uf(n);
  // Four-gram buckets: first message seen with each window.
  std::unordered_map<std::string, std::size_t> first_with;
  // Full token sequences of short messages, keyed the same way.
  std::unordered_map<std::string, std::size_t> short_owner;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& toks = messages[i].tokens;
    if (!toks.empty() && toks.size() < 4) {
      auto [it, inserted] = short_owner.emplace(join_key(toks, 0, toks.size()), i);
      if (!inserted) uf.unite(i, it->second);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& toks = messages[i].tokens;
    if (toks.size() >= 4) {
      for (std::size_t s = 0; s + 4 <= toks.size(); ++s) {
        auto [it, inserted] = first_with.emplace(join_key(toks, s, 4), i);
        if (!inserted) uf.unite(i, it->second);
      }
    }
    if (short_owner.empty()) continue;
    // Short-message rule: any contiguous window of length 1..3 that equals a
    // short message's full sequence links the two.
    for (std::size_t len = 1; len < 4 && len <= toks.size(); ++len) {
      for (std::size_t s = 0; s + len <= toks.size(); ++s) {
        auto it = short_owner.find(join_key(toks, s, len));
        if (it != short_owner.end()) uf.unite(i, it->second);
      }
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < n; ++i) components[uf.find(i)].push_back(i);
  std::vector<MessageGroup> groups;
  for (auto& [root, idx] : components) {
    if (idx.size() < 2) continue;
    MessageGroup g;
    g.members.reserve(idx.size());
    for (auto i : idx) g.members.push_back({messages[i].message_id, messages[i].author});
    std::sort(g.members.begin(), g.members.end(),
              [](const auto& a, const auto& b) { return a.message_id < b.message_id; });
    g.group_id = g.members.front().message_id;
    groups.push_back(std::move(g));
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.group_id < b.group_id; });
  return groups;
}

}  // namespace spamprop
