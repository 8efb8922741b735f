#pragma once

#include "deid/core.hpp"
#include "deid/ingestion.hpp"
#include "deid/unicode.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace deid {

/// Trie over lexicon entries. Immutable after construction; scanning is
/// read-only and safe to share across threads.
class CompiledLexicon {
public:
  /// Throws Error{EmptyLexicon}.
  explicit CompiledLexicon(const Lexicon& lexicon, bool case_insensitive = true,
                           SpanSource source = SpanSource::Dictionary);

  EntityType etype() const noexcept { return etype_; }
  SpanSource source() const noexcept { return source_; }
  bool case_insensitive() const noexcept { return case_insensitive_; }
  std::size_t entry_count() const noexcept { return entries_.size(); }

  /// Longest entry matching text at `pos` that ends on a word boundary.
  /// Returns the end offset, or 0 if nothing matches.
  std::size_t longest_match_at(const std::u32string& text, std::size_t pos) const;

private:
  struct Node {
    std::unordered_map<char32_t, std::uint32_t> next;
    int entry = -1;
  };

  EntityType etype_;
  SpanSource source_;
  bool case_insensitive_;
  std::vector<std::string> entries_;
  std::vector<Node> nodes_;
};

CompiledLexicon compile(const Lexicon& lexicon, bool case_insensitive = true);

struct DictionaryOptions {
  /// Honorifics that never form part of a span.
  std::vector<std::string> titles{"Dr", "Mr", "Mrs", "Ms", "Prof"};
};

/// Leftmost-longest, non-overlapping matches per lexicon, at word boundaries,
/// with honorific titles stripped from the start of any match.
std::vector<EntitySpan> scan(const Document& doc, const std::vector<CompiledLexicon>& lexicons,
                             const DictionaryOptions& options = {});

/// Word-boundary rule shared with the other recognizers: a boundary exists
/// between `before` and `after` unless both are word characters.
inline bool is_boundary(const std::u32string& text, std::size_t pos) {
  if (pos == 0 || pos >= text.size()) return true;
  return !(is_word_char(text[pos - 1]) && is_word_char(text[pos]));
}

}  // namespace deid
