#include "deid/dictionary.hpp"

#include "deid/unicode.hpp"

namespace deid {

CompiledLexicon::CompiledLexicon(const Lexicon& lexicon, bool case_insensitive, SpanSource source)
    : etype_(lexicon.etype), source_(source), case_insensitive_(case_insensitive), entries_(lexicon.entries) {
  if (lexicon.empty()) {
    throw Error(ErrorCode::EmptyLexicon, "cannot compile an empty " + std::string(type_label(lexicon.etype)) +
                                             " lexicon");
  }
  nodes_.emplace_back();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto key = utf8_to_u32(entries_[i]);
    if (key.empty()) continue;
    if (case_insensitive_) key = fold_case(key);
    std::uint32_t node = 0;
    for (char32_t c : key) {
      auto it = nodes_[node].next.find(c);
      if (it == nodes_[node].next.end()) {
        nodes_.emplace_back();
        const auto child = static_cast<std::uint32_t>(nodes_.size() - 1);
        nodes_[node].next.emplace(c, child);
        node = child;
      } else {
        node = it->second;
      }
    }
    if (nodes_[node].entry < 0) nodes_[node].entry = static_cast<int>(i);
  }
}

std::size_t CompiledLexicon::longest_match_at(const std::u32string& text, std::size_t pos) const {
  std::size_t best = 0;
  std::uint32_t node = 0;
  for (std::size_t i = pos; i < text.size(); ++i) {
    const char32_t c = case_insensitive_ ? fold_case(text[i]) : text[i];
    auto it = nodes_[node].next.find(c);
    if (it == nodes_[node].next.end()) break;
    node = it->second;
    if (nodes_[node].entry >= 0 && is_boundary(text, i + 1)) best = i + 1;
  }
  return best;
}

CompiledLexicon compile(const Lexicon& lexicon, bool case_insensitive) {
  return CompiledLexicon(lexicon, case_insensitive);
}

namespace {

/// Length of a leading title token ("Dr", "Dr.") plus following whitespace
/// inside [start, end), or 0. Returns `end - start` when the whole range is a
/// title.
std::size_t title_prefix(const std::u32string& text, std::size_t start, std::size_t end,
                         const std::vector<std::u32string>& titles) {
  for (const auto& title : titles) {
    const auto n = title.size();
    if (n == 0 || start + n > end) continue;
    bool same = true;
    for (std::size_t k = 0; k < n && same; ++k) same = fold_case(text[start + k]) == title[k];
    if (!same) continue;
    std::size_t p = start + n;
    if (p < end && is_word_char(text[p])) continue;  // "Drake" is not "Dr"
    if (p < end && text[p] == U'.') ++p;
    if (p == end) return end - start;
    if (!is_space(text[p])) continue;
    while (p < end && is_space(text[p])) ++p;
    return p - start;
  }
  return 0;
}

}  // namespace

std::vector<EntitySpan> scan(const Document& doc, const std::vector<CompiledLexicon>& lexicons,
                             const DictionaryOptions& options) {
  std::vector<std::u32string> titles;
  for (const auto& t : options.titles) titles.push_back(fold_case(utf8_to_u32(t)));

  const auto& text = doc.chars();
  std::vector<EntitySpan> out;
  for (const auto& lex : lexicons) {
    std::size_t i = 0;
    while (i < text.size()) {
      if (!is_boundary(text, i)) {
        ++i;
        continue;
      }
      const auto end = lex.longest_match_at(text, i);
      if (end == 0) {
        ++i;
        continue;
      }
      std::size_t start = i;
      // Titles may repeat ("Prof. Dr. X"), strip them all.
      for (std::size_t cut; start < end && (cut = title_prefix(text, start, end, titles)) > 0;) start += cut;
      if (start < end) out.push_back(make_span(doc, start, end, lex.etype(), lex.source()));
      i = end;
    }
  }
  sort_spans(out);
  return out;
}

}  // namespace deid
