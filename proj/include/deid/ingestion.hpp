/**
 * @file ingestion.hpp
 * @brief Loading of clinical letters (plain text, i2b2 XML), gold annotations
 *        and lexicon files.
 */
#pragma once

#include "deid/core.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace deid {

struct GoldAnnotation {
  std::string doc_id;
  std::vector<EntitySpan> spans;  // source == Manual, sorted
};

/// A word list for one entity type. `folded` holds the case-folded copy of
/// each entry at the same index.
struct Lexicon {
  EntityType etype = EntityType::Name;
  std::vector<std::string> entries;
  std::vector<std::string> folded;

  bool empty() const noexcept { return entries.empty(); }
  std::size_t size() const noexcept { return entries.size(); }
};

/// Extracts the single TEXT element of an i2b2-style letter.
/// Throws Error{XmlMalformed, MissingTextElement, MultipleTextElements}.
Document load_letter_xml(std::string_view bytes, std::string doc_id = {}, std::string file_name = {});

Document load_letter_text(std::string_view bytes, std::string doc_id, std::string file_name = {});

/// Reads .xml or .txt by extension; the document id is the file stem.
Document load_letter_file(const std::filesystem::path& path);

/// Maps an i2b2 category or sub-category label (DOCTOR, HOSPITAL, PHONE, ...)
/// to the entity taxonomy. Returns nullopt for unknown labels.
std::optional<EntityType> map_i2b2_category(std::string_view label);

/// Reads annotation elements carrying start/end/TYPE attributes.
/// Throws Error{UnknownCategory, SpanMismatch, XmlMalformed}.
GoldAnnotation load_gold_annotations(std::string_view bytes, const Document& doc);

/// Serializes a letter (and optional annotations) in the i2b2 layout.
std::string write_letter_xml(const Document& doc, const std::vector<EntitySpan>& annotations = {});

/// First CSV column, RFC 4180 quoting, optional "name" header row.
/// Throws Error{EmptyLexicon}.
Lexicon load_lexicon_csv(std::string_view bytes, EntityType etype);
/// One entry per line. Throws Error{EmptyLexicon}.
Lexicon load_lexicon_lines(std::string_view bytes, EntityType etype);
Lexicon load_lexicon_file(const std::filesystem::path& path, EntityType etype);
Lexicon make_lexicon(EntityType etype, const std::vector<std::string>& entries);

/// Parses RFC 4180 CSV into rows of fields.
std::vector<std::vector<std::string>> parse_csv(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace deid
