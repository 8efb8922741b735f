/**
 * @file core.hpp
 * @brief Shared domain types: documents, entity spans, settings, masked output.
 *
 * Spans are half-open intervals [start, end) counted in Unicode scalar values
 * over the document text.
 */
#pragma once

#include "deid/error.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace deid {

enum class EntityType { Name, Date, Age, Location, Profession, Id, Contact, Phi };

inline constexpr std::array<EntityType, 8> kAllEntityTypes = {
    EntityType::Name,       EntityType::Date, EntityType::Age,     EntityType::Location,
    EntityType::Profession, EntityType::Id,   EntityType::Contact, EntityType::Phi};

/// Upper-case label used on the wire and in reports ("NAME").
std::string_view type_label(EntityType t);
/// Title-case name used in placeholders ("Name").
std::string_view type_placeholder_name(EntityType t);
/// Accepts either form, case-insensitively.
std::optional<EntityType> parse_entity_type(std::string_view s);
/// Fixed ordering used for tie-breaking: NAME < DATE < ... < PHI.
inline int type_rank(EntityType t) { return static_cast<int>(t); }

enum class SpanSource { Dictionary, Rule, Model, Manual };
std::string_view source_label(SpanSource s);
std::optional<SpanSource> parse_span_source(std::string_view s);

enum class DocumentFormat { PlainText, I2b2Xml };

class Document {
public:
  Document(std::string id, std::string text, DocumentFormat format = DocumentFormat::PlainText,
           std::string file_name = {});

  const std::string& id() const noexcept { return id_; }
  const std::string& text() const noexcept { return text_; }
  const std::u32string& chars() const noexcept { return chars_; }
  std::size_t length() const noexcept { return chars_.size(); }
  DocumentFormat format() const noexcept { return format_; }
  const std::string& file_name() const noexcept { return file_name_; }

  /// UTF-8 substring over the character interval [start, end).
  std::string substr(std::size_t start, std::size_t end) const;

private:
  std::string id_;
  std::string text_;
  std::u32string chars_;
  DocumentFormat format_;
  std::string file_name_;
};

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityType etype = EntityType::Name;
  SpanSource source = SpanSource::Manual;
  std::string surface;

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

/// Canonical ordering for serialized outputs: (start, end, etype).
bool span_less(const EntitySpan& a, const EntitySpan& b);
void sort_spans(std::vector<EntitySpan>& spans);

bool span_overlaps(const EntitySpan& a, const EntitySpan& b);

/// Checks bounds and surface consistency, then returns the spans sorted.
/// Throws Error{OutOfBounds} or Error{SurfaceMismatch}.
std::vector<EntitySpan> validate_spans(const Document& doc, std::vector<EntitySpan> spans);

/// Builds a span whose surface is taken from the document.
EntitySpan make_span(const Document& doc, std::size_t start, std::size_t end, EntityType etype,
                     SpanSource source);

enum class MaskAction { Redact, Replace, Ignore };
std::string_view action_label(MaskAction a);
std::optional<MaskAction> parse_action(std::string_view s);

enum class RemoteModelName { ClinicalBert, BioBert };

struct ModelSettings {
  enum class Kind { Stub, Remote } kind = Kind::Stub;
  RemoteModelName remote_name = RemoteModelName::ClinicalBert;
  std::string url;  // empty: taken from the environment at run time
  int timeout_ms = 30000;

  friend bool operator==(const ModelSettings&, const ModelSettings&) = default;
};

struct DeidSettings {
  std::map<EntityType, MaskAction> actions;
  ModelSettings model;
  std::map<EntityType, std::vector<std::string>> custom_dictionaries;
  std::uint64_t rng_seed = 0;
  double risk_threshold = 0.5;
  int context_radius_words = 5;

  DeidSettings();

  MaskAction action_for(EntityType t) const;
  bool any_replace() const;
  /// Throws Error{InvalidSettings}.
  void validate() const;

  friend bool operator==(const DeidSettings&, const DeidSettings&) = default;
};

struct MaskedSpan {
  EntitySpan original;
  std::size_t masked_start = 0;
  std::size_t masked_end = 0;
  MaskAction action = MaskAction::Ignore;
  std::string replacement;  // placeholder, surrogate, or the original text for Ignore
  bool fallback = false;    // date could not be parsed; a random date was substituted

  friend bool operator==(const MaskedSpan&, const MaskedSpan&) = default;
};

using ReplacementKey = std::pair<EntityType, std::string>;

struct MaskedDocument {
  std::string doc_id;
  std::string masked_text;
  std::vector<MaskedSpan> span_map;
  std::map<ReplacementKey, std::string> replacement_map;
  std::uint64_t seed = 0;

  friend bool operator==(const MaskedDocument&, const MaskedDocument&) = default;
};

std::string placeholder_for(EntityType t);

}  // namespace deid
