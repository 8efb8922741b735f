#include "deid/core.hpp"

#include "deid/unicode.hpp"

#include <algorithm>
#include <cctype>
#include <tuple>

namespace deid {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidUtf8: return "InvalidUtf8";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::SurfaceMismatch: return "SurfaceMismatch";
    case ErrorCode::XmlMalformed: return "XmlMalformed";
    case ErrorCode::MissingTextElement: return "MissingTextElement";
    case ErrorCode::MultipleTextElements: return "MultipleTextElements";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::SpanMismatch: return "SpanMismatch";
    case ErrorCode::EmptyLexicon: return "EmptyLexicon";
    case ErrorCode::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::OffsetMismatch: return "OffsetMismatch";
    case ErrorCode::CrossDocumentSpans: return "CrossDocumentSpans";
    case ErrorCode::OverlappingSpans: return "OverlappingSpans";
    case ErrorCode::MissingSurrogateSource: return "MissingSurrogateSource";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::InvalidSettings: return "InvalidSettings";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string_view type_label(EntityType t) {
  switch (t) {
    case EntityType::Name: return "NAME";
    case EntityType::Date: return "DATE";
    case EntityType::Age: return "AGE";
    case EntityType::Location: return "LOCATION";
    case EntityType::Profession: return "PROFESSION";
    case EntityType::Id: return "ID";
    case EntityType::Contact: return "CONTACT";
    case EntityType::Phi: return "PHI";
  }
  return "PHI";
}

std::string_view type_placeholder_name(EntityType t) {
  switch (t) {
    case EntityType::Name: return "Name";
    case EntityType::Date: return "Date";
    case EntityType::Age: return "Age";
    case EntityType::Location: return "Location";
    case EntityType::Profession: return "Profession";
    case EntityType::Id: return "Id";
    case EntityType::Contact: return "Contact";
    case EntityType::Phi: return "Phi";
  }
  return "Phi";
}

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::optional<EntityType> parse_entity_type(std::string_view s) {
  for (auto t : kAllEntityTypes) {
    if (iequals(s, type_label(t))) return t;
  }
  return std::nullopt;
}

std::string_view source_label(SpanSource s) {
  switch (s) {
    case SpanSource::Dictionary: return "dictionary";
    case SpanSource::Rule: return "rule";
    case SpanSource::Model: return "model";
    case SpanSource::Manual: return "manual";
  }
  return "manual";
}

std::optional<SpanSource> parse_span_source(std::string_view s) {
  for (auto src : {SpanSource::Dictionary, SpanSource::Rule, SpanSource::Model, SpanSource::Manual}) {
    if (iequals(s, source_label(src))) return src;
  }
  return std::nullopt;
}

std::string_view action_label(MaskAction a) {
  switch (a) {
    case MaskAction::Redact: return "redact";
    case MaskAction::Replace: return "replace";
    case MaskAction::Ignore: return "ignore";
  }
  return "ignore";
}

std::optional<MaskAction> parse_action(std::string_view s) {
  for (auto a : {MaskAction::Redact, MaskAction::Replace, MaskAction::Ignore}) {
    if (iequals(s, action_label(a))) return a;
  }
  return std::nullopt;
}

Document::Document(std::string id, std::string text, DocumentFormat format, std::string file_name)
    : id_(std::move(id)),
      text_(std::move(text)),
      chars_(utf8_to_u32(text_)),
      format_(format),
      file_name_(std::move(file_name)) {}

std::string Document::substr(std::size_t start, std::size_t end) const {
  if (start > end || end > chars_.size()) {
    throw Error(ErrorCode::OutOfBounds, "substring [" + std::to_string(start) + "," + std::to_string(end) +
                                            ") outside document of length " + std::to_string(chars_.size()));
  }
  return u32_to_utf8(std::u32string_view(chars_).substr(start, end - start));
}

bool span_less(const EntitySpan& a, const EntitySpan& b) {
  return std::tuple(a.start, a.end, type_rank(a.etype), static_cast<int>(a.source), a.surface) <
         std::tuple(b.start, b.end, type_rank(b.etype), static_cast<int>(b.source), b.surface);
}

void sort_spans(std::vector<EntitySpan>& spans) { std::sort(spans.begin(), spans.end(), span_less); }

bool span_overlaps(const EntitySpan& a, const EntitySpan& b) {
  return std::max(a.start, b.start) < std::min(a.end, b.end);
}

std::vector<EntitySpan> validate_spans(const Document& doc, std::vector<EntitySpan> spans) {
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > doc.length()) {
      throw Error(ErrorCode::OutOfBounds, "span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                                              ") invalid for document '" + doc.id() + "' of length " +
                                              std::to_string(doc.length()));
    }
    if (doc.substr(s.start, s.end) != s.surface) {
      throw Error(ErrorCode::SurfaceMismatch, "span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                                                  ") surface '" + s.surface + "' does not match document text '" +
                                                  doc.substr(s.start, s.end) + "'");
    }
  }
  sort_spans(spans);
  return spans;
}

EntitySpan make_span(const Document& doc, std::size_t start, std::size_t end, EntityType etype,
                     SpanSource source) {
  return EntitySpan{start, end, etype, source, doc.substr(start, end)};
}

DeidSettings::DeidSettings() {
  for (auto t : kAllEntityTypes) actions[t] = MaskAction::Redact;
}

MaskAction DeidSettings::action_for(EntityType t) const {
  auto it = actions.find(t);
  return it == actions.end() ? MaskAction::Redact : it->second;
}

bool DeidSettings::any_replace() const {
  return std::any_of(actions.begin(), actions.end(),
                     [](const auto& kv) { return kv.second == MaskAction::Replace; });
}

void DeidSettings::validate() const {
  if (!(risk_threshold >= 0.0 && risk_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidSettings, "risk_threshold must lie in [0,1], got " + std::to_string(risk_threshold));
  }
  if (context_radius_words < 1) {
    throw Error(ErrorCode::InvalidSettings, "context_radius_words must be >= 1");
  }
  if (model.timeout_ms <= 0) {
    throw Error(ErrorCode::InvalidSettings, "model timeout must be positive");
  }
  for (const auto& [t, entries] : custom_dictionaries) {
    for (const auto& e : entries) {
      if (e.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error(ErrorCode::InvalidSettings,
                    "custom dictionary for " + std::string(type_label(t)) + " contains an empty entry");
      }
    }
  }
}

std::string placeholder_for(EntityType t) { return "XXX-" + std::string(type_placeholder_name(t)); }

}  // namespace deid
