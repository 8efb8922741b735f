#include "deid/core.hpp"
#include "deid/serialize.hpp"
#include "deid/unicode.hpp"

#include <doctest.h>

#include <functional>

using namespace deid;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("utf8 round trip and length") {
  const std::string s = "Zoë \xE2\x82\xAC \xF0\x9F\x98\x80 a";  // e-diaeresis, euro, emoji
  const auto u = utf8_to_u32(s);
  CHECK(u.size() == 9);
  CHECK(utf8_length(s) == 9);
  CHECK(u[2] == U'ë');
  CHECK(u[4] == U'€');
  CHECK(u[6] == U'\U0001F600');
  CHECK(u32_to_utf8(u) == s);
}

TEST_CASE("invalid utf8 is rejected") {
  for (const std::string bad : {std::string("\xC3"), std::string("\xFF"), std::string("a\x80"),
                                std::string("\xED\xA0\x80"), std::string("\xC0\xAF")}) {
    CHECK(code_of([&] { utf8_to_u32(bad); }) == ErrorCode::InvalidUtf8);
  }
}

TEST_CASE("case folding and character classes") {
  CHECK(fold_case_utf8("ÉCOLE Straße ΑΒΓ Дом") == "école straße αβγ дом");
  CHECK(is_word_char(U'a'));
  CHECK(is_word_char(U'7'));
  CHECK(is_word_char(U'é'));
  CHECK_FALSE(is_word_char(U'-'));
  CHECK_FALSE(is_word_char(U'×'));  // multiplication sign
  CHECK(is_space(U'\n'));
  CHECK(is_space(U' '));
  CHECK(is_upper(U'Ö'));
  CHECK_FALSE(is_upper(U'ö'));
}

TEST_CASE("document offsets are code points") {
  const Document doc("d", "Zoë Ödegaard, 45 yo");
  CHECK(doc.length() == 19);
  CHECK(doc.substr(4, 12) == "Ödegaard");
  const auto s = make_span(doc, 4, 12, EntityType::Name, SpanSource::Dictionary);
  CHECK(s.surface == "Ödegaard");
  CHECK(s.length() == 8);
}

TEST_CASE("validate_spans") {
  const Document doc("d", "Seen by Dr Smith.");
  auto good = make_span(doc, 11, 16, EntityType::Name, SpanSource::Rule);
  auto early = make_span(doc, 0, 4, EntityType::Name, SpanSource::Rule);
  const auto sorted = validate_spans(doc, {good, early});
  REQUIRE(sorted.size() == 2);
  CHECK(sorted[0].start == 0);

  auto out = good;
  out.end = 40;
  CHECK(code_of([&] { validate_spans(doc, {out}); }) == ErrorCode::OutOfBounds);
  auto inverted = good;
  inverted.start = 16;
  inverted.end = 11;
  CHECK(code_of([&] { validate_spans(doc, {inverted}); }) == ErrorCode::OutOfBounds);
  auto wrong = good;
  wrong.surface = "Smyth";
  CHECK(code_of([&] { validate_spans(doc, {wrong}); }) == ErrorCode::SurfaceMismatch);
}

TEST_CASE("labels parse both spellings") {
  for (auto t : kAllEntityTypes) {
    CHECK(parse_entity_type(type_label(t)) == t);
    CHECK(parse_entity_type(type_placeholder_name(t)) == t);
  }
  CHECK(placeholder_for(EntityType::Profession) == "XXX-Profession");
  CHECK(placeholder_for(EntityType::Id) == "XXX-Id");
  CHECK_FALSE(parse_entity_type("DOCTOR").has_value());
  CHECK(parse_action("Replace") == MaskAction::Replace);
  CHECK_FALSE(parse_action("erase").has_value());
}

TEST_CASE("settings defaults and validation") {
  DeidSettings s;
  for (auto t : kAllEntityTypes) CHECK(s.action_for(t) == MaskAction::Redact);
  CHECK_FALSE(s.any_replace());
  s.actions[EntityType::Age] = MaskAction::Replace;
  CHECK(s.any_replace());

  s.risk_threshold = 1.5;
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::InvalidSettings);
  s.risk_threshold = 1.0;
  s.context_radius_words = 0;
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::InvalidSettings);
  s.context_radius_words = 1;
  s.custom_dictionaries[EntityType::Name] = {"  "};
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::InvalidSettings);
}

TEST_CASE("settings json round trip") {
  DeidSettings s;
  s.actions[EntityType::Name] = MaskAction::Replace;
  s.actions[EntityType::Phi] = MaskAction::Ignore;
  s.model.kind = ModelSettings::Kind::Remote;
  s.model.remote_name = RemoteModelName::BioBert;
  s.model.url = "http://127.0.0.1:9";
  s.custom_dictionaries[EntityType::Location] = {"Millbrook"};
  s.rng_seed = 18446744073709551615ull;
  s.risk_threshold = 0.35;
  s.context_radius_words = 3;
  const auto j = settings_to_json(s);
  CHECK(settings_from_json(j) == s);
  CHECK(settings_from_json(nlohmann::json::parse(j.dump())) == s);
}

TEST_CASE("settings json rejects bad input") {
  using nlohmann::json;
  for (const auto& bad : {json{{"colour", "red"}}, json{{"actions", {{"DOCTOR", "redact"}}}},
                          json{{"actions", {{"NAME", "erase"}}}}, json{{"risk_threshold", 1.5}},
                          json{{"risk_threshold", "high"}}, json{{"context_radius_words", 0}},
                          json{{"model", {{"kind", "oracle"}}}}}) {
    CAPTURE(bad.dump());
    const auto code = code_of([&] { settings_from_json(bad); });
    CHECK((code == ErrorCode::InvalidSettings || code == ErrorCode::UnknownCategory));
  }
  CHECK(settings_from_json(json::object()) == DeidSettings{});
}

TEST_CASE("span and masked json round trip") {
  const Document doc("d", "Ana, 45 yo");
  const std::vector<EntitySpan> spans{make_span(doc, 0, 3, EntityType::Name, SpanSource::Model),
                                      make_span(doc, 5, 10, EntityType::Age, SpanSource::Rule)};
  CHECK(spans_from_json(spans_to_json(spans)) == spans);

  MaskedDocument m;
  m.doc_id = "d";
  m.masked_text = "XXX-Name, 45 yo";
  m.seed = 7;
  MaskedSpan ms;
  ms.original = spans[0];
  ms.masked_start = 0;
  ms.masked_end = 8;
  ms.action = MaskAction::Redact;
  ms.replacement = "XXX-Name";
  m.span_map.push_back(ms);
  m.replacement_map[{EntityType::Name, "ana"}] = "Kim";
  CHECK(masked_from_json(masked_to_json(m)) == m);
}

TEST_CASE("dump_pretty is stable") {
  const nlohmann::json j{{"b", 1}, {"a", {1, 2}}};
  CHECK(dump_pretty(j) == "{\n  \"a\": [\n    1,\n    2\n  ],\n  \"b\": 1\n}\n");
}
