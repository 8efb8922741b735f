#include "deid/merger.hpp"

#include <doctest.h>

#include <random>

using namespace deid;

namespace {

const Document kDoc("d", "Dr Beverly Thiel of Clarkfield, seen 2071-01-15, 45 years old, in North Haven today.");

EntitySpan span(std::size_t s, std::size_t e, EntityType t, SpanSource src) { return make_span(kDoc, s, e, t, src); }

}  // namespace

TEST_CASE("longer spans beat shorter overlapping ones") {
  const auto full = span(3, 16, EntityType::Name, SpanSource::Model);
  const auto first = span(3, 10, EntityType::Name, SpanSource::Dictionary);
  const auto last = span(11, 16, EntityType::Name, SpanSource::Manual);
  const auto merged = merge({first, last, full});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0] == full);
}

TEST_CASE("equal extents fall back to source priority, then type order") {
  const auto dict = span(20, 30, EntityType::Location, SpanSource::Dictionary);
  const auto model = span(20, 30, EntityType::Name, SpanSource::Model);
  CHECK(merge({model, dict}) == std::vector<EntitySpan>{dict});

  MergePolicy model_first;
  model_first.priority = {SpanSource::Model, SpanSource::Manual, SpanSource::Dictionary, SpanSource::Rule};
  CHECK(merge({model, dict}, model_first) == std::vector<EntitySpan>{model});

  // Same source, same extent: NAME ranks before LOCATION.
  const auto a = span(20, 30, EntityType::Location, SpanSource::Rule);
  const auto b = span(20, 30, EntityType::Name, SpanSource::Rule);
  CHECK(merge({a, b}) == std::vector<EntitySpan>{b});
}

TEST_CASE("exact duplicates collapse to the best source") {
  const auto dict = span(37, 47, EntityType::Date, SpanSource::Dictionary);
  const auto rule = span(37, 47, EntityType::Date, SpanSource::Rule);
  const auto model = span(37, 47, EntityType::Date, SpanSource::Model);
  CHECK(merge({model, rule, dict}) == std::vector<EntitySpan>{dict});
  MergePolicy compat;
  compat.overlap = OverlapRule::KeepAllCompat;
  CHECK(merge({model, rule, dict}, compat) == std::vector<EntitySpan>{dict});
}

TEST_CASE("compat merging keeps overlaps") {
  MergePolicy compat;
  compat.overlap = OverlapRule::KeepAllCompat;
  const auto name = span(20, 30, EntityType::Name, SpanSource::Model);
  const auto loc = span(20, 30, EntityType::Location, SpanSource::Dictionary);
  const auto merged = merge({name, loc}, compat);
  CHECK(merged.size() == 2);
}

TEST_CASE("span sets must name one document") {
  SpanSet a{"d", {span(3, 10, EntityType::Name, SpanSource::Model)}};
  SpanSet b{"e", {}};
  CHECK_THROWS_AS(merge(std::vector<SpanSet>{a, b}), Error);
  try {
    merge(std::vector<SpanSet>{a, b});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CrossDocumentSpans);
  }
  CHECK(merge(std::vector<SpanSet>{a, SpanSet{"d", {}}}).size() == 1);
}

TEST_CASE("priority lists must be permutations") {
  MergePolicy p;
  p.priority = {SpanSource::Model, SpanSource::Model, SpanSource::Rule, SpanSource::Manual};
  CHECK_THROWS_AS(p.validate(), Error);
  CHECK_THROWS_AS(merge(std::vector<EntitySpan>{}, p), Error);
}

TEST_CASE("merge output is ordered, disjoint, idempotent and a subset") {
  std::mt19937_64 rng(42);
  const std::array sources{SpanSource::Manual, SpanSource::Dictionary, SpanSource::Rule, SpanSource::Model};
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<EntitySpan> spans;
    const auto n = rng() % 15;
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = rng() % 70;
      const auto e = s + 1 + rng() % 12;
      spans.push_back(span(s, e, kAllEntityTypes[rng() % 8], sources[rng() % 4]));
    }
    const auto merged = merge(spans);
    for (std::size_t i = 1; i < merged.size(); ++i) {
      CHECK(merged[i - 1].end <= merged[i].start);
    }
    for (const auto& m : merged) CHECK(std::find(spans.begin(), spans.end(), m) != spans.end());
    // Every input span is either kept or overlaps a kept span.
    for (const auto& s : spans) {
      CHECK(std::any_of(merged.begin(), merged.end(), [&](const EntitySpan& m) { return span_overlaps(s, m); }));
    }
    CHECK(merge(merged) == merged);
    auto shuffled = spans;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(merge(shuffled) == merged);
  }
}
