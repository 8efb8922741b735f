#include "deid/merger.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace deid {

int MergePolicy::rank(SpanSource s) const {
  for (std::size_t i = 0; i < priority.size(); ++i) {
    if (priority[i] == s) return static_cast<int>(i);
  }
  return static_cast<int>(priority.size());
}

void MergePolicy::validate() const {
  std::set<SpanSource> seen(priority.begin(), priority.end());
  if (seen.size() != priority.size()) {
    throw Error(ErrorCode::InvalidArgument, "merge priority must list each source exactly once");
  }
}

namespace {

// Exact (start, end, type) duplicates collapse to the best-ranked source.
std::vector<EntitySpan> dedupe(std::vector<EntitySpan> spans, const MergePolicy& policy) {
  std::sort(spans.begin(), spans.end(), [&](const EntitySpan& a, const EntitySpan& b) {
    return std::tuple(a.start, a.end, type_rank(a.etype), policy.rank(a.source)) <
           std::tuple(b.start, b.end, type_rank(b.etype), policy.rank(b.source));
  });
  std::vector<EntitySpan> out;
  for (auto& s : spans) {
    if (!out.empty() && out.back().start == s.start && out.back().end == s.end && out.back().etype == s.etype) continue;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<EntitySpan> merge(std::vector<EntitySpan> spans, const MergePolicy& policy) {
  policy.validate();
  auto unique = dedupe(std::move(spans), policy);
  if (policy.overlap == OverlapRule::KeepAllCompat) {
    sort_spans(unique);
    return unique;
  }

  std::stable_sort(unique.begin(), unique.end(), [&](const EntitySpan& a, const EntitySpan& b) {
    return std::tuple(-static_cast<long long>(a.length()), policy.rank(a.source), type_rank(a.etype), a.start) <
           std::tuple(-static_cast<long long>(b.length()), policy.rank(b.source), type_rank(b.etype), b.start);
  });
  std::vector<EntitySpan> kept;
  for (auto& s : unique) {
    const bool clash =
        std::any_of(kept.begin(), kept.end(), [&](const EntitySpan& k) { return span_overlaps(k, s); });
    if (!clash) kept.push_back(std::move(s));
  }
  sort_spans(kept);
  return kept;
}

std::vector<EntitySpan> merge(const std::vector<SpanSet>& sets, const MergePolicy& policy) {
  std::vector<EntitySpan> all;
  for (const auto& set : sets) {
    if (set.doc_id != sets.front().doc_id) {
      throw Error(ErrorCode::CrossDocumentSpans,
                  "cannot merge spans of '" + sets.front().doc_id + "' with spans of '" + set.doc_id + "'");
    }
    all.insert(all.end(), set.spans.begin(), set.spans.end());
  }
  return merge(std::move(all), policy);
}

}  // namespace deid
