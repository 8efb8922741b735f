#pragma once

// Union of recognizer outputs into one span set per document.

#include "deid/core.hpp"

#include <array>
#include <string>
#include <vector>

namespace deid {

enum class OverlapRule { LongestThenPriority, KeepAllCompat };

struct MergePolicy {
  /// Highest priority first. Must be a permutation of the four sources.
  std::array<SpanSource, 4> priority{SpanSource::Manual, SpanSource::Dictionary, SpanSource::Rule, SpanSource::Model};
  OverlapRule overlap = OverlapRule::LongestThenPriority;

  /// Position of `s` in the priority list (0 is best).
  int rank(SpanSource s) const;
  /// Throws Error{InvalidArgument}.
  void validate() const;
};

/// Spans produced by one recognizer for one document.
struct SpanSet {
  std::string doc_id;
  std::vector<EntitySpan> spans;
};

/// Throws Error{CrossDocumentSpans} when the sets name different documents.
std::vector<EntitySpan> merge(const std::vector<SpanSet>& sets, const MergePolicy& policy = {});

/// Single-document convenience form.
std::vector<EntitySpan> merge(std::vector<EntitySpan> spans, const MergePolicy& policy = {});

}  // namespace deid
