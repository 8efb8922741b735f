/**
 * @file masking.hpp
 * @brief Redaction and surrogate replacement of merged spans.
 *
 * Spans are rendered left to right; the span map records where each one
 * landed in the masked text (code points). Replacement draws from a seeded
 * mt19937_64 so that identical inputs give identical output on every
 * platform.
 */
#pragma once

#include "deid/core.hpp"
#include "deid/ingestion.hpp"

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace deid {

struct SurrogateSources {
  Lexicon surnames;
  Lexicon full_names;
  Lexicon locations;
  Lexicon professions;
  int age_delta_max = 5;
  int date_month_delta_max = 2;
  /// A drawn shift of zero would leave the original AGE/DATE in place; by
  /// default zero is excluded from the draw.
  bool allow_zero_shift = false;
};

enum class ReplacementScope { PerDocument, PerBatch };

class ReplacementContext {
public:
  explicit ReplacementContext(std::uint64_t seed, ReplacementScope scope = ReplacementScope::PerBatch);

  std::uint64_t seed() const noexcept { return seed_; }
  ReplacementScope scope() const noexcept { return scope_; }
  std::mt19937_64& rng() noexcept { return rng_; }

  /// Surfaces that no surrogate may contain as a whole word. Callers masking
  /// a batch register every replaced surface up front.
  void reserve(const std::string& surface);
  /// Every non-ignored surface; for NAME spans each word of two or more
  /// characters as well.
  void reserve(const std::vector<EntitySpan>& spans, const DeidSettings& settings);
  bool collides(const std::string& candidate) const;

  /// Called before each document; clears the mapping in PerDocument scope.
  void begin_document();

  std::map<ReplacementKey, std::string>& mapping() noexcept { return mapping_; }
  const std::map<ReplacementKey, std::string>& mapping() const noexcept { return mapping_; }

private:
  std::uint64_t seed_;
  ReplacementScope scope_;
  std::mt19937_64 rng_;
  std::set<std::u32string> reserved_;
  std::map<ReplacementKey, std::string> mapping_;
};

/// Uniform integer in [0, n) from the raw 64-bit stream (rejection sampling),
/// independent of the standard library's distribution implementations.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);
/// Uniform integer in [lo, hi].
long long uniform_int(std::mt19937_64& rng, long long lo, long long hi);

/// Placeholders for Redact spans, originals for Ignore spans.
/// Throws Error{OverlappingSpans}, and Error{InvalidSettings} when a span's
/// type is set to Replace.
MaskedDocument redact(const Document& doc, const std::vector<EntitySpan>& spans, const DeidSettings& settings);

/// Full masking with Replace support.
/// Throws Error{OverlappingSpans, MissingSurrogateSource}.
MaskedDocument replace(const Document& doc, const std::vector<EntitySpan>& spans, const DeidSettings& settings,
                       const SurrogateSources& sources, ReplacementContext& ctx);

/// Normalized mapping key: case-folded, inner whitespace collapsed.
std::string normalize_surface(const std::string& surface);

}  // namespace deid
