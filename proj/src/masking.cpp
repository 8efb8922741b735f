#include "deid/masking.hpp"

#include "deid/dates.hpp"
#include "deid/dictionary.hpp"
#include "deid/unicode.hpp"

#include <algorithm>
#include <limits>

namespace deid {

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "uniform_below needs a positive bound");
  const auto max = std::numeric_limits<std::uint64_t>::max();
  const auto limit = max - max % n;
  while (true) {
    const auto x = rng();
    if (x < limit) return x % n;
  }
}

long long uniform_int(std::mt19937_64& rng, long long lo, long long hi) {
  if (hi < lo) throw Error(ErrorCode::InvalidArgument, "uniform_int with an empty range");
  return lo + static_cast<long long>(uniform_below(rng, static_cast<std::uint64_t>(hi - lo) + 1));
}

std::string normalize_surface(const std::string& surface) {
  const auto folded = fold_case(utf8_to_u32(surface));
  std::u32string out;
  bool pending_space = false;
  for (auto c : folded) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return u32_to_utf8(out);
}

ReplacementContext::ReplacementContext(std::uint64_t seed, ReplacementScope scope)
    : seed_(seed), scope_(scope), rng_(seed) {}

void ReplacementContext::reserve(const std::string& surface) {
  auto folded = fold_case(utf8_to_u32(normalize_surface(surface)));
  if (!folded.empty()) reserved_.insert(std::move(folded));
}

void ReplacementContext::reserve(const std::vector<EntitySpan>& spans, const DeidSettings& settings) {
  for (const auto& s : spans) {
    if (settings.action_for(s.etype) == MaskAction::Ignore) continue;
    reserve(s.surface);
    // A surrogate must not repeat the surname or given name of a full name.
    if (s.etype != EntityType::Name) continue;
    const auto norm = normalize_surface(s.surface);
    for (std::size_t b = 0; b < norm.size();) {
      auto e = norm.find(' ', b);
      if (e == std::string::npos) e = norm.size();
      if (e > b && utf8_length(std::string_view(norm).substr(b, e - b)) >= 2) reserve(norm.substr(b, e - b));
      b = e + 1;
    }
  }
}

bool ReplacementContext::collides(const std::string& candidate) const {
  const auto text = fold_case(utf8_to_u32(candidate));
  for (const auto& r : reserved_) {
    for (auto pos = text.find(r); pos != std::u32string::npos; pos = text.find(r, pos + 1)) {
      if (is_boundary(text, pos) && is_boundary(text, pos + r.size())) return true;
    }
  }
  return false;
}

void ReplacementContext::begin_document() {
  if (scope_ == ReplacementScope::PerDocument) mapping_.clear();
}

namespace {

std::size_t word_count(const std::string& surface) {
  std::size_t n = 0;
  bool in_word = false;
  for (auto c : utf8_to_u32(surface)) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

const Lexicon& pool_for(const EntitySpan& span, const SurrogateSources& sources) {
  switch (span.etype) {
    case EntityType::Name: return word_count(span.surface) > 1 ? sources.full_names : sources.surnames;
    case EntityType::Location: return sources.locations;
    default: return sources.professions;
  }
}

std::string draw_from_pool(const Lexicon& pool, EntityType etype, ReplacementContext& ctx) {
  if (pool.empty()) {
    throw Error(ErrorCode::MissingSurrogateSource,
                "no surrogate list for " + std::string(type_label(etype)) + " replacement");
  }
  // Random probes first, then a scan from a random start so that a mostly
  // reserved pool still terminates.
  for (int attempt = 0; attempt < 32; ++attempt) {
    const auto& candidate = pool.entries[uniform_below(ctx.rng(), pool.size())];
    if (!ctx.collides(candidate)) return candidate;
  }
  const auto start = uniform_below(ctx.rng(), pool.size());
  for (std::size_t k = 0; k < pool.size(); ++k) {
    const auto& candidate = pool.entries[(start + k) % pool.size()];
    if (!ctx.collides(candidate)) return candidate;
  }
  throw Error(ErrorCode::MissingSurrogateSource,
              "every " + std::string(type_label(etype)) + " surrogate collides with an original surface");
}

// Digits become random digits and letters random letters of the same case;
// everything else is kept, so the identifier keeps its shape.
std::string scramble(const std::string& surface, ReplacementContext& ctx) {
  const auto chars = utf8_to_u32(surface);
  const bool has_alnum = std::any_of(chars.begin(), chars.end(), [](char32_t c) {
    return (c >= U'0' && c <= U'9') || (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z');
  });
  if (!has_alnum) return {};
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::u32string out = chars;
    for (auto& c : out) {
      if (c >= U'0' && c <= U'9') {
        c = U'0' + static_cast<char32_t>(uniform_below(ctx.rng(), 10));
      } else if (c >= U'a' && c <= U'z') {
        c = U'a' + static_cast<char32_t>(uniform_below(ctx.rng(), 26));
      } else if (c >= U'A' && c <= U'Z') {
        c = U'A' + static_cast<char32_t>(uniform_below(ctx.rng(), 26));
      }
    }
    auto text = u32_to_utf8(out);
    if (fold_case_utf8(text) != fold_case_utf8(surface) && !ctx.collides(text)) return text;
  }
  return {};
}

long long draw_shift(ReplacementContext& ctx, int max, bool allow_zero) {
  if (max <= 0) return 0;
  if (allow_zero) return uniform_int(ctx.rng(), -max, max);
  // Uniform over [-max, -1] and [1, max].
  const auto k = uniform_int(ctx.rng(), 0, 2LL * max - 1);
  return k < max ? k - max : k - max + 1;
}

struct Surrogate {
  std::string text;
  bool fallback = false;
};

Surrogate age_surrogate(const std::string& surface, const SurrogateSources& sources, ReplacementContext& ctx) {
  const auto delta = draw_shift(ctx, sources.age_delta_max, sources.allow_zero_shift);
  const auto b = surface.find_first_of("0123456789");
  if (b == std::string::npos) {
    return {std::to_string(uniform_int(ctx.rng(), 1, 99)), true};
  }
  auto e = surface.find_first_not_of("0123456789", b);
  if (e == std::string::npos) e = surface.size();
  const long long n = std::stoll(surface.substr(b, e - b));
  long long shifted = std::max(0LL, n + delta);
  if (shifted == n && delta != 0) shifted = n + std::llabs(delta);
  return {surface.substr(0, b) + std::to_string(shifted) + surface.substr(e), false};
}

Surrogate date_surrogate(const std::string& surface, const SurrogateSources& sources, ReplacementContext& ctx) {
  const auto delta = draw_shift(ctx, sources.date_month_delta_max, sources.allow_zero_shift);
  if (auto shifted = shift_date_text(surface, static_cast<int>(delta))) return {*shifted, false};
  static const long long lo = days_from_civil({1900, 1, 1});
  static const long long hi = days_from_civil({2199, 12, 31});
  return {format_iso(civil_from_days(uniform_int(ctx.rng(), lo, hi))), true};
}

MaskedDocument mask(const Document& doc, const std::vector<EntitySpan>& input, const DeidSettings& settings,
                    const SurrogateSources* sources, ReplacementContext* ctx) {
  auto spans = validate_spans(doc, input);
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].start < spans[i - 1].end) {
      throw Error(ErrorCode::OverlappingSpans, "spans [" + std::to_string(spans[i - 1].start) + "," +
                                                   std::to_string(spans[i - 1].end) + ") and [" +
                                                   std::to_string(spans[i].start) + "," +
                                                   std::to_string(spans[i].end) + ") overlap");
    }
  }
  if (ctx) {
    ctx->begin_document();
    ctx->reserve(spans, settings);
  }

  MaskedDocument out;
  out.doc_id = doc.id();
  out.seed = ctx ? ctx->seed() : settings.rng_seed;
  std::size_t cursor = 0;
  std::size_t masked_len = 0;

  for (const auto& span : spans) {
    const auto gap = doc.substr(cursor, span.start);
    out.masked_text += gap;
    masked_len += span.start - cursor;

    MaskedSpan ms;
    ms.original = span;
    ms.action = settings.action_for(span.etype);
    switch (ms.action) {
      case MaskAction::Ignore:
        ms.replacement = span.surface;
        break;
      case MaskAction::Redact:
        ms.replacement = placeholder_for(span.etype);
        break;
      case MaskAction::Replace: {
        if (!ctx || !sources) {
          throw Error(ErrorCode::InvalidSettings,
                      std::string(type_label(span.etype)) + " is set to replace; use replace() for this document");
        }
        if (span.etype == EntityType::Age || span.etype == EntityType::Date) {
          auto s = span.etype == EntityType::Age ? age_surrogate(span.surface, *sources, *ctx)
                                                 : date_surrogate(span.surface, *sources, *ctx);
          ms.replacement = std::move(s.text);
          ms.fallback = s.fallback;
          break;
        }
        const ReplacementKey key{span.etype, normalize_surface(span.surface)};
        auto hit = ctx->mapping().find(key);
        if (hit == ctx->mapping().end()) {
          std::string text;
          if (span.etype == EntityType::Name || span.etype == EntityType::Location ||
              span.etype == EntityType::Profession) {
            text = draw_from_pool(pool_for(span, *sources), span.etype, *ctx);
          } else {
            text = scramble(span.surface, *ctx);
            if (text.empty()) text = placeholder_for(span.etype);
          }
          hit = ctx->mapping().emplace(key, std::move(text)).first;
        }
        ms.replacement = hit->second;
        out.replacement_map[key] = hit->second;
        break;
      }
    }
    ms.masked_start = masked_len;
    masked_len += utf8_length(ms.replacement);
    ms.masked_end = masked_len;
    out.masked_text += ms.replacement;
    out.span_map.push_back(std::move(ms));
    cursor = span.end;
  }
  out.masked_text += doc.substr(cursor, doc.length());
  return out;
}

}  // namespace

MaskedDocument redact(const Document& doc, const std::vector<EntitySpan>& spans, const DeidSettings& settings) {
  return mask(doc, spans, settings, nullptr, nullptr);
}

MaskedDocument replace(const Document& doc, const std::vector<EntitySpan>& spans, const DeidSettings& settings,
                       const SurrogateSources& sources, ReplacementContext& ctx) {
  return mask(doc, spans, settings, &sources, &ctx);
}

}  // namespace deid
