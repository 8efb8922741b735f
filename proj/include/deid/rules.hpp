/**
 * @file rules.hpp
 * @brief Pattern engine for AGE and DATE expressions.
 *
 * Patterns are ECMAScript regular expressions evaluated case-insensitively
 * over code points. Matches must start and end on word boundaries. After all
 * patterns have run, overlapping matches of the same type are consolidated:
 * the longest wins and ties go to the pattern listed first.
 */
#pragma once

#include "deid/core.hpp"

#include <json.hpp>

#include <memory>
#include <regex>
#include <string>
#include <vector>

namespace deid {

static_assert(sizeof(wchar_t) == sizeof(char32_t), "rule engine expects 32-bit wchar_t");

struct RulePattern {
  std::string id;
  EntityType etype = EntityType::Date;
  std::string expression;
  bool enabled = true;
  /// Only accept matches whose integer value lies in [year_floor, year_ceiling].
  bool year_range = false;
};

class RuleSet {
public:
  /// Throws Error{InvalidArgument} on duplicate ids, invalid expressions, or
  /// patterns that accept the empty string.
  /// With `fragmenting`, same-type overlaps are kept (exact duplicates are
  /// still removed).
  explicit RuleSet(std::vector<RulePattern> patterns, int year_floor = 1900, int year_ceiling = 2199,
                   bool fragmenting = false);

  /// The full AGE/DATE pattern list with consolidation.
  static RuleSet defaults();
  /// A rule set without a spaced "Month YYYY" rule but with a bare month
  /// name rule: "January 2071" yields "January" and "2071" as separate spans.
  static RuleSet fragmenting_compat();

  static RuleSet from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const std::vector<RulePattern>& patterns() const noexcept { return patterns_; }
  int year_floor() const noexcept { return year_floor_; }
  int year_ceiling() const noexcept { return year_ceiling_; }
  bool fragmenting() const noexcept { return fragmenting_; }

  /// Compiled expression for pattern i.
  const std::wregex& regex(std::size_t i) const { return *compiled_[i]; }

private:
  std::vector<RulePattern> patterns_;
  std::vector<std::shared_ptr<const std::wregex>> compiled_;
  int year_floor_;
  int year_ceiling_;
  bool fragmenting_;
};

/// A raw match before consolidation; `pattern` indexes RuleSet::patterns().
struct RuleMatch {
  EntitySpan span;
  std::size_t pattern = 0;
};

/// All boundary-respecting matches of every enabled pattern.
std::vector<RuleMatch> find_rule_matches(const Document& doc, const RuleSet& rules);

/// Same-type longest-match consolidation. Result does not depend on the order
/// of `matches`.
std::vector<EntitySpan> consolidate(std::vector<RuleMatch> matches);

std::vector<EntitySpan> scan_rules(const Document& doc, const RuleSet& rules);

/// Month name alternation shared by the patterns and the date parser.
extern const char* const kMonthAlternation;

}  // namespace deid
