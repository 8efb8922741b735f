/**
 * @file evaluation.hpp
 * @brief Span scoring against gold annotations and classification reports.
 */
#pragma once

#include "deid/core.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace deid {

enum class MatchMode { ExactSpanAndType, OverlapAndType, SurfaceSetAndType };
std::string_view match_mode_label(MatchMode m);
std::optional<MatchMode> parse_match_mode(std::string_view s);

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

using TypeCounts = std::map<EntityType, Counts>;

/// Per-type counts for one document. Every gold span is matched at most once.
TypeCounts score(const std::vector<EntitySpan>& predicted, const std::vector<EntitySpan>& gold,
                 MatchMode mode = MatchMode::ExactSpanAndType);

void accumulate(TypeCounts& into, const TypeCounts& add);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double support = 0.0;
};

/// P, R and F1 from counts; 0 where a denominator is 0.
Metrics metrics_from_counts(const Counts& c);
/// F1 = 2PR/(P+R), 0 when P+R is 0.
double f1_score(double precision, double recall);

struct ClassificationReport {
  std::vector<std::pair<std::string, Metrics>> rows;  // per class, in type order
  Metrics micro;
  Metrics macro;
  Metrics weighted;
};

/// Report over every type present in `counts` (zero-support rows included).
ClassificationReport report(const TypeCounts& counts);

/// Per-class input given as (P, R, support); true positives are recovered as
/// R * support and predictions as TP / P, so pooled micro figures can be
/// formed from published tables.
struct ClassRow {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double support = 0.0;
};
ClassificationReport report_from_rows(const std::vector<ClassRow>& rows);

/// Fixed-width table, four decimals.
std::string format_report(const ClassificationReport& r);
nlohmann::json report_to_json(const ClassificationReport& r);

/// Why a prediction did not match gold.
enum class FalsePositiveCause {
  OverIdentification,  // no gold span of any type overlaps it
  OverlappingType,     // a gold span with the same extent (or overlap) carries another type
  MultiWordBreakdown,  // a fragment of a longer gold span of the same type
  Unclassified
};
std::string_view cause_label(FalsePositiveCause c);

struct FalsePositive {
  std::string doc_id;
  EntitySpan span;
  FalsePositiveCause cause = FalsePositiveCause::Unclassified;
};

/// Classifies the exact-mode false positives of one document.
std::vector<FalsePositive> explain_false_positives(const std::string& doc_id, const std::vector<EntitySpan>& predicted,
                                                   const std::vector<EntitySpan>& gold);

}  // namespace deid
