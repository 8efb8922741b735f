#include "deid/evaluation.hpp"

#include "deid/unicode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

namespace deid {

std::string_view match_mode_label(MatchMode m) {
  switch (m) {
    case MatchMode::ExactSpanAndType: return "exact";
    case MatchMode::OverlapAndType: return "overlap";
    case MatchMode::SurfaceSetAndType: return "surface";
  }
  return "exact";
}

std::optional<MatchMode> parse_match_mode(std::string_view s) {
  for (auto m : {MatchMode::ExactSpanAndType, MatchMode::OverlapAndType, MatchMode::SurfaceSetAndType}) {
    if (s == match_mode_label(m)) return m;
  }
  return std::nullopt;
}

namespace {

template <typename Key>
TypeCounts multiset_score(const std::vector<EntitySpan>& predicted, const std::vector<EntitySpan>& gold,
                          Key key) {
  std::map<decltype(key(gold.front())), std::pair<std::size_t, std::size_t>> tally;  // (pred, gold)
  TypeCounts out;
  for (const auto& p : predicted) ++tally[key(p)].first;
  for (const auto& g : gold) ++tally[key(g)].second;
  for (const auto& [k, pg] : tally) {
    auto& c = out[std::get<0>(k)];
    const auto both = std::min(pg.first, pg.second);
    c.tp += both;
    c.fp += pg.first - both;
    c.fn += pg.second - both;
  }
  return out;
}

}  // namespace

TypeCounts score(const std::vector<EntitySpan>& predicted, const std::vector<EntitySpan>& gold, MatchMode mode) {
  if (mode == MatchMode::ExactSpanAndType) {
    return multiset_score(predicted, gold, [](const EntitySpan& s) { return std::tuple(s.etype, s.start, s.end); });
  }
  if (mode == MatchMode::SurfaceSetAndType) {
    return multiset_score(predicted, gold,
                          [](const EntitySpan& s) { return std::tuple(s.etype, fold_case_utf8(s.surface)); });
  }

  auto preds = predicted;
  auto golds = gold;
  sort_spans(preds);
  sort_spans(golds);
  std::vector<bool> used(preds.size(), false);
  TypeCounts out;
  for (const auto& g : golds) {
    auto& c = out[g.etype];
    bool matched = false;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (!used[i] && preds[i].etype == g.etype && span_overlaps(preds[i], g)) {
        used[i] = true;
        matched = true;
        break;
      }
    }
    if (matched) {
      ++c.tp;
    } else {
      ++c.fn;
    }
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!used[i]) ++out[preds[i].etype].fp;
  }
  return out;
}

void accumulate(TypeCounts& into, const TypeCounts& add) {
  for (const auto& [t, c] : add) into[t] += c;
}

double f1_score(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

Metrics metrics_from_counts(const Counts& c) {
  Metrics m;
  const auto tp = static_cast<double>(c.tp);
  m.precision = c.tp + c.fp > 0 ? tp / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? tp / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  m.support = static_cast<double>(c.tp + c.fn);
  return m;
}

namespace {

// Shared aggregation over real-valued (tp, predicted, support) per class.
struct RealCounts {
  std::string label;
  Metrics metrics;
  double tp = 0.0;
  double predicted = 0.0;
};

ClassificationReport aggregate(const std::vector<RealCounts>& classes) {
  ClassificationReport r;
  double tp = 0.0, predicted = 0.0, support = 0.0;
  for (const auto& c : classes) {
    r.rows.emplace_back(c.label, c.metrics);
    tp += c.tp;
    predicted += c.predicted;
    support += c.metrics.support;
    r.macro.precision += c.metrics.precision;
    r.macro.recall += c.metrics.recall;
    r.macro.f1 += c.metrics.f1;
    r.weighted.precision += c.metrics.precision * c.metrics.support;
    r.weighted.recall += c.metrics.recall * c.metrics.support;
    r.weighted.f1 += c.metrics.f1 * c.metrics.support;
  }
  const auto n = static_cast<double>(classes.size());
  if (n > 0) {
    r.macro.precision /= n;
    r.macro.recall /= n;
    r.macro.f1 /= n;
  }
  if (support > 0) {
    r.weighted.precision /= support;
    r.weighted.recall /= support;
    r.weighted.f1 /= support;
  } else {
    r.weighted = {};
  }
  r.micro.precision = predicted > 0 ? tp / predicted : 0.0;
  r.micro.recall = support > 0 ? tp / support : 0.0;
  r.micro.f1 = f1_score(r.micro.precision, r.micro.recall);
  r.micro.support = r.macro.support = r.weighted.support = support;
  return r;
}

}  // namespace

ClassificationReport report(const TypeCounts& counts) {
  std::vector<RealCounts> classes;
  for (const auto& [t, c] : counts) {
    classes.push_back({std::string(type_label(t)), metrics_from_counts(c), static_cast<double>(c.tp),
                       static_cast<double>(c.tp + c.fp)});
  }
  return aggregate(classes);
}

ClassificationReport report_from_rows(const std::vector<ClassRow>& rows) {
  std::vector<RealCounts> classes;
  for (const auto& row : rows) {
    RealCounts c;
    c.label = row.label;
    c.metrics = {row.precision, row.recall, f1_score(row.precision, row.recall), row.support};
    c.tp = row.recall * row.support;
    c.predicted = row.precision > 0 ? c.tp / row.precision : 0.0;
    classes.push_back(std::move(c));
  }
  return aggregate(classes);
}

namespace {

std::string format_support(double s) {
  char buf[32];
  if (std::fabs(s - std::round(s)) < 1e-9) {
    std::snprintf(buf, sizeof buf, "%.0f", s);
  } else {
    std::snprintf(buf, sizeof buf, "%.2f", s);
  }
  return buf;
}

std::string format_row(const std::string& label, const Metrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%14s %10.4f %10.4f %10.4f %10s\n", label.c_str(), m.precision, m.recall, m.f1,
                format_support(m.support).c_str());
  return buf;
}

nlohmann::json metrics_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
}

}  // namespace

std::string format_report(const ClassificationReport& r) {
  char header[160];
  std::snprintf(header, sizeof header, "%14s %10s %10s %10s %10s\n\n", "", "precision", "recall", "f1-score",
                "support");
  std::string out = header;
  for (const auto& [label, m] : r.rows) out += format_row(label, m);
  out += "\n";
  out += format_row("micro avg", r.micro);
  out += format_row("macro avg", r.macro);
  out += format_row("weighted avg", r.weighted);
  return out;
}

nlohmann::json report_to_json(const ClassificationReport& r) {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [label, m] : r.rows) classes[label] = metrics_json(m);
  return {{"classes", classes},
          {"micro", metrics_json(r.micro)},
          {"macro", metrics_json(r.macro)},
          {"weighted", metrics_json(r.weighted)}};
}

std::string_view cause_label(FalsePositiveCause c) {
  switch (c) {
    case FalsePositiveCause::OverIdentification: return "over-identification";
    case FalsePositiveCause::OverlappingType: return "overlapping-type";
    case FalsePositiveCause::MultiWordBreakdown: return "multi-word-breakdown";
    case FalsePositiveCause::Unclassified: return "unclassified";
  }
  return "unclassified";
}

std::vector<FalsePositive> explain_false_positives(const std::string& doc_id, const std::vector<EntitySpan>& predicted,
                                                   const std::vector<EntitySpan>& gold) {
  // Exact-mode multiset difference first.
  std::map<std::tuple<EntityType, std::size_t, std::size_t>, std::size_t> remaining;
  for (const auto& g : gold) ++remaining[{g.etype, g.start, g.end}];
  auto preds = predicted;
  sort_spans(preds);

  std::vector<FalsePositive> out;
  for (const auto& p : preds) {
    auto it = remaining.find({p.etype, p.start, p.end});
    if (it != remaining.end() && it->second > 0) {
      --it->second;
      continue;
    }
    FalsePositive fp{doc_id, p, FalsePositiveCause::Unclassified};
    const bool fragment = std::any_of(gold.begin(), gold.end(), [&](const EntitySpan& g) {
      return g.etype == p.etype && g.start <= p.start && p.end <= g.end && g.length() > p.length();
    });
    const bool other_type = std::any_of(gold.begin(), gold.end(), [&](const EntitySpan& g) {
      return g.etype != p.etype && span_overlaps(g, p);
    });
    const bool any_overlap =
        std::any_of(gold.begin(), gold.end(), [&](const EntitySpan& g) { return span_overlaps(g, p); });
    if (fragment) {
      fp.cause = FalsePositiveCause::MultiWordBreakdown;
    } else if (other_type) {
      fp.cause = FalsePositiveCause::OverlappingType;
    } else if (!any_overlap) {
      fp.cause = FalsePositiveCause::OverIdentification;
    }
    out.push_back(std::move(fp));
  }
  return out;
}

}  // namespace deid
