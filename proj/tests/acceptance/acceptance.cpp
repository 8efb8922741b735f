// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "deid/evaluation.hpp"
#include "deid/masking.hpp"
#include "deid/merger.hpp"
#include "deid/pipeline.hpp"
#include "deid/risk.hpp"
#include "deid/rules.hpp"
#include "deid/serialize.hpp"
#include "deid/service.hpp"
#include "deid/unicode.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failure messages for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 10) failures.push_back(what);
    if (!ok) ++failed;
  }
  std::size_t failed = 0;
};

std::string fixed4(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("deid-acceptance-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
  Check c;
  deid::TypeCounts counts;
  counts[deid::EntityType::Name] = {181, 12, 0};
  const auto m = deid::metrics_from_counts(counts[deid::EntityType::Name]);
  c.expect(fixed4(m.precision) == "0.9378", "precision " + fixed4(m.precision));
  c.expect(fixed4(m.recall) == "1.0000", "recall " + fixed4(m.recall));
  c.expect(fixed4(m.f1) == "0.9679", "f1 " + fixed4(m.f1));
  const auto r = deid::report(counts);
  c.expect(fixed4(r.micro.f1) == "0.9679", "micro f1 " + fixed4(r.micro.f1));
  // Independent recomputation from the definitions.
  const double p = 181.0 / 193.0, rec = 181.0 / 181.0, f = 2 * p * rec / (p + rec);
  c.expect(std::fabs(p - m.precision) < 1e-12 && std::fabs(f - m.f1) < 1e-12, "definition mismatch");
  std::ostringstream d;
  d << "P=" << fixed4(m.precision) << " R=" << fixed4(m.recall) << " F1=" << fixed4(m.f1);
  return {c.failed == 0, c.failed ? c.failures.front() : d.str()};
}

Outcome criterion_2() {
  Check c;
  // Per-class precision and recall as published; supports reconstructed so
  // that the published aggregate rows follow from them.
  const std::vector<deid::ClassRow> rows{
      {"NAME", 0.97, 0.97, 3273},       {"DATE", 0.9602, 0.9816, 4484},   {"ID", 0.9855, 0.9927, 464},
      {"AGE", 0.9296, 0.9737, 466},     {"PHI", 0.0, 0.0, 17},            {"LOCATION", 0.9194, 0.9218, 1649},
      {"CONTACT", 0.9474, 0.96, 323},   {"PROFESSION", 0.8438, 0.6429, 142}};
  const auto r = deid::report_from_rows(rows);
  c.expect(fixed4(r.micro.f1) == "0.9588", "micro f1 " + fixed4(r.micro.f1));
  c.expect(fixed4(r.macro.f1) == "0.8106", "macro f1 " + fixed4(r.macro.f1));
  c.expect(fixed4(r.weighted.f1) == "0.9576", "weighted f1 " + fixed4(r.weighted.f1));
  std::ostringstream d;
  d << "micro=" << fixed4(r.micro.f1) << " macro=" << fixed4(r.macro.f1) << " weighted=" << fixed4(r.weighted.f1);
  return {c.failed == 0, c.failed ? c.failures.front() : d.str()};
}

Outcome criterion_3() {
  Check c;
  struct Case {
    std::string surface;
    deid::EntityType etype;
  };
  const std::vector<Case> cases{
      {"45 years old", deid::EntityType::Age}, {"45 yo", deid::EntityType::Age},
      {"45years old", deid::EntityType::Age},  {"45 y/o", deid::EntityType::Age},
      {"2023-08-13", deid::EntityType::Date},  {"08/23", deid::EntityType::Date},
      {"August 13, 2023", deid::EntityType::Date}, {"Aug 13 2023", deid::EntityType::Date},
      {"13 August 2023", deid::EntityType::Date},  {"13th of August, 2023", deid::EntityType::Date},
      {"August-2023", deid::EntityType::Date},     {"Aug - 2023", deid::EntityType::Date},
      {"2023", deid::EntityType::Date},
  };
  // Fixture corpus: every pattern embedded in a sentence of its own.
  std::string text;
  std::vector<std::pair<std::size_t, std::size_t>> where;
  for (const auto& k : cases) {
    const std::string before = "Noted on review: ";
    const auto start = deid::utf8_length(text + before);
    text += before + k.surface + " and stable.\n";
    where.emplace_back(start, start + deid::utf8_length(k.surface));
  }
  const deid::Document doc("patterns", text);
  for (const auto& rules : {deid::RuleSet::defaults(), deid::RuleSet::fragmenting_compat()}) {
    const auto spans = deid::scan_rules(doc, rules);
    for (std::size_t i = 0; i < cases.size(); ++i) {
      std::size_t exact = 0, touching = 0;
      for (const auto& s : spans) {
        if (s.start < where[i].second && where[i].first < s.end) ++touching;
        if (s.start == where[i].first && s.end == where[i].second && s.etype == cases[i].etype) ++exact;
      }
      c.expect(exact == 1 && touching == 1, "'" + cases[i].surface + "' not a single " +
                                                std::string(deid::type_label(cases[i].etype)) + " span");
    }
    c.expect(spans.size() == cases.size(), "unexpected extra spans: " + std::to_string(spans.size()));
  }

  const deid::Document jan("jan", "Symptoms began in January 2071 and settled.");
  auto count_dates = [&](const deid::RuleSet& rules) {
    std::size_t n = 0;
    for (const auto& s : deid::scan_rules(jan, rules)) n += s.etype == deid::EntityType::Date;
    return n;
  };
  const auto default_n = count_dates(deid::RuleSet::defaults());
  const auto compat_n = count_dates(deid::RuleSet::fragmenting_compat());
  c.expect(default_n == 1, "January 2071 default mode: " + std::to_string(default_n) + " spans");
  c.expect(compat_n == 2, "January 2071 compat mode: " + std::to_string(compat_n) + " spans");
  std::ostringstream d;
  d << cases.size() << "/" << cases.size() << " patterns single-span in both modes; January 2071 -> " << default_n
    << " (default), " << compat_n << " (compat)";
  return {c.failed == 0, c.failed ? c.failures.front() : d.str()};
}

// ---------------------------------------------------------------------------
// Masking properties over randomized documents.

struct Generated {
  deid::Document doc;
  std::vector<deid::EntitySpan> spans;
};

Generated random_document(std::mt19937_64& rng, int index) {
  static const std::vector<std::string> filler{"the", "patient", "was", "seen", "today", "with", "mild", "cough",
                                               "and", "review", "in", "clinic", "after", "tests", "were", "normal",
                                               "plan", "to", "continue", "treatment", ",", ".", "\n", "ß", "café"};
  static const std::map<deid::EntityType, std::vector<std::string>> surfaces{
      {deid::EntityType::Name, {"Beverly Thiel", "Thiel", "Foust", "Pemberton", "Alice Pemberton", "Ana", "Zoë Ödegaard",
                                "Sinclair", "Declan Foust"}},
      {deid::EntityType::Location, {"Clarkfield", "North Haven", "Millbrook", "Greyhaven", "Eastbridge"}},
      {deid::EntityType::Profession, {"teacher", "plumber", "baker", "bus driver"}},
      {deid::EntityType::Date, {"2071-01-15", "03/14/2071", "January 2071", "14 March 2071", "08/23", "2068",
                                "March 31, 2071", "sometime last spring", "31/12/70"}},
      {deid::EntityType::Age, {"45 yo", "71 years old", "2 y/o", "0 yo", "forty"}},
      {deid::EntityType::Id, {"88213407", "MRN-55-1209", "AB12cd"}},
      {deid::EntityType::Contact, {"0161 496 0732", "neuro.clinic@nhgh.example"}},
      {deid::EntityType::Phi, {"Ward 7 bed 3", "---"}},
  };
  auto pick = [&](const auto& v) -> const auto& { return v[deid::uniform_below(rng, v.size())]; };

  std::string text;
  std::vector<std::tuple<std::size_t, std::size_t, deid::EntityType, std::string>> raw;
  const auto n_tokens = deid::uniform_int(rng, 0, 40);
  std::size_t len = 0;
  for (long long i = 0; i < n_tokens; ++i) {
    std::string piece;
    if (deid::uniform_below(rng, 4) == 0) {
      const auto etype = deid::kAllEntityTypes[deid::uniform_below(rng, deid::kAllEntityTypes.size())];
      const auto& surface = pick(surfaces.at(etype));
      text += " ";
      len += 1;
      raw.emplace_back(len, len + deid::utf8_length(surface), etype, surface);
      piece = surface;
    } else {
      piece = " " + pick(filler);
    }
    text += piece;
    len += deid::utf8_length(piece);
  }
  deid::Document doc("doc" + std::to_string(index), text);
  std::vector<deid::EntitySpan> spans;
  for (const auto& [s, e, t, surface] : raw) spans.push_back(deid::make_span(doc, s, e, t, deid::SpanSource::Rule));
  return {std::move(doc), std::move(spans)};
}

bool word_hit_outside(const std::u32string& hay, const std::u32string& needle,
                      const std::vector<std::pair<std::size_t, std::size_t>>& allowed) {
  const auto folded = deid::fold_case(hay);
  const auto n = deid::fold_case(needle);
  for (auto pos = folded.find(n); pos != std::u32string::npos; pos = folded.find(n, pos + 1)) {
    const auto end = pos + n.size();
    const bool left = pos == 0 || !deid::is_word_char(folded[pos - 1]);
    const bool right = end == folded.size() || !deid::is_word_char(folded[end]);
    if (!left || !right) continue;
    const bool inside = std::any_of(allowed.begin(), allowed.end(),
                                    [&](const auto& a) { return a.first <= pos && end <= a.second; });
    if (!inside) return true;
  }
  return false;
}

Outcome criterion_4() {
  Check c;
  const auto resources = deid::Resources::load(DEID_DATA_DIR);
  const std::map<deid::EntityType, std::string> placeholder{
      {deid::EntityType::Name, "XXX-Name"},         {deid::EntityType::Date, "XXX-Date"},
      {deid::EntityType::Age, "XXX-Age"},           {deid::EntityType::Location, "XXX-Location"},
      {deid::EntityType::Profession, "XXX-Profession"}, {deid::EntityType::Id, "XXX-Id"},
      {deid::EntityType::Contact, "XXX-Contact"},   {deid::EntityType::Phi, "XXX-Phi"}};

  std::mt19937_64 rng(20710314);
  constexpr int kDocs = 1000;
  std::size_t spans_checked = 0;
  for (int i = 0; i < kDocs; ++i) {
    auto g = random_document(rng, i);
    deid::DeidSettings settings;
    settings.rng_seed = rng();
    for (auto t : deid::kAllEntityTypes) {
      settings.actions[t] = std::array{deid::MaskAction::Redact, deid::MaskAction::Replace,
                                       deid::MaskAction::Ignore}[deid::uniform_below(rng, 3)];
    }
    const bool replacing = settings.any_replace();
    auto run = [&] {
      if (!replacing) return deid::redact(g.doc, g.spans, settings);
      deid::ReplacementContext ctx(settings.rng_seed);
      return deid::replace(g.doc, g.spans, settings, resources.surrogates, ctx);
    };
    const auto masked = run();
    const auto again = run();
    const std::string tag = "doc " + std::to_string(i) + ": ";
    c.expect(masked == again, tag + "nondeterministic output");

    const auto out = deid::utf8_to_u32(masked.masked_text);
    long long expected_len = static_cast<long long>(g.doc.length());
    std::vector<std::pair<std::size_t, std::size_t>> ignore_ranges;
    c.expect(masked.span_map.size() == g.spans.size(), tag + "span map size");
    for (const auto& ms : masked.span_map) {
      ++spans_checked;
      const auto new_text = deid::u32_to_utf8(std::u32string_view(out).substr(ms.masked_start, ms.masked_end - ms.masked_start));
      c.expect(ms.masked_end <= out.size() && new_text == ms.replacement, tag + "offset soundness");
      expected_len += static_cast<long long>(deid::utf8_length(ms.replacement)) -
                      static_cast<long long>(ms.original.length());
      if (ms.action == deid::MaskAction::Ignore) {
        ignore_ranges.emplace_back(ms.masked_start, ms.masked_end);
        c.expect(new_text == ms.original.surface, tag + "ignored span altered");
      } else {
        c.expect(new_text != ms.original.surface, tag + "original '" + ms.original.surface + "' left in place");
      }
      if (ms.action == deid::MaskAction::Redact) {
        c.expect(new_text == placeholder.at(ms.original.etype), tag + "placeholder " + new_text);
      }
    }
    c.expect(static_cast<long long>(out.size()) == expected_len, tag + "length bookkeeping");
    for (const auto& ms : masked.span_map) {
      const auto t = ms.original.etype;
      if (ms.action == deid::MaskAction::Ignore || ms.original.length() < 3) continue;
      if (t != deid::EntityType::Name && t != deid::EntityType::Location && t != deid::EntityType::Profession) continue;
      c.expect(!word_hit_outside(out, deid::utf8_to_u32(ms.original.surface), ignore_ranges),
               tag + "surface '" + ms.original.surface + "' still present");
    }
  }
  std::ostringstream d;
  d << kDocs << " documents, " << spans_checked << " spans, " << c.failed << " violations";
  return {c.failed == 0, c.failed ? c.failures.front() + " (" + d.str() + ")" : d.str()};
}

// ---------------------------------------------------------------------------
// Merger against exhaustive enumeration.

using Key = std::tuple<long long, int, int, std::size_t>;

std::vector<deid::EntitySpan> brute_force_merge(const std::vector<deid::EntitySpan>& input,
                                                const deid::MergePolicy& policy) {
  // Exact duplicates: keep the best source.
  std::map<std::tuple<std::size_t, std::size_t, deid::EntityType>, deid::EntitySpan> best;
  for (const auto& s : input) {
    auto k = std::tuple(s.start, s.end, s.etype);
    auto it = best.find(k);
    if (it == best.end() || policy.rank(s.source) < policy.rank(it->second.source)) best[k] = s;
  }
  std::vector<deid::EntitySpan> spans;
  for (auto& [_, s] : best) spans.push_back(s);
  // Rank every candidate by the documented preference order.
  auto key = [&](const deid::EntitySpan& s) {
    return Key(-static_cast<long long>(s.length()), policy.rank(s.source), deid::type_rank(s.etype), s.start);
  };
  std::sort(spans.begin(), spans.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });

  // Enumerate every pairwise non-overlapping subset; the optimum is the one
  // whose membership vector (in preference order) is lexicographically
  // greatest.
  const auto n = spans.size();
  std::vector<char> current(n, 0), chosen(n, 0);
  bool have = false;
  std::function<void(std::size_t)> dfs = [&](std::size_t i) {
    if (i == n) {
      if (!have || std::lexicographical_compare(chosen.begin(), chosen.end(), current.begin(), current.end())) {
        chosen = current;
        have = true;
      }
      return;
    }
    bool fits = true;
    for (std::size_t j = 0; j < i && fits; ++j) {
      if (current[j] && spans[j].start < spans[i].end && spans[i].start < spans[j].end) fits = false;
    }
    if (fits) {
      current[i] = 1;
      dfs(i + 1);
      current[i] = 0;
    }
    dfs(i + 1);
  };
  dfs(0);
  std::vector<deid::EntitySpan> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (chosen[i]) out.push_back(spans[i]);
  }
  deid::sort_spans(out);
  return out;
}

Outcome criterion_5() {
  Check c;
  std::mt19937_64 rng(5150);
  const std::string text(64, 'x');
  const deid::Document doc("m", text);
  const std::array sources{deid::SpanSource::Manual, deid::SpanSource::Dictionary, deid::SpanSource::Rule,
                           deid::SpanSource::Model};
  constexpr int kTrials = 10000;
  for (int trial = 0; trial < kTrials; ++trial) {
    deid::MergePolicy policy;
    // Every fourth trial uses a shuffled priority order.
    if (trial % 4 == 3) {
      auto p = sources;
      for (std::size_t i = p.size() - 1; i > 0; --i) std::swap(p[i], p[deid::uniform_below(rng, i + 1)]);
      policy.priority = p;
    }
    const auto n = deid::uniform_int(rng, 0, 20);
    std::vector<deid::EntitySpan> spans;
    for (long long i = 0; i < n; ++i) {
      const auto start = static_cast<std::size_t>(deid::uniform_int(rng, 0, 50));
      const auto len = static_cast<std::size_t>(deid::uniform_int(rng, 1, 12));
      const auto etype = deid::kAllEntityTypes[deid::uniform_below(rng, 3)];  // few types -> more ties
      spans.push_back(deid::make_span(doc, start, start + len, etype, sources[deid::uniform_below(rng, 4)]));
    }
    // Occasionally inject exact duplicates from another source.
    if (!spans.empty() && trial % 3 == 0) {
      auto dup = spans[deid::uniform_below(rng, spans.size())];
      dup.source = sources[deid::uniform_below(rng, 4)];
      spans.push_back(dup);
    }
    const auto got = deid::merge(spans, policy);
    const auto want = brute_force_merge(spans, policy);
    c.expect(got == want, "trial " + std::to_string(trial) + " differs from enumeration");
  }
  std::ostringstream d;
  d << kTrials << " trials, " << c.failed << " mismatches";
  return {c.failed == 0, c.failed ? c.failures.front() + " (" + d.str() + ")" : d.str()};
}

// ---------------------------------------------------------------------------
// Risk on hand-computable fixtures.

struct RiskFixture {
  std::vector<std::string> ids;
  std::vector<deid::ContextWindow> windows;
  std::vector<deid::Embedding> vectors;

  void add(const std::string& id, const std::vector<deid::Embedding>& vs) {
    ids.push_back(id);
    for (const auto& v : vs) {
      deid::ContextWindow w;
      w.doc_id = id;
      w.span_index = windows.size();
      w.words = {"w"};
      windows.push_back(w);
      vectors.push_back(v);
    }
  }
  deid::RiskReport run(double threshold) const { return deid::assess(ids, windows, vectors, threshold); }
};

Outcome criterion_6() {
  Check c;
  // Orthogonal axes, plus g whose cosine with e0 is exactly 3/5.
  const deid::Embedding e0{1, 0, 0, 0}, e1{0, 1, 0, 0}, e2{0, 0, 1, 0}, e3{0, 0, 0, 1}, g{3, 4, 0, 0};
  auto check_doc = [&](const deid::RiskReport& r, const std::string& id, std::size_t unique, double pct,
                       deid::RiskBand band) {
    for (const auto& d : r.documents) {
      if (d.id != id) continue;
      c.expect(d.unique_count == unique, id + " unique " + std::to_string(d.unique_count));
      c.expect(d.risk_percent == pct, id + " percent " + std::to_string(d.risk_percent));
      c.expect(d.band == band, id + " band " + std::string(deid::band_label(d.band)));
      return;
    }
    c.expect(false, "missing document " + id);
  };

  // (2,1,1): both windows of A unique, B and C share a context. 2 of 4.
  {
    RiskFixture f;
    f.add("A", {e0, e1});
    f.add("B", {e2});
    f.add("C", {e2});
    const auto r = f.run(0.5);
    c.expect(r.total_count == 4, "total " + std::to_string(r.total_count));
    c.expect(!r.single_document, "unexpected single-document flag");
    check_doc(r, "A", 2, 50.0, deid::RiskBand::Yellow);
    check_doc(r, "B", 0, 0.0, deid::RiskBand::Green);
    check_doc(r, "C", 0, 0.0, deid::RiskBand::Green);
  }
  // Cosine equal to the threshold is a match; just above it is not.
  {
    RiskFixture f;
    f.add("A", {e1, g});
    f.add("B", {e0, e2});
    f.add("C", {e2, e2, e2, e2});
    const auto at = f.run(0.6);
    c.expect(at.total_count == 8, "total " + std::to_string(at.total_count));
    check_doc(at, "A", 1, 12.5, deid::RiskBand::Green);
    check_doc(at, "B", 0, 0.0, deid::RiskBand::Green);
    check_doc(at, "C", 0, 0.0, deid::RiskBand::Green);
    const auto above = f.run(0.61);
    check_doc(above, "A", 2, 25.0, deid::RiskBand::Yellow);
    check_doc(above, "B", 1, 12.5, deid::RiskBand::Green);
  }
  // Three of five unique in one document: 60 %, Red.
  {
    RiskFixture f;
    f.add("A", {e0, e1, e3});
    f.add("B", {e2});
    f.add("C", {e2});
    check_doc(f.run(0.5), "A", 3, 60.0, deid::RiskBand::Red);
  }
  // Band edges on the counts alone.
  c.expect(deid::band_for(24, 100) == deid::RiskBand::Green, "24% band");
  c.expect(deid::band_for(25, 100) == deid::RiskBand::Yellow, "25% band");
  c.expect(deid::band_for(50, 100) == deid::RiskBand::Yellow, "50% band");
  c.expect(deid::band_for(51, 100) == deid::RiskBand::Red, "51% band");
  c.expect(deid::band_for(1, 3) == deid::RiskBand::Yellow, "33% band");
  c.expect(deid::band_for(2, 3) == deid::RiskBand::Red, "67% band");
  c.expect(deid::band_for(0, 0) == deid::RiskBand::Green, "empty batch band");
  // Single document: nothing to compare against, everything unique, flagged.
  {
    RiskFixture f;
    f.add("A", {e0, e0, e1});
    const auto r = f.run(0.5);
    c.expect(r.single_document, "single-document warning missing");
    check_doc(r, "A", 3, 100.0, deid::RiskBand::Red);
    c.expect(deid::risk_to_json(r).contains("warning"), "warning missing from JSON");
  }
  // Two identical masked documents through the hashing embedder: no risk.
  {
    deid::MaskedDocument m;
    m.masked_text = "seen by Smith in clinic today";
    deid::MaskedSpan ms;
    ms.action = deid::MaskAction::Replace;
    ms.masked_start = 8;
    ms.masked_end = 13;
    m.span_map.push_back(ms);
    auto a = m, b = m;
    a.doc_id = "A";
    b.doc_id = "B";
    const auto r = deid::assess_batch({a, b}, deid::HashingEmbedder{}, 0.5);
    check_doc(r, "A", 0, 0.0, deid::RiskBand::Green);
    check_doc(r, "B", 0, 0.0, deid::RiskBand::Green);
  }
  // Threshold sweep: unique counts never fall as the threshold rises.
  {
    RiskFixture f;
    f.add("A", {e0, g, e1});
    f.add("B", {e1, e2});
    f.add("C", {g, e3, e0, {1, 1, 1, 1}});
    std::map<std::string, std::size_t> previous;
    for (int k = 0; k <= 10; ++k) {
      const auto r = f.run(k / 10.0);
      for (const auto& d : r.documents) {
        c.expect(d.unique_count >= previous[d.id], "monotonicity broken at threshold " + std::to_string(k / 10.0));
        c.expect(d.risk_percent == 100.0 * static_cast<double>(d.unique_count) / static_cast<double>(r.total_count),
                 "percent formula");
        previous[d.id] = d.unique_count;
      }
    }
  }
  return {c.failed == 0, c.failed ? c.failures.front() : "hand fixtures exact, bands and 11-threshold sweep hold"};
}

// ---------------------------------------------------------------------------

Outcome criterion_7() {
  Check c;
  const auto dir = scratch_dir("c7");
  const auto settings = dir / "settings.json";
  deid::write_file(settings, deid::dump_pretty(deid::settings_to_json(deid::DeidSettings{})));
  const auto letters = fs::path(DEID_FIXTURE_DIR) / "letters";
  const std::string cli = DEID_CLI_PATH;
  const int deid_rc = run_command(cli + " deid --compat --settings " + settings.string() + " --in " + letters.string() +
                                  " --out " + (dir / "out").string() + " > " + (dir / "deid.log").string() + " 2>&1");
  c.expect(deid_rc == 0, "deid exit " + std::to_string(deid_rc));
  const int eval_rc = run_command(cli + " --format json eval --explain --pred " + (dir / "out").string() + " --gold " +
                                  letters.string() + " > " + (dir / "eval.json").string());
  c.expect(eval_rc == 0, "eval exit " + std::to_string(eval_rc));
  if (c.failed) return {false, c.failures.front()};

  const auto j = json::parse(deid::read_file(dir / "eval.json"));
  const double p = j["overall"]["precision"], r = j["overall"]["recall"];
  std::map<std::string, int> causes;
  for (const auto& fp : j["false_positives"]) ++causes[fp["cause"].get<std::string>()];
  c.expect(r == 1.0, "recall " + fixed4(r));
  c.expect(p >= 0.93, "precision " + fixed4(p));
  c.expect(causes["unclassified"] == 0, std::to_string(causes["unclassified"]) + " unclassified false positives");
  std::ostringstream d;
  d << "TP " << j["counts"]["tp"] << " FP " << j["counts"]["fp"] << " FN " << j["counts"]["fn"] << ", P=" << fixed4(p)
    << " R=" << fixed4(r) << "; causes:";
  for (const auto& [k, v] : causes) d << " " << k << "=" << v;
  return {c.failed == 0, c.failed ? c.failures.front() : d.str()};
}

Outcome criterion_8() {
  Check c;
  const auto dir = scratch_dir("c8");
  deid::DeidSettings settings;
  for (auto t : deid::kAllEntityTypes) settings.actions[t] = deid::MaskAction::Replace;
  settings.actions[deid::EntityType::Phi] = deid::MaskAction::Redact;
  settings.rng_seed = 424242;
  const auto settings_json = deid::settings_to_json(settings);
  deid::write_file(dir / "settings.json", deid::dump_pretty(settings_json));
  const auto letters = fs::path(DEID_FIXTURE_DIR) / "letters";

  const int rc = run_command(std::string(DEID_CLI_PATH) + " deid --jobs 3 --settings " + (dir / "settings.json").string() +
                             " --in " + letters.string() + " --out " + (dir / "out").string() + " > /dev/null 2>&1");
  c.expect(rc == 0, "cli exit " + std::to_string(rc));

  deid::ServiceConfig config;
  config.store_dir = dir / "store";
  deid::Service service(deid::Resources::load(DEID_DATA_DIR), config);
  httplib::Server server;
  service.register_routes(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60, 0);
  const httplib::Headers headers{{deid::kSessionHeader, "parity"}};
  auto put = client.Put("/settings", headers, settings_json.dump(), "application/json");
  c.expect(put && put->status == 200, "PUT /settings failed");

  json files = json::array();
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(letters)) {
    if (entry.path().extension() != ".xml") continue;
    files.push_back({{"filename", entry.path().filename().string()}, {"content", deid::read_file(entry.path())}});
    ids.push_back(entry.path().stem().string());
  }
  auto post = client.Post("/batch", headers, json{{"files", files}}.dump(), "application/json");
  c.expect(post && post->status == 200, "POST /batch failed");
  std::size_t compared = 0;
  if (post && post->status == 200) {
    const auto body = json::parse(post->body);
    for (const auto& r : body["results"]) {
      const auto id = r["doc_id"].get<std::string>();
      const auto file = dir / "out" / (id + ".txt");
      c.expect(fs::exists(file) && deid::read_file(file) == r["masked_text"].get<std::string>(),
               "masked text differs for " + id);
      ++compared;
    }
    c.expect(compared == ids.size(), "result count " + std::to_string(compared));
    c.expect(body.contains("risk") && fs::exists(dir / "out" / "risk.json") &&
                 deid::read_file(dir / "out" / "risk.json") == deid::dump_pretty(body["risk"]),
             "risk JSON differs");
  }
  server.stop();
  thread.join();
  std::ostringstream d;
  d << compared << " masked letters and risk.json byte-identical";
  return {c.failed == 0, c.failed ? c.failures.front() : d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric arithmetic (TP 181, FP 12, FN 0)", criterion_1},
      {"aggregate rows from per-class triples", criterion_2},
      {"rule pattern coverage", criterion_3},
      {"masking soundness properties", criterion_4},
      {"merger matches exhaustive enumeration", criterion_5},
      {"risk formula and banding", criterion_6},
      {"stub pipeline on the 5-letter fixture", criterion_7},
      {"CLI and service parity", criterion_8},
  };
  const std::array<double, 8> budget_s{1, 1, 10, 30, 60, 10, 30, 120};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s[i]) {
      o.pass = false;
      o.detail += " (over time budget)";
    }
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2fs", secs);
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << ": " << criteria[i].first << " [" << timing
              << "] " << o.detail << std::endl;
    failed += !o.pass;
  }
  fs::remove_all(fs::temp_directory_path() / ("deid-acceptance-" + std::to_string(::getpid())));
  return failed == 0 ? 0 : 1;
}
