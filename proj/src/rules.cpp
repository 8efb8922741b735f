#include "deid/rules.hpp"

#include "deid/dictionary.hpp"
#include "deid/unicode.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace deid {

const char* const kMonthAlternation =
    "(?:jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|"
    "sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)";

namespace {

std::string with_months(const std::string& expr) {
  std::string out;
  const std::string token = "MONTH";
  std::size_t pos = 0;
  while (true) {
    auto hit = expr.find(token, pos);
    if (hit == std::string::npos) break;
    out.append(expr, pos, hit - pos);
    out += kMonthAlternation;
    pos = hit + token.size();
  }
  out.append(expr, pos, std::string::npos);
  return out;
}

std::vector<RulePattern> default_patterns() {
  return {
      {"age_years_old", EntityType::Age, R"(\d{1,3}\s*-?\s*years?[\s-]+old)", true, false},
      {"age_yo", EntityType::Age, R"(\d{1,3}\s*(?:y/o|y\.o\.?|yo))", true, false},
      {"date_iso", EntityType::Date, R"(\d{4}([-/])\d{1,2}\1\d{1,2})", true, false},
      {"date_month_day_year", EntityType::Date, with_months(R"(MONTH\.?\s+\d{1,2}(?:st|nd|rd|th)?,?\s+\d{4})"),
       true, false},
      {"date_day_month_year", EntityType::Date,
       with_months(R"(\d{1,2}(?:st|nd|rd|th)?\s+(?:of\s+)?MONTH\.?,?\s+\d{4})"), true, false},
      {"date_month_year", EntityType::Date, with_months(R"(MONTH\.?(?:\s*-\s*|,?\s+)\d{4})"), true, false},
      {"date_numeric", EntityType::Date, R"(\d{1,2}([/-])\d{1,2}\1(?:\d{4}|\d{2}))", true, false},
      {"date_partial", EntityType::Date, R"((?:0?[1-9]|1[0-2])/\d{2})", true, false},
      {"date_year", EntityType::Date, R"(\d{4})", true, true},
  };
}

std::wstring widen(const std::string& utf8) {
  const auto u = utf8_to_u32(utf8);
  return std::wstring(u.begin(), u.end());
}

std::shared_ptr<const std::wregex> compile_pattern(const RulePattern& p) {
  try {
    // The lookahead lets the engine backtrack to a shorter alternative instead
    // of ending inside an ASCII word.
    auto re = std::make_shared<const std::wregex>(widen("(?:" + p.expression + ")(?![0-9A-Za-z])"),
                                                  std::regex_constants::ECMAScript | std::regex_constants::icase);
    if (std::regex_match(std::wstring(), *re)) {
      throw Error(ErrorCode::InvalidArgument, "rule '" + p.id + "' matches the empty string");
    }
    return re;
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::InvalidArgument, "rule '" + p.id + "' has an invalid expression: " + e.what());
  }
}

}  // namespace

RuleSet::RuleSet(std::vector<RulePattern> patterns, int year_floor, int year_ceiling, bool fragmenting)
    : patterns_(std::move(patterns)), year_floor_(year_floor), year_ceiling_(year_ceiling), fragmenting_(fragmenting) {
  if (year_floor_ > year_ceiling_) throw Error(ErrorCode::InvalidArgument, "year_floor exceeds year_ceiling");
  std::set<std::string> ids;
  for (const auto& p : patterns_) {
    if (p.id.empty()) throw Error(ErrorCode::InvalidArgument, "rule pattern with empty id");
    if (!ids.insert(p.id).second) throw Error(ErrorCode::InvalidArgument, "duplicate rule id '" + p.id + "'");
    compiled_.push_back(compile_pattern(p));
  }
}

RuleSet RuleSet::defaults() { return RuleSet(default_patterns()); }

RuleSet RuleSet::fragmenting_compat() {
  auto patterns = default_patterns();
  for (auto& p : patterns) {
    if (p.id == "date_month_year") p.expression = with_months(R"(MONTH\.?\s*-\s*\d{4})");
  }
  patterns.push_back({"date_month_name", EntityType::Date, with_months("MONTH"), true, false});
  return RuleSet(std::move(patterns));
}

RuleSet RuleSet::from_json(const nlohmann::json& j) {
  try {
    std::vector<RulePattern> patterns;
    for (const auto& e : j.at("patterns")) {
      RulePattern p;
      p.id = e.at("id").get<std::string>();
      auto t = parse_entity_type(e.at("type").get<std::string>());
      if (!t) throw Error(ErrorCode::InvalidArgument, "rule '" + p.id + "' has unknown type");
      p.etype = *t;
      p.expression = with_months(e.at("expression").get<std::string>());
      p.enabled = e.value("enabled", true);
      p.year_range = e.value("filter", std::string()) == "year_range";
      patterns.push_back(std::move(p));
    }
    return RuleSet(std::move(patterns), j.value("year_floor", 1900), j.value("year_ceiling", 2199),
                   j.value("fragmenting", false));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed rule set: ") + e.what());
  }
}

nlohmann::json RuleSet::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : patterns_) {
    nlohmann::json e{{"id", p.id}, {"type", type_label(p.etype)}, {"expression", p.expression}, {"enabled", p.enabled}};
    if (p.year_range) e["filter"] = "year_range";
    arr.push_back(std::move(e));
  }
  return {{"year_floor", year_floor_}, {"year_ceiling", year_ceiling_}, {"fragmenting", fragmenting_},
          {"patterns", arr}};
}

std::vector<RuleMatch> find_rule_matches(const Document& doc, const RuleSet& rules) {
  const auto& chars = doc.chars();
  const std::wstring text(chars.begin(), chars.end());
  std::vector<RuleMatch> out;

  for (std::size_t pi = 0; pi < rules.patterns().size(); ++pi) {
    const auto& pattern = rules.patterns()[pi];
    if (!pattern.enabled) continue;
    const auto& re = rules.regex(pi);

    std::size_t from = 0;
    while (from < text.size()) {
      std::wsmatch m;
      auto flags = from > 0 ? std::regex_constants::match_prev_avail : std::regex_constants::match_default;
      if (!std::regex_search(text.cbegin() + static_cast<std::ptrdiff_t>(from), text.cend(), m, re, flags)) break;
      const auto start = static_cast<std::size_t>(m.position(0)) + from;
      const auto end = start + static_cast<std::size_t>(m.length(0));
      if (end == start) {
        from = start + 1;
        continue;
      }
      bool ok = is_boundary(chars, start) && is_boundary(chars, end);
      if (ok && pattern.year_range) {
        try {
          const int year = std::stoi(u32_to_utf8(std::u32string_view(chars).substr(start, end - start)));
          ok = year >= rules.year_floor() && year <= rules.year_ceiling();
        } catch (const std::exception&) {
          ok = false;
        }
      }
      if (!ok) {
        from = start + 1;
        continue;
      }
      out.push_back({make_span(doc, start, end, pattern.etype, SpanSource::Rule), pi});
      from = end;
    }
  }
  return out;
}

std::vector<EntitySpan> consolidate(std::vector<RuleMatch> matches) {
  std::sort(matches.begin(), matches.end(), [](const RuleMatch& a, const RuleMatch& b) {
    return std::tuple(type_rank(a.span.etype), -static_cast<long long>(a.span.length()), a.pattern, a.span.start) <
           std::tuple(type_rank(b.span.etype), -static_cast<long long>(b.span.length()), b.pattern, b.span.start);
  });
  std::vector<EntitySpan> kept;
  for (auto& m : matches) {
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](const EntitySpan& k) {
      return k.etype == m.span.etype && span_overlaps(k, m.span);
    });
    if (!clash) kept.push_back(std::move(m.span));
  }
  sort_spans(kept);
  return kept;
}

std::vector<EntitySpan> scan_rules(const Document& doc, const RuleSet& rules) {
  auto matches = find_rule_matches(doc, rules);
  if (!rules.fragmenting()) return consolidate(std::move(matches));

  std::vector<EntitySpan> out;
  for (auto& m : matches) out.push_back(std::move(m.span));
  sort_spans(out);
  out.erase(std::unique(out.begin(), out.end(),
                        [](const EntitySpan& a, const EntitySpan& b) {
                          return a.start == b.start && a.end == b.end && a.etype == b.etype;
                        }),
            out.end());
  return out;
}

}  // namespace deid
