#include "deid/dates.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <vector>

namespace deid {

bool is_leap_year(int year) { return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0; }

int days_in_month(int year, int month) {
  static constexpr std::array<int, 12> lengths{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap_year(year)) return 29;
  return lengths[static_cast<std::size_t>(month - 1)];
}

CivilDate add_months(CivilDate date, int months) {
  int index = date.year * 12 + (date.month - 1) + months;
  int year = index / 12;
  int month = index % 12;
  if (month < 0) {
    month += 12;
    --year;
  }
  CivilDate out{year, month + 1, date.day};
  out.day = std::min(out.day, days_in_month(out.year, out.month));
  return out;
}

// Proleptic Gregorian day count (era-based).
long long days_from_civil(CivilDate date) {
  const long long y = date.year - (date.month <= 2 ? 1 : 0);
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const long long yoe = y - era * 400;
  const long long mp = (date.month + 9) % 12;
  const long long doy = (153 * mp + 2) / 5 + date.day - 1;
  const long long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

CivilDate civil_from_days(long long days) {
  days += 719468;
  const long long era = (days >= 0 ? days : days - 146096) / 146097;
  const long long doe = days - era * 146097;
  const long long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const long long mp = (5 * doy + 2) / 153;
  const int day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  const int month = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  const int year = static_cast<int>(yoe + era * 400 + (month <= 2 ? 1 : 0));
  return {year, month, day};
}

std::string format_iso(CivilDate date) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", date.year, date.month, date.day);
  return buf;
}

namespace {

constexpr std::array<const char*, 12> kMonthNames{"january", "february", "march",     "april",   "may",      "june",
                                                  "july",    "august",   "september", "october", "november", "december"};

struct Token {
  enum Kind { Digits, Alpha, Other } kind;
  std::string text;
};

enum class Role { None, Year, Month, Day, MonthName, Ordinal };

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    Token::Kind kind = std::isdigit(c) ? Token::Digits : std::isalpha(c) ? Token::Alpha : Token::Other;
    std::size_t j = i + 1;
    if (kind != Token::Other) {
      while (j < text.size()) {
        const auto d = static_cast<unsigned char>(text[j]);
        const auto k = std::isdigit(d) ? Token::Digits : std::isalpha(d) ? Token::Alpha : Token::Other;
        if (k != kind) break;
        ++j;
      }
    }
    out.push_back({kind, std::string(text.substr(i, j - i))});
    i = j;
  }
  return out;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// 1-12 for a full month name or accepted abbreviation, else 0.
int month_from_name(const std::string& word) {
  const auto w = lower(word);
  if (w == "sept") return 9;
  for (std::size_t m = 0; m < kMonthNames.size(); ++m) {
    const std::string full = kMonthNames[m];
    if (w == full || (w.size() == 3 && full.compare(0, 3, w) == 0)) return static_cast<int>(m + 1);
  }
  return 0;
}

bool is_ordinal_suffix(const std::string& word) {
  const auto w = lower(word);
  return w == "st" || w == "nd" || w == "rd" || w == "th";
}

std::string apply_case(const std::string& pattern, std::string word) {
  bool all_upper = pattern.size() > 1;
  bool all_lower = true;
  for (char c : pattern) {
    if (std::islower(static_cast<unsigned char>(c))) all_upper = false;
    if (std::isupper(static_cast<unsigned char>(c))) all_lower = false;
  }
  for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (all_upper) {
    for (auto& c : word) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  } else if (!all_lower && !word.empty()) {
    word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
  }
  return word;
}

std::string ordinal_suffix(int day) {
  if (day % 100 >= 11 && day % 100 <= 13) return "th";
  switch (day % 10) {
    case 1: return "st";
    case 2: return "nd";
    case 3: return "rd";
    default: return "th";
  }
}

std::string pad(int value, std::size_t width) {
  auto s = std::to_string(value);
  while (s.size() < width) s.insert(s.begin(), '0');
  return s;
}

int expand_two_digit_year(int yy) { return yy < 50 ? 2000 + yy : 1900 + yy; }

}  // namespace

std::optional<std::string> shift_date_text(std::string_view text, int months) {
  auto tokens = tokenize(text);
  std::vector<Role> roles(tokens.size(), Role::None);
  std::vector<std::size_t> digits;
  int month_name_at = -1;

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t.kind == Token::Digits) {
      digits.push_back(i);
    } else if (t.kind == Token::Alpha) {
      if (month_from_name(t.text) && month_name_at < 0) {
        month_name_at = static_cast<int>(i);
        roles[i] = Role::MonthName;
      } else if (is_ordinal_suffix(t.text) && i > 0 && tokens[i - 1].kind == Token::Digits) {
        roles[i] = Role::Ordinal;
      } else if (lower(t.text) != "of") {
        return std::nullopt;
      }
    }
  }

  auto value = [&](std::size_t i) { return std::stoi(tokens[i].text); };
  auto width = [&](std::size_t i) { return tokens[i].text.size(); };
  CivilDate date{2000, 1, 1};
  bool has_day = false;
  bool has_year = false;
  bool year_only = false;

  if (month_name_at >= 0) {
    date.month = month_from_name(tokens[static_cast<std::size_t>(month_name_at)].text);
    if (digits.size() > 2) return std::nullopt;
    for (auto i : digits) {
      if (width(i) == 4 && !has_year) {
        roles[i] = Role::Year;
        date.year = value(i);
        has_year = true;
      } else if (width(i) <= 2 && !has_day) {
        roles[i] = Role::Day;
        date.day = value(i);
        has_day = true;
      } else {
        return std::nullopt;
      }
    }
  } else {
    for (auto i : digits) {
      if (width(i) > 4) return std::nullopt;
    }
    if (digits.size() == 1 && width(digits[0]) == 4) {
      roles[digits[0]] = Role::Year;
      date.year = value(digits[0]);
      has_year = year_only = true;
    } else if (digits.size() == 2) {
      const auto a = digits[0], b = digits[1];
      if (width(a) == 4 && width(b) <= 2) {
        roles[a] = Role::Year;
        roles[b] = Role::Month;
        date = {value(a), value(b), 1};
      } else if (width(a) <= 2 && (width(b) == 2 || width(b) == 4)) {
        roles[a] = Role::Month;
        roles[b] = Role::Year;
        date = {width(b) == 2 ? expand_two_digit_year(value(b)) : value(b), value(a), 1};
      } else {
        return std::nullopt;
      }
      has_year = true;
    } else if (digits.size() == 3) {
      const auto a = digits[0], b = digits[1], c = digits[2];
      if (width(a) == 4 && width(b) <= 2 && width(c) <= 2) {
        roles[a] = Role::Year;
        roles[b] = Role::Month;
        roles[c] = Role::Day;
        date = {value(a), value(b), value(c)};
      } else if (width(a) <= 2 && width(b) <= 2 && (width(c) == 2 || width(c) == 4)) {
        const int year = width(c) == 2 ? expand_two_digit_year(value(c)) : value(c);
        roles[c] = Role::Year;
        if (value(a) <= 12) {
          roles[a] = Role::Month;
          roles[b] = Role::Day;
          date = {year, value(a), value(b)};
        } else {
          roles[a] = Role::Day;
          roles[b] = Role::Month;
          date = {year, value(b), value(a)};
        }
      } else {
        return std::nullopt;
      }
      has_year = has_day = true;
    } else {
      return std::nullopt;
    }
  }

  if (date.month < 1 || date.month > 12) return std::nullopt;
  if (has_day && (date.day < 1 || date.day > days_in_month(date.year, date.month))) return std::nullopt;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (roles[i] == Role::Ordinal && (i == 0 || roles[i - 1] != Role::Day)) return std::nullopt;
  }

  CivilDate shifted = date;
  if (year_only) {
    shifted.year += months > 0 ? 1 : months < 0 ? -1 : 0;
  } else {
    shifted = add_months(date, months);
  }
  if (has_year && (shifted.year < 0 || shifted.year > 9999)) return std::nullopt;

  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    switch (roles[i]) {
      case Role::Year:
        out += t.text.size() == 2 ? pad(shifted.year % 100, 2) : pad(shifted.year, 4);
        break;
      case Role::Month:
        out += pad(shifted.month, t.text.size());
        break;
      case Role::Day:
        out += pad(shifted.day, t.text.size());
        break;
      case Role::MonthName: {
        std::string name = kMonthNames[static_cast<std::size_t>(shifted.month - 1)];
        if (lower(t.text) != kMonthNames[static_cast<std::size_t>(date.month - 1)]) name = name.substr(0, 3);
        out += apply_case(t.text, name);
        break;
      }
      case Role::Ordinal:
        out += apply_case(t.text, ordinal_suffix(shifted.day));
        break;
      case Role::None:
        out += t.text;
        break;
    }
  }
  return out;
}

}  // namespace deid
