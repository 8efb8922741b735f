#pragma once

// Calendar arithmetic and format-preserving date shifting for surrogates.

#include <optional>
#include <string>
#include <string_view>

namespace deid {

struct CivilDate {
  int year = 2000;
  int month = 1;
  int day = 1;

  friend bool operator==(const CivilDate&, const CivilDate&) = default;
};

bool is_leap_year(int year);
int days_in_month(int year, int month);

/// Adds calendar months; the day is clamped to the target month's length.
CivilDate add_months(CivilDate date, int months);

/// Days since 1970-01-01 and back.
long long days_from_civil(CivilDate date);
CivilDate civil_from_days(long long days);

std::string format_iso(CivilDate date);

/// Recognizes the textual shape of a date ("2071-01-15", "01/15/71",
/// "January 5th, 2071", "Jan 2071", "08/23", "2071", ...) and returns the
/// same shape shifted by `months`. Digit widths, month-name spelling and
/// letter case are kept. A bare year moves by one year in the direction of
/// `months`. Returns nullopt when the text is not a recognizable date.
std::optional<std::string> shift_date_text(std::string_view text, int months);

}  // namespace deid
