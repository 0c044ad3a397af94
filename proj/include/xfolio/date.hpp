#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace xfolio {

// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
 public:
  Date() = default;
  Date(int year, int month, int day);

  static Date from_serial(std::int64_t days) {
    Date d;
    d.serial_ = days;
    return d;
  }
  // Parses strict "YYYY-MM-DD"; throws std::invalid_argument otherwise.
  static Date parse(std::string_view iso);

  std::int64_t serial() const { return serial_; }
  int year() const;
  int month() const;
  int day() const;
  std::string to_string() const;

  auto operator<=>(const Date&) const = default;

 private:
  std::int64_t serial_ = 0;
};

// Inclusive calendar range.
struct DateRange {
  Date begin;
  Date end;
  bool contains(Date d) const { return begin <= d && d <= end; }
  bool valid() const { return begin <= end; }
};

}  // namespace xfolio
