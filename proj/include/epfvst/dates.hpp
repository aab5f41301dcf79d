#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace epfvst {

/// Calendar date backed by a days-since-1970-01-01 serial.
///
/// Only fixed-offset civil arithmetic is supported; there is deliberately no
/// timezone database. Weekdays are numbered 1 = Monday .. 7 = Sunday.
class Date {
public:
    Date() = default;
    Date(int year, int month, int day);

    static Date from_serial(int serial) {
        Date d;
        d.serial_ = serial;
        return d;
    }

    /// Parses "YYYY-MM-DD". Throws std::invalid_argument on malformed input.
    static Date parse(std::string_view iso);

    int serial() const { return serial_; }
    int year() const;
    int month() const;
    int day() const;

    /// 1 = Monday .. 7 = Sunday.
    int weekday() const { return static_cast<int>(((serial_ % 7) + 10) % 7) + 1; }

    std::string to_string() const;

    Date operator+(int days) const { return from_serial(serial_ + days); }
    Date operator-(int days) const { return from_serial(serial_ - days); }
    int operator-(const Date& other) const { return serial_ - other.serial_; }
    Date& operator++() {
        ++serial_;
        return *this;
    }

    auto operator<=>(const Date&) const = default;

private:
    int serial_ = 0;
};

}  // namespace epfvst
