#include "rangekit/core/time.hpp"

#include <charconv>
#include <ctime>
#include <cstdio>

#include "rangekit/core/error.hpp"

namespace rangekit {

using namespace std::chrono;

Timestamp system_now() { return time_point_cast<milliseconds>(system_clock::now()); }

std::optional<UtcOffset> UtcOffset::try_parse(std::string_view text) {
    if (text == "Z" || text == "UTC" || text == "z") return UtcOffset{};
    if (text.size() != 6 && text.size() != 5) return std::nullopt;
    if (text[0] != '+' && text[0] != '-') return std::nullopt;
    std::string_view hh = text.substr(1, 2);
    std::string_view mm = text.size() == 6 ? text.substr(4, 2) : text.substr(3, 2);
    if (text.size() == 6 && text[3] != ':') return std::nullopt;
    int h = 0;
    int m = 0;
    auto r1 = std::from_chars(hh.data(), hh.data() + hh.size(), h);
    auto r2 = std::from_chars(mm.data(), mm.data() + mm.size(), m);
    if (r1.ec != std::errc{} || r1.ptr != hh.data() + hh.size() || r2.ec != std::errc{} ||
        r2.ptr != mm.data() + mm.size() || h > 14 || m > 59) {
        return std::nullopt;
    }
    int total = h * 60 + m;
    return UtcOffset{std::chrono::minutes{text[0] == '-' ? -total : total}};
}

UtcOffset UtcOffset::parse(std::string_view text) {
    auto zone = try_parse(text);
    if (!zone) throw Error(ErrorCode::InvalidValue, "invalid UTC offset '" + std::string(text) + "'");
    return *zone;
}

UtcOffset UtcOffset::local(Timestamp at) {
    std::time_t t = static_cast<std::time_t>(to_epoch_ms(at) / 1000);
    std::tm tm{};
    localtime_r(&t, &tm);
    return UtcOffset{std::chrono::minutes{tm.tm_gmtoff / 60}};
}

std::string UtcOffset::to_string() const {
    auto total = offset_.count();
    char sign = total < 0 ? '-' : '+';
    if (total < 0) total = -total;
    char buf[8];
    std::snprintf(buf, sizeof buf, "%c%02d:%02d", sign, static_cast<int>(total / 60),
                  static_cast<int>(total % 60));
    return buf;
}

std::optional<Timestamp> to_timestamp(const CivilTime& c, UtcOffset zone) {
    year_month_day ymd{year{c.year}, month{c.month}, day{c.day}};
    if (!ymd.ok()) return std::nullopt;
    if (c.hour < 0 || c.hour > 23 || c.minute < 0 || c.minute > 59 || c.second < 0 || c.second > 60 ||
        c.millisecond < 0 || c.millisecond > 999) {
        return std::nullopt;
    }
    auto local = sys_days{ymd} + hours{c.hour} + std::chrono::minutes{c.minute} + seconds{c.second} +
                 milliseconds{c.millisecond};
    return time_point_cast<milliseconds>(local - zone.minutes());
}

CivilTime to_civil(Timestamp t, UtcOffset zone) {
    auto local = t + zone.minutes();
    auto day_point = floor<days>(local);
    year_month_day ymd{day_point};
    hh_mm_ss tod{local - day_point};
    CivilTime c;
    c.year = static_cast<int>(ymd.year());
    c.month = static_cast<unsigned>(ymd.month());
    c.day = static_cast<unsigned>(ymd.day());
    c.hour = static_cast<int>(tod.hours().count());
    c.minute = static_cast<int>(tod.minutes().count());
    c.second = static_cast<int>(tod.seconds().count());
    c.millisecond = static_cast<int>(tod.subseconds().count());
    return c;
}

std::string format_iso8601(Timestamp t, UtcOffset zone) {
    auto c = to_civil(t, zone);
    char buf[40];
    if (c.millisecond != 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03d", c.year, c.month, c.day, c.hour,
                      c.minute, c.second, c.millisecond);
    } else {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", c.year, c.month, c.day, c.hour,
                      c.minute, c.second);
    }
    return buf + zone.to_string();
}

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    auto part = text.substr(pos, len);
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    return ec == std::errc{} && ptr == part.data() + part.size();
}

}  // namespace

std::optional<ZonedTime> parse_iso8601(std::string_view text) {
    CivilTime c;
    int month = 0;
    int day = 0;
    if (text.size() < 20) return std::nullopt;
    if (!read_int(text, 0, 4, c.year) || text[4] != '-' || !read_int(text, 5, 2, month) || text[7] != '-' ||
        !read_int(text, 8, 2, day) || (text[10] != 'T' && text[10] != ' ') || !read_int(text, 11, 2, c.hour) ||
        text[13] != ':' || !read_int(text, 14, 2, c.minute) || text[16] != ':' ||
        !read_int(text, 17, 2, c.second)) {
        return std::nullopt;
    }
    c.month = static_cast<unsigned>(month);
    c.day = static_cast<unsigned>(day);
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        std::size_t start = ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
        auto digits = text.substr(start, pos - start);
        if (digits.empty()) return std::nullopt;
        int ms = 0;
        for (std::size_t i = 0; i < 3; ++i) ms = ms * 10 + (i < digits.size() ? digits[i] - '0' : 0);
        c.millisecond = ms;
    }
    auto zone = UtcOffset::try_parse(text.substr(pos));
    if (!zone) return std::nullopt;
    auto instant = to_timestamp(c, *zone);
    if (!instant) return std::nullopt;
    return ZonedTime{*instant, *zone};
}

namespace {
constexpr const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                   "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
}

std::string format_log_timestamp(Timestamp t, UtcOffset zone) {
    auto c = to_civil(t, zone);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%s %u %04d %d:%02d:%02d", kMonths[c.month - 1], c.day, c.year, c.hour,
                  c.minute, c.second);
    return buf;
}

std::optional<Timestamp> parse_log_timestamp(std::string_view text, UtcOffset zone) {
    std::string buf(text);
    char month[4] = {};
    unsigned day = 0;
    int year = 0, hour = 0, minute = 0, second = 0, consumed = 0;
    if (std::sscanf(buf.c_str(), "%3s %u %d %d:%d:%d%n", month, &day, &year, &hour, &minute, &second, &consumed) != 6 ||
        static_cast<std::size_t>(consumed) != buf.size()) {
        return std::nullopt;
    }
    for (unsigned m = 0; m < 12; ++m) {
        if (std::string_view(kMonths[m]) == month) {
            if (minute > 59 || second > 59 || hour > 23 || hour < 0 || minute < 0 || second < 0) return std::nullopt;
            return to_timestamp(CivilTime{year, m + 1, day, hour, minute, second, 0}, zone);
        }
    }
    return std::nullopt;
}

}  // namespace rangekit
