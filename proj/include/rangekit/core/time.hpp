#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace rangekit {

/// Wall-clock instant with millisecond resolution. Every operation that needs
/// "now" takes one of these explicitly.
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

inline Timestamp from_epoch_ms(std::int64_t ms) { return Timestamp{std::chrono::milliseconds{ms}}; }
inline std::int64_t to_epoch_ms(Timestamp t) { return t.time_since_epoch().count(); }

Timestamp system_now();

/// Fixed offset from UTC, e.g. +02:00.
class UtcOffset {
public:
    constexpr UtcOffset() = default;
    constexpr explicit UtcOffset(std::chrono::minutes offset) : offset_(offset) {}

    /// Accepts "Z", "UTC", "+HH:MM", "-HH:MM", "+HHMM".
    static UtcOffset parse(std::string_view text);
    static std::optional<UtcOffset> try_parse(std::string_view text);
    /// The offset of the host's local zone at the given instant.
    static UtcOffset local(Timestamp at);

    constexpr std::chrono::minutes minutes() const { return offset_; }
    /// "+02:00" style; UTC renders as "+00:00".
    std::string to_string() const;

    friend constexpr bool operator==(UtcOffset, UtcOffset) = default;

private:
    std::chrono::minutes offset_{0};
};

struct CivilTime {
    int year = 1970;
    unsigned month = 1;
    unsigned day = 1;
    int hour = 0;
    int minute = 0;
    int second = 0;
    int millisecond = 0;
};

/// Instant of a wall-clock reading taken in the given zone; nullopt when the
/// calendar date or time of day is invalid.
std::optional<Timestamp> to_timestamp(const CivilTime& civil, UtcOffset zone);
CivilTime to_civil(Timestamp t, UtcOffset zone);

/// "2021-02-17T09:17:33+02:00"; milliseconds appear only when nonzero.
std::string format_iso8601(Timestamp t, UtcOffset zone);
struct ZonedTime {
    Timestamp instant;
    UtcOffset zone;
};
std::optional<ZonedTime> parse_iso8601(std::string_view text);

/// "Feb 17 2021 9:17:33", the form used in sandbox command log lines.
std::string format_log_timestamp(Timestamp t, UtcOffset zone);
/// Inverse of format_log_timestamp; single-digit hours are accepted.
std::optional<Timestamp> parse_log_timestamp(std::string_view text, UtcOffset zone);

}  // namespace rangekit
