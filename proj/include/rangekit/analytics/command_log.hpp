#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rangekit/core/ipv4.hpp"
#include "rangekit/core/time.hpp"

namespace rangekit::analytics {

/// A sandbox shell command as kept in central storage.
struct CommandLogEntry {
    ZonedTime timestamp;
    std::string username;
    std::string hostname;
    std::optional<Ipv4Address> host_ip;
    std::string wd;
    std::string cmd;
    std::string cmd_type;
    std::string sandbox_id;
    std::vector<std::pair<std::string, std::string>> extras;  // unrecognized log keys, in line order

    /// Keys timestamp, username, hostname, host_ip, wd, cmd, cmd_type,
    /// sandbox_id; "extras" is added only when non-empty.
    nlohmann::ordered_json to_json() const;
    /// Throws Error{SchemaError}.
    static CommandLogEntry from_json(const nlohmann::ordered_json& value);

    friend bool operator==(const CommandLogEntry& a, const CommandLogEntry& b);
};

/// "bash" -> "bash-command"; labels already ending in "-command" are kept.
std::string normalize_cmd_type(std::string_view label);

/// Parses one command log line:
///
///     [<PRI>]Feb 17 2021 9:17:33 username="root" client src="10.10.40.5" wd="/home" cmd="..." cmd_type="bash" uid="1"
///
/// The bare token is the hostname. Values may be quoted with `\"` and `\\`
/// escapes. `src` becomes host_ip and `uid` becomes sandbox_id. The log
/// timestamp carries no zone, so `zone` supplies it.
///
/// Throws Error{MalformedLine} when the timestamp or cmd is missing, a quote
/// is unterminated, or src is not an IPv4 address.
CommandLogEntry parse_syslog_line(std::string_view line, UtcOffset zone);

/// Inverse of parse_syslog_line for well-formed entries.
std::string format_syslog_line(const CommandLogEntry& entry);

}  // namespace rangekit::analytics
