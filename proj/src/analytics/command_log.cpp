#include "rangekit/analytics/command_log.hpp"

#include <cctype>

#include "rangekit/core/error.hpp"

namespace rangekit::analytics {

namespace {

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::MalformedLine, why); }

std::string quote(std::string_view value) {
    std::string out = "\"";
    for (char c : value) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + '"';
}

bool is_key(std::string_view key) {
    if (key.empty()) return false;
    for (char c : key) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') return false;
    }
    return true;
}

struct Token {
    std::string key;  // empty for a bare word
    std::string value;
};

std::vector<Token> tokenize(std::string_view rest) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto skip_blanks = [&] {
        while (i < rest.size() && (rest[i] == ' ' || rest[i] == '\t')) ++i;
    };
    skip_blanks();
    while (i < rest.size()) {
        std::size_t start = i;
        while (i < rest.size() && rest[i] != ' ' && rest[i] != '\t' && rest[i] != '=' && rest[i] != '"') ++i;
        std::string_view word = rest.substr(start, i - start);
        if (i < rest.size() && rest[i] == '=') {
            if (!is_key(word)) malformed("bad key at column " + std::to_string(start + 1));
            ++i;
            Token tok{std::string(word), {}};
            if (i < rest.size() && rest[i] == '"') {
                ++i;
                bool closed = false;
                while (i < rest.size()) {
                    char c = rest[i++];
                    if (c == '\\' && i < rest.size()) {
                        tok.value += rest[i++];
                    } else if (c == '"') {
                        closed = true;
                        break;
                    } else {
                        tok.value += c;
                    }
                }
                if (!closed) malformed("unterminated quote in '" + tok.key + "'");
            } else {
                std::size_t vstart = i;
                while (i < rest.size() && rest[i] != ' ' && rest[i] != '\t') ++i;
                tok.value = std::string(rest.substr(vstart, i - vstart));
            }
            out.push_back(std::move(tok));
        } else if (i < rest.size() && rest[i] == '"') {
            malformed("unexpected quote at column " + std::to_string(i + 1));
        } else {
            out.push_back({{}, std::string(word)});
        }
        if (i < rest.size() && rest[i] != ' ' && rest[i] != '\t') malformed("missing blank at column " + std::to_string(i + 1));
        skip_blanks();
    }
    return out;
}

std::string string_field(const nlohmann::ordered_json& j, const char* key, bool required) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (required) throw Error(ErrorCode::SchemaError, std::string("missing field '") + key + "'");
        return {};
    }
    if (!it->is_string()) throw Error(ErrorCode::SchemaError, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

}  // namespace

bool operator==(const CommandLogEntry& a, const CommandLogEntry& b) {
    return a.timestamp.instant == b.timestamp.instant && a.timestamp.zone == b.timestamp.zone &&
           a.username == b.username && a.hostname == b.hostname && a.host_ip == b.host_ip && a.wd == b.wd &&
           a.cmd == b.cmd && a.cmd_type == b.cmd_type && a.sandbox_id == b.sandbox_id && a.extras == b.extras;
}

std::string normalize_cmd_type(std::string_view label) {
    constexpr std::string_view suffix = "-command";
    if (label.empty()) return {};
    if (label.size() >= suffix.size() && label.substr(label.size() - suffix.size()) == suffix) return std::string(label);
    return std::string(label) + std::string(suffix);
}

nlohmann::ordered_json CommandLogEntry::to_json() const {
    nlohmann::ordered_json j;
    j["timestamp"] = format_iso8601(timestamp.instant, timestamp.zone);
    j["username"] = username;
    j["hostname"] = hostname;
    if (host_ip) j["host_ip"] = host_ip->to_string();
    j["wd"] = wd;
    j["cmd"] = cmd;
    j["cmd_type"] = cmd_type;
    j["sandbox_id"] = sandbox_id;
    if (!extras.empty()) {
        nlohmann::ordered_json ex = nlohmann::ordered_json::object();
        for (const auto& [k, v] : extras) ex[k] = v;
        j["extras"] = std::move(ex);
    }
    return j;
}

CommandLogEntry CommandLogEntry::from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) throw Error(ErrorCode::SchemaError, "command entry must be an object");
    CommandLogEntry e;
    auto ts = parse_iso8601(string_field(j, "timestamp", true));
    if (!ts) throw Error(ErrorCode::SchemaError, "timestamp is not ISO-8601");
    e.timestamp = *ts;
    e.cmd = string_field(j, "cmd", true);
    if (e.cmd.empty()) throw Error(ErrorCode::SchemaError, "cmd is empty");
    e.username = string_field(j, "username", false);
    e.hostname = string_field(j, "hostname", false);
    if (auto ip = string_field(j, "host_ip", false); !ip.empty()) {
        e.host_ip = Ipv4Address::try_parse(ip);
        if (!e.host_ip) throw Error(ErrorCode::SchemaError, "host_ip '" + ip + "' is not IPv4");
    }
    e.wd = string_field(j, "wd", false);
    e.cmd_type = string_field(j, "cmd_type", false);
    e.sandbox_id = string_field(j, "sandbox_id", false);
    if (auto it = j.find("extras"); it != j.end()) {
        if (!it->is_object()) throw Error(ErrorCode::SchemaError, "extras must be an object");
        for (const auto& [k, v] : it->items()) {
            if (!v.is_string()) throw Error(ErrorCode::SchemaError, "extras values must be strings");
            e.extras.emplace_back(k, v.get<std::string>());
        }
    }
    return e;
}

CommandLogEntry parse_syslog_line(std::string_view line, UtcOffset zone) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
    if (!line.empty() && line.front() == '<') {
        auto close = line.find('>');
        if (close == std::string_view::npos || close > 4) malformed("bad priority prefix");
        for (std::size_t i = 1; i < close; ++i) {
            if (!std::isdigit(static_cast<unsigned char>(line[i]))) malformed("bad priority prefix");
        }
        line.remove_prefix(close + 1);
    }

    // The timestamp is the first four blank-separated words.
    std::size_t pos = 0;
    for (int words = 0; words < 4; ++words) {
        while (pos < line.size() && line[pos] == ' ') ++pos;
        if (pos >= line.size()) malformed("missing timestamp");
        while (pos < line.size() && line[pos] != ' ') ++pos;
    }
    auto stamp_text = line.substr(0, pos);
    while (!stamp_text.empty() && stamp_text.front() == ' ') stamp_text.remove_prefix(1);
    auto instant = parse_log_timestamp(stamp_text, zone);
    if (!instant) malformed("missing or invalid timestamp '" + std::string(stamp_text) + "'");

    CommandLogEntry e;
    e.timestamp = {*instant, zone};
    bool has_cmd = false;
    bool has_host = false;
    for (auto& tok : tokenize(line.substr(pos))) {
        if (tok.key.empty()) {
            if (has_host) malformed("unexpected bare word '" + tok.value + "'");
            e.hostname = std::move(tok.value);
            has_host = true;
        } else if (tok.key == "username") {
            e.username = std::move(tok.value);
        } else if (tok.key == "src") {
            e.host_ip = Ipv4Address::try_parse(tok.value);
            if (!e.host_ip) malformed("src '" + tok.value + "' is not IPv4");
        } else if (tok.key == "wd") {
            e.wd = std::move(tok.value);
        } else if (tok.key == "cmd") {
            e.cmd = std::move(tok.value);
            has_cmd = true;
        } else if (tok.key == "cmd_type") {
            e.cmd_type = normalize_cmd_type(tok.value);
        } else if (tok.key == "uid") {
            e.sandbox_id = std::move(tok.value);
        } else {
            e.extras.emplace_back(std::move(tok.key), std::move(tok.value));
        }
    }
    if (!has_cmd || e.cmd.empty()) malformed("missing cmd");
    return e;
}

std::string format_syslog_line(const CommandLogEntry& e) {
    std::string out = format_log_timestamp(e.timestamp.instant, e.timestamp.zone);
    out += " username=" + quote(e.username);
    if (!e.hostname.empty()) out += " " + e.hostname;
    if (e.host_ip) out += " src=" + quote(e.host_ip->to_string());
    out += " wd=" + quote(e.wd) + " cmd=" + quote(e.cmd) + " cmd_type=" + quote(e.cmd_type) + " uid=" + quote(e.sandbox_id);
    for (const auto& [k, v] : e.extras) out += " " + k + "=" + quote(v);
    return out;
}

}  // namespace rangekit::analytics
