#include "rangekit/core/ipv4.hpp"

#include <charconv>

#include "rangekit/core/error.hpp"

namespace rangekit {

namespace {

std::optional<std::uint32_t> parse_octets(std::string_view text) {
    std::uint32_t value = 0;
    int octets = 0;
    std::size_t pos = 0;
    while (octets < 4) {
        std::size_t end = text.find('.', pos);
        if (octets == 3) {
            if (end != std::string_view::npos) return std::nullopt;
            end = text.size();
        } else if (end == std::string_view::npos) {
            return std::nullopt;
        }
        auto part = text.substr(pos, end - pos);
        if (part.empty() || part.size() > 3) return std::nullopt;
        if (part.size() > 1 && part.front() == '0') return std::nullopt;
        unsigned octet = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), octet);
        if (ec != std::errc{} || ptr != part.data() + part.size() || octet > 255) {
            return std::nullopt;
        }
        value = (value << 8) | octet;
        ++octets;
        pos = end + 1;
    }
    return value;
}

[[noreturn]] void reject(std::string_view text, std::string_view what) {
    if (text.find(':') != std::string_view::npos) {
        throw Error(ErrorCode::InvalidValue,
                    "IPv6 is not supported, expected IPv4 " + std::string(what) + ": '" +
                        std::string(text) + "'");
    }
    throw Error(ErrorCode::InvalidValue,
                "invalid IPv4 " + std::string(what) + ": '" + std::string(text) + "'");
}

}  // namespace

std::optional<Ipv4Address> Ipv4Address::try_parse(std::string_view text) {
    auto value = parse_octets(text);
    if (!value) return std::nullopt;
    return Ipv4Address{*value};
}

Ipv4Address Ipv4Address::parse(std::string_view text) {
    auto addr = try_parse(text);
    if (!addr) reject(text, "address");
    return *addr;
}

std::string Ipv4Address::to_string() const {
    return std::to_string(value_ >> 24) + '.' + std::to_string((value_ >> 16) & 0xff) + '.' +
           std::to_string((value_ >> 8) & 0xff) + '.' + std::to_string(value_ & 0xff);
}

Ipv4Prefix::Ipv4Prefix(Ipv4Address network, int length) : network_(network), length_(length) {
    if (length < 0 || length > 32) {
        throw Error(ErrorCode::InvalidValue, "prefix length out of range: " + std::to_string(length));
    }
    if ((network.value() & ~mask()) != 0) {
        throw Error(ErrorCode::InvalidValue,
                    "network address has host bits set: " + network.to_string() + "/" +
                        std::to_string(length));
    }
}

std::optional<Ipv4Prefix> Ipv4Prefix::try_parse(std::string_view text) {
    auto slash = text.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    auto addr = Ipv4Address::try_parse(text.substr(0, slash));
    if (!addr) return std::nullopt;
    auto len_text = text.substr(slash + 1);
    if (len_text.empty() || len_text.size() > 2) return std::nullopt;
    int length = 0;
    auto [ptr, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), length);
    if (ec != std::errc{} || ptr != len_text.data() + len_text.size() || length > 32) {
        return std::nullopt;
    }
    std::uint32_t mask = length == 0 ? 0 : ~std::uint32_t{0} << (32 - length);
    if ((addr->value() & ~mask) != 0) return std::nullopt;
    return Ipv4Prefix{*addr, length};
}

Ipv4Prefix Ipv4Prefix::parse(std::string_view text) {
    auto prefix = try_parse(text);
    if (!prefix) reject(text, "prefix");
    return *prefix;
}

std::uint32_t Ipv4Prefix::mask() const noexcept {
    return length_ == 0 ? 0 : ~std::uint32_t{0} << (32 - length_);
}

Ipv4Address Ipv4Prefix::broadcast() const noexcept {
    return Ipv4Address{network_.value() | ~mask()};
}

bool Ipv4Prefix::contains(Ipv4Address addr) const noexcept {
    return (addr.value() & mask()) == network_.value();
}

bool Ipv4Prefix::contains_host(Ipv4Address addr) const noexcept {
    return contains(addr) && addr != network_ && addr != broadcast();
}

bool Ipv4Prefix::overlaps(const Ipv4Prefix& other) const noexcept {
    return network_.value() <= other.broadcast().value() &&
           other.network_.value() <= broadcast().value();
}

std::string Ipv4Prefix::to_string() const {
    return network_.to_string() + "/" + std::to_string(length_);
}

}  // namespace rangekit
