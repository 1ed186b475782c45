#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace rangekit {

class Ipv4Address {
public:
    constexpr Ipv4Address() = default;
    constexpr explicit Ipv4Address(std::uint32_t value) : value_(value) {}

    /// Dotted quad only. IPv6 text and leading-zero octets are rejected with
    /// an InvalidValue error.
    static Ipv4Address parse(std::string_view text);
    static std::optional<Ipv4Address> try_parse(std::string_view text);

    constexpr std::uint32_t value() const noexcept { return value_; }
    std::string to_string() const;

    friend constexpr auto operator<=>(Ipv4Address, Ipv4Address) = default;

private:
    std::uint32_t value_ = 0;
};

/// Network in prefix notation. Host bits of the network address must be zero.
class Ipv4Prefix {
public:
    constexpr Ipv4Prefix() = default;
    Ipv4Prefix(Ipv4Address network, int length);

    static Ipv4Prefix parse(std::string_view text);
    static std::optional<Ipv4Prefix> try_parse(std::string_view text);

    constexpr Ipv4Address network() const noexcept { return network_; }
    constexpr int length() const noexcept { return length_; }

    std::uint32_t mask() const noexcept;
    Ipv4Address broadcast() const noexcept;
    Ipv4Address netmask() const noexcept { return Ipv4Address{mask()}; }
    std::uint64_t size() const noexcept { return std::uint64_t{1} << (32 - length_); }

    bool contains(Ipv4Address addr) const noexcept;
    /// Inside the range and neither the network nor the broadcast address.
    bool contains_host(Ipv4Address addr) const noexcept;
    bool overlaps(const Ipv4Prefix& other) const noexcept;

    std::string to_string() const;

    friend auto operator<=>(const Ipv4Prefix&, const Ipv4Prefix&) = default;

private:
    Ipv4Address network_{};
    int length_ = 0;
};

}  // namespace rangekit
