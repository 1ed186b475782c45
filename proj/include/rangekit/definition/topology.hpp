#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rangekit/definition/parsed.hpp"

namespace rangekit::definition {

struct BaseBoxRef {
    std::string image;
    std::string man_user;

    friend bool operator==(const BaseBoxRef&, const BaseBoxRef&) = default;
};

struct HostSpec {
    std::string name;
    BaseBoxRef base_box;
    std::string flavor;
    bool hidden = false;

    friend bool operator==(const HostSpec&, const HostSpec&) = default;
};

// Addresses stay textual in the document model; validate_topology reports
// malformed ones as findings instead of failing the parse.
struct RouterSpec {
    std::string name;
    std::string cidr;
    BaseBoxRef base_box;
    std::string flavor;
    bool hidden = false;

    friend bool operator==(const RouterSpec&, const RouterSpec&) = default;
};

struct NetworkSpec {
    std::string name;
    std::string cidr;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct NetMapping {
    std::string host;
    std::string network;
    std::string ip;

    friend bool operator==(const NetMapping&, const NetMapping&) = default;
};

struct RouterMapping {
    std::string router;
    std::string network;
    std::string ip;

    friend bool operator==(const RouterMapping&, const RouterMapping&) = default;
};

struct NodeGroup {
    std::string name;
    std::vector<std::string> nodes;

    friend bool operator==(const NodeGroup&, const NodeGroup&) = default;
};

struct TopologyDefinition {
    std::string name;
    std::vector<HostSpec> hosts;
    std::vector<RouterSpec> routers;
    std::vector<NetworkSpec> networks;
    std::vector<NetMapping> net_mappings;
    std::vector<RouterMapping> router_mappings;
    std::vector<NodeGroup> groups;

    const HostSpec* find_host(std::string_view name) const;
    const RouterSpec* find_router(std::string_view name) const;
    const NetworkSpec* find_network(std::string_view name) const;
    const NodeGroup* find_group(std::string_view name) const;
    bool has_node(std::string_view name) const {
        return find_host(name) != nullptr || find_router(name) != nullptr;
    }

    friend bool operator==(const TopologyDefinition&, const TopologyDefinition&) = default;
};

/// Parses the YAML topology format. Throws ParseError for malformed YAML or
/// wrongly shaped values and Error{MissingField} for absent required keys.
Parsed<TopologyDefinition> parse_topology(std::string_view document);

/// Deterministic YAML with the key order of the reference format.
std::string canonicalize(const TopologyDefinition& def);

/// Letters, digits and hyphens, starting with a letter.
bool is_identifier(std::string_view name);

}  // namespace rangekit::definition
