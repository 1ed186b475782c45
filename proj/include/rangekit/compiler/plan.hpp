#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rangekit/core/ipv4.hpp"
#include "rangekit/definition/flavor.hpp"
#include "rangekit/definition/provisioning.hpp"
#include "rangekit/definition/topology.hpp"

namespace rangekit::compiler {

enum class NodeRole { Host, Router };

std::string_view to_string(NodeRole role);

struct Interface {
    std::string name;  // eth0, eth1, ...
    std::string network;
    Ipv4Address ip;
    Ipv4Prefix prefix;

    friend bool operator==(const Interface&, const Interface&) = default;
};

struct Route {
    Ipv4Prefix destination;
    Ipv4Address next_hop;
    std::string interface;

    friend bool operator==(const Route&, const Route&) = default;
};

struct NodePlan {
    std::string name;
    NodeRole role = NodeRole::Host;
    definition::BaseBoxRef base_box;
    std::string flavor;
    definition::FlavorResources resources;
    bool hidden = false;
    bool user_accessible = false;
    std::optional<Ipv4Prefix> external_cidr;  // router `cidr`, carried as metadata
    std::vector<Interface> interfaces;
    std::vector<Route> routes;

    const Interface* interface_on(std::string_view network) const;

    friend bool operator==(const NodePlan&, const NodePlan&) = default;
};

struct PlanNetwork {
    std::string name;
    Ipv4Prefix prefix;
    bool transit = false;

    friend bool operator==(const PlanNetwork&, const PlanNetwork&) = default;
};

/// Provider-agnostic deployment plan. Nodes are hosts followed by routers, in
/// declaration order; networks are the declared ones followed by the
/// synthesized transit network when present.
struct SandboxPlan {
    definition::TopologyDefinition topology;
    std::vector<PlanNetwork> networks;
    std::vector<NodePlan> nodes;
    std::optional<definition::ProvisioningDefinition> provisioning;
    std::vector<std::string> access_nodes;

    const NodePlan* find_node(std::string_view name) const;
    const PlanNetwork* find_network(std::string_view name) const;
    std::size_t route_count() const;

    friend bool operator==(const SandboxPlan&, const SandboxPlan&) = default;
};

}  // namespace rangekit::compiler
