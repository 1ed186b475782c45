#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rangekit/definition/parsed.hpp"
#include "rangekit/definition/topology.hpp"

namespace rangekit::definition {

/// Opaque YAML fragment kept as emitted text, keyed by its original key.
using OpaqueEntry = std::pair<std::string, std::string>;

struct Task {
    std::string name;
    std::string module;      // e.g. "apt", "copy"
    std::string parameters;  // the module's argument block as YAML text
    std::vector<OpaqueEntry> options;  // task keywords such as when/register/notify

    friend bool operator==(const Task&, const Task&) = default;
};

struct Play {
    std::string hosts;  // selector as written: node or group names, ',' or ':' separated, or "all"
    bool become = false;
    std::vector<Task> tasks;
    std::vector<OpaqueEntry> options;    // other play keys (vars, handlers, ...)
    std::vector<std::string> resolved;   // nodes the selector covers, topology declaration order

    friend bool operator==(const Play&, const Play&) = default;
};

struct ProvisioningDefinition {
    std::vector<Play> plays;

    bool empty() const { return plays.empty(); }

    friend bool operator==(const ProvisioningDefinition&, const ProvisioningDefinition&) = default;
};

/// Structural parse only; selectors are left unresolved.
Parsed<ProvisioningDefinition> parse_provisioning(std::string_view document);

/// Parses and resolves every play selector against the topology. Throws
/// Error{UnknownSelector} when a selector names nothing in the topology.
Parsed<ProvisioningDefinition> parse_provisioning(std::string_view document,
                                                  const TopologyDefinition& topo);

/// Node names a selector covers; empty when nothing matches.
std::vector<std::string> resolve_selector(std::string_view selector, const TopologyDefinition& topo);

/// Playbook YAML with plays and tasks in declaration order.
std::string canonicalize(const ProvisioningDefinition& def);

}  // namespace rangekit::definition
