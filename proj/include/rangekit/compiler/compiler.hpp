#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rangekit/compiler/plan.hpp"

namespace rangekit::compiler {

struct CompileOptions {
    definition::FlavorRegistry flavors = definition::FlavorRegistry::defaults();
    /// Network linking all routers so that every declared network is routable.
    Ipv4Prefix transit_prefix = Ipv4Prefix::parse("172.16.254.0/24");
    std::string transit_name = "transit";
    bool synthesize_transit = true;
    /// Compile networks without a router as isolated segments instead of failing.
    bool allow_unroutable = false;
};

/// Throws Error{CompileError} when the topology has validation errors or
/// routing cannot be synthesized.
SandboxPlan compile(const definition::TopologyDefinition& topo,
                    const std::optional<definition::ProvisioningDefinition>& provisioning = std::nullopt,
                    const CompileOptions& options = {});

/// The plan with a network and everything attached to it (interfaces and the
/// routes leaving through them) removed.
SandboxPlan remove_network(const SandboxPlan& plan, std::string_view network);

struct ReachabilityResult {
    bool reachable = false;
    std::vector<std::string> path;  // traversed nodes, source first
};

/// Follows the plan's interfaces and route tables hop by hop from `from`
/// towards any address of `to`. Throws Error{UnknownNode}.
ReachabilityResult reachability(const SandboxPlan& plan, std::string_view from, std::string_view to);

}  // namespace rangekit::compiler
