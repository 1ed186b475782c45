#include "rangekit/compiler/compiler.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "rangekit/core/error.hpp"
#include "rangekit/definition/validation.hpp"

namespace rangekit::compiler {

using definition::TopologyDefinition;

std::string_view to_string(NodeRole role) { return role == NodeRole::Host ? "host" : "router"; }

const Interface* NodePlan::interface_on(std::string_view network) const {
    auto it = std::find_if(interfaces.begin(), interfaces.end(),
                           [&](const Interface& i) { return i.network == network; });
    return it == interfaces.end() ? nullptr : &*it;
}

const NodePlan* SandboxPlan::find_node(std::string_view name) const {
    auto it = std::find_if(nodes.begin(), nodes.end(), [&](const NodePlan& n) { return n.name == name; });
    return it == nodes.end() ? nullptr : &*it;
}

const PlanNetwork* SandboxPlan::find_network(std::string_view name) const {
    auto it = std::find_if(networks.begin(), networks.end(), [&](const PlanNetwork& n) { return n.name == name; });
    return it == networks.end() ? nullptr : &*it;
}

std::size_t SandboxPlan::route_count() const {
    std::size_t total = 0;
    for (const auto& n : nodes) total += n.routes.size();
    return total;
}

namespace {

[[noreturn]] void fail(const std::string& message) { throw Error(ErrorCode::CompileError, message); }

const Ipv4Prefix kDefaultRoute{Ipv4Address{0}, 0};

}  // namespace

SandboxPlan compile(const TopologyDefinition& topo,
                    const std::optional<definition::ProvisioningDefinition>& provisioning,
                    const CompileOptions& options) {
    auto report = definition::validate_topology(topo, options.flavors);
    if (!report.deployable()) {
        for (const auto& f : report.findings) {
            if (f.severity == definition::Severity::Error) {
                fail("topology is not deployable: " + f.code + " (" + f.message + ")");
            }
        }
    }

    SandboxPlan plan;
    plan.topology = topo;
    plan.provisioning = provisioning;

    std::set<std::string> access;
    for (const auto& g : topo.groups) {
        if (g.name == "user-accessible") access.insert(g.nodes.begin(), g.nodes.end());
    }

    std::map<std::string, Ipv4Prefix> prefixes;
    for (const auto& n : topo.networks) {
        auto prefix = Ipv4Prefix::parse(n.cidr);
        prefixes.emplace(n.name, prefix);
        plan.networks.push_back({n.name, prefix, false});
    }

    // First router (declaration order of router_mappings) on each network acts as its gateway.
    std::map<std::string, std::pair<std::string, Ipv4Address>> gateway;
    for (const auto& m : topo.router_mappings) {
        gateway.try_emplace(m.network, m.router, Ipv4Address::parse(m.ip));
    }
    if (!options.allow_unroutable) {
        for (const auto& n : topo.networks) {
            if (!gateway.count(n.name)) fail("network '" + n.name + "' has no router; routing cannot be synthesized");
        }
    }

    auto make_node = [&](const std::string& name, NodeRole role, const definition::BaseBoxRef& box,
                         const std::string& flavor) {
        NodePlan node;
        node.name = name;
        node.role = role;
        node.base_box = box;
        node.flavor = flavor;
        node.resources = *options.flavors.find(flavor);
        node.user_accessible = access.count(name) > 0;
        return node;
    };
    auto add_interface = [](NodePlan& node, const std::string& network, Ipv4Address ip, Ipv4Prefix prefix) {
        node.interfaces.push_back({"eth" + std::to_string(node.interfaces.size()), network, ip, prefix});
    };

    for (const auto& h : topo.hosts) {
        auto node = make_node(h.name, NodeRole::Host, h.base_box, h.flavor);
        node.hidden = h.hidden;
        for (const auto& m : topo.net_mappings) {
            if (m.host == h.name) add_interface(node, m.network, Ipv4Address::parse(m.ip), prefixes.at(m.network));
        }
        for (const auto& iface : node.interfaces) {
            auto gw = gateway.find(iface.network);
            if (gw == gateway.end()) continue;
            node.routes.push_back({kDefaultRoute, gw->second.second, iface.name});
            break;
        }
        plan.nodes.push_back(std::move(node));
    }

    const bool with_transit = options.synthesize_transit && topo.routers.size() >= 2;
    if (with_transit) {
        if (prefixes.count(options.transit_name) || topo.has_node(options.transit_name)) {
            fail("transit network name '" + options.transit_name + "' collides with a declared name");
        }
        for (const auto& [name, prefix] : prefixes) {
            if (prefix.overlaps(options.transit_prefix)) {
                fail("transit network " + options.transit_prefix.to_string() + " overlaps network '" + name + "'");
            }
        }
        if (options.transit_prefix.size() < topo.routers.size() + 2) {
            fail("transit network " + options.transit_prefix.to_string() + " is too small for " +
                 std::to_string(topo.routers.size()) + " routers");
        }
        plan.networks.push_back({options.transit_name, options.transit_prefix, true});
    }

    std::map<std::string, Ipv4Address> transit_ip;
    for (std::size_t i = 0; i < topo.routers.size(); ++i) {
        const auto& r = topo.routers[i];
        auto node = make_node(r.name, NodeRole::Router, r.base_box, r.flavor);
        node.hidden = r.hidden;
        node.external_cidr = Ipv4Prefix::parse(r.cidr);
        for (const auto& m : topo.router_mappings) {
            if (m.router == r.name) add_interface(node, m.network, Ipv4Address::parse(m.ip), prefixes.at(m.network));
        }
        if (with_transit) {
            Ipv4Address ip{options.transit_prefix.network().value() + static_cast<std::uint32_t>(i + 1)};
            add_interface(node, options.transit_name, ip, options.transit_prefix);
            transit_ip.emplace(r.name, ip);
        }
        plan.nodes.push_back(std::move(node));
    }

    if (with_transit) {
        for (auto& node : plan.nodes) {
            if (node.role != NodeRole::Router) continue;
            const auto* transit = node.interface_on(options.transit_name);
            for (const auto& n : topo.networks) {
                if (node.interface_on(n.name)) continue;
                auto gw = gateway.find(n.name);
                if (gw == gateway.end()) continue;
                node.routes.push_back({prefixes.at(n.name), transit_ip.at(gw->second.first), transit->name});
            }
        }
    }

    for (const auto& n : plan.nodes) {
        if (access.count(n.name)) plan.access_nodes.push_back(n.name);
    }
    return plan;
}

SandboxPlan remove_network(const SandboxPlan& plan, std::string_view network) {
    SandboxPlan out = plan;
    out.networks.erase(std::remove_if(out.networks.begin(), out.networks.end(),
                                      [&](const PlanNetwork& n) { return n.name == network; }),
                       out.networks.end());
    for (auto& node : out.nodes) {
        std::set<std::string> dropped;
        for (const auto& i : node.interfaces) {
            if (i.network == network) dropped.insert(i.name);
        }
        node.interfaces.erase(std::remove_if(node.interfaces.begin(), node.interfaces.end(),
                                             [&](const Interface& i) { return i.network == network; }),
                              node.interfaces.end());
        node.routes.erase(std::remove_if(node.routes.begin(), node.routes.end(),
                                         [&](const Route& r) { return dropped.count(r.interface) > 0; }),
                          node.routes.end());
    }
    return out;
}

namespace {

struct Owner {
    const NodePlan* node;
    const Interface* iface;
};

const Interface* attached_towards(const NodePlan& node, Ipv4Address target) {
    for (const auto& i : node.interfaces) {
        if (i.prefix.contains(target)) return &i;
    }
    return nullptr;
}

const Route* lookup(const NodePlan& node, Ipv4Address target) {
    const Route* best = nullptr;
    for (const auto& r : node.routes) {
        if (r.destination.contains(target) && (!best || r.destination.length() > best->destination.length())) {
            best = &r;
        }
    }
    return best;
}

}  // namespace

ReachabilityResult reachability(const SandboxPlan& plan, std::string_view from, std::string_view to) {
    const auto* src = plan.find_node(from);
    const auto* dst = plan.find_node(to);
    if (!src) throw Error(ErrorCode::UnknownNode, "unknown node '" + std::string(from) + "'");
    if (!dst) throw Error(ErrorCode::UnknownNode, "unknown node '" + std::string(to) + "'");
    if (src == dst) return {true, {src->name}};

    std::map<std::uint32_t, Owner> owners;
    for (const auto& n : plan.nodes) {
        for (const auto& i : n.interfaces) owners.emplace(i.ip.value(), Owner{&n, &i});
    }
    // An address on the link is only usable when its owner is attached to the same network.
    auto neighbour = [&](const NodePlan& node, Ipv4Address addr) -> const NodePlan* {
        const auto* out_if = attached_towards(node, addr);
        auto owner = owners.find(addr.value());
        if (!out_if || owner == owners.end() || owner->second.iface->network != out_if->network) return nullptr;
        return owner->second.node;
    };

    for (const auto& target_if : dst->interfaces) {
        const auto target = target_if.ip;
        std::vector<std::string> path{src->name};
        std::set<const NodePlan*> visited{src};
        const NodePlan* current = src;
        while (true) {
            if (const auto* next = neighbour(*current, target)) {
                if (next == dst) {
                    path.push_back(dst->name);
                    return {true, path};
                }
                break;
            }
            const auto* route = lookup(*current, target);
            if (!route) break;
            const auto* hop = neighbour(*current, route->next_hop);
            if (!hop || !visited.insert(hop).second) break;
            path.push_back(hop->name);
            current = hop;
        }
    }
    return {false, {}};
}

}  // namespace rangekit::compiler
