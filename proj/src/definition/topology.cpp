#include "rangekit/definition/topology.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>

#include "yaml_util.hpp"

namespace rangekit::definition {

using namespace detail;

namespace {

template <typename T>
const T* find_named(const std::vector<T>& items, std::string_view name) {
    auto it = std::find_if(items.begin(), items.end(),
                           [&](const T& item) { return item.name == name; });
    return it == items.end() ? nullptr : &*it;
}

BaseBoxRef parse_base_box(const YAML::Node& node, const std::string& context,
                          std::vector<std::string>& warnings) {
    expect_map(node, context);
    warn_unknown(node, {"image", "man_user"}, context, warnings);
    return {require_scalar(node, "image", context), require_scalar(node, "man_user", context)};
}

}  // namespace

const HostSpec* TopologyDefinition::find_host(std::string_view name) const {
    return find_named(hosts, name);
}
const RouterSpec* TopologyDefinition::find_router(std::string_view name) const {
    return find_named(routers, name);
}
const NetworkSpec* TopologyDefinition::find_network(std::string_view name) const {
    return find_named(networks, name);
}
const NodeGroup* TopologyDefinition::find_group(std::string_view name) const {
    return find_named(groups, name);
}

bool is_identifier(std::string_view name) {
    if (name.empty() || !std::isalpha(static_cast<unsigned char>(name.front()))) return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-';
    });
}

Parsed<TopologyDefinition> parse_topology(std::string_view document) {
    Parsed<TopologyDefinition> out;
    auto& def = out.value;
    auto& warnings = out.warnings;

    auto root = load_yaml(document);
    expect_map(root, "topology document");
    warn_unknown(root,
                 {"name", "hosts", "routers", "networks", "net_mappings", "router_mappings", "groups"},
                 "topology", warnings);
    def.name = require_scalar(root, "name", "topology");

    for (const auto& node : sequence(root, "hosts", "topology")) {
        expect_map(node, "host");
        warn_unknown(node, {"name", "base_box", "flavor", "hidden"}, "host", warnings);
        HostSpec host;
        host.name = require_scalar(node, "name", "host");
        auto ctx = "host '" + host.name + "'";
        host.base_box = parse_base_box(require(node, "base_box", ctx), ctx + ".base_box", warnings);
        host.flavor = require_scalar(node, "flavor", ctx);
        if (auto hidden = node["hidden"]) host.hidden = as_bool(hidden, ctx + ".hidden");
        def.hosts.push_back(std::move(host));
    }

    for (const auto& node : sequence(root, "routers", "topology")) {
        expect_map(node, "router");
        warn_unknown(node, {"name", "cidr", "base_box", "flavor", "hidden"}, "router", warnings);
        RouterSpec router;
        router.name = require_scalar(node, "name", "router");
        auto ctx = "router '" + router.name + "'";
        router.cidr = require_scalar(node, "cidr", ctx);
        router.base_box = parse_base_box(require(node, "base_box", ctx), ctx + ".base_box", warnings);
        router.flavor = require_scalar(node, "flavor", ctx);
        if (auto hidden = node["hidden"]) router.hidden = as_bool(hidden, ctx + ".hidden");
        def.routers.push_back(std::move(router));
    }

    for (const auto& node : sequence(root, "networks", "topology")) {
        expect_map(node, "network");
        warn_unknown(node, {"name", "cidr"}, "network", warnings);
        NetworkSpec net;
        net.name = require_scalar(node, "name", "network");
        net.cidr = require_scalar(node, "cidr", "network '" + net.name + "'");
        def.networks.push_back(std::move(net));
    }

    for (const auto& node : sequence(root, "net_mappings", "topology")) {
        expect_map(node, "net_mapping");
        warn_unknown(node, {"host", "network", "ip"}, "net_mapping", warnings);
        def.net_mappings.push_back({require_scalar(node, "host", "net_mapping"),
                                    require_scalar(node, "network", "net_mapping"),
                                    require_scalar(node, "ip", "net_mapping")});
    }

    for (const auto& node : sequence(root, "router_mappings", "topology")) {
        expect_map(node, "router_mapping");
        warn_unknown(node, {"router", "network", "ip"}, "router_mapping", warnings);
        def.router_mappings.push_back({require_scalar(node, "router", "router_mapping"),
                                       require_scalar(node, "network", "router_mapping"),
                                       require_scalar(node, "ip", "router_mapping")});
    }

    for (const auto& node : sequence(root, "groups", "topology")) {
        expect_map(node, "group");
        warn_unknown(node, {"name", "nodes"}, "group", warnings);
        NodeGroup group;
        group.name = require_scalar(node, "name", "group");
        for (const auto& member : sequence(node, "nodes", "group '" + group.name + "'")) {
            group.nodes.push_back(scalar(member, "group node"));
        }
        def.groups.push_back(std::move(group));
    }

    return out;
}

namespace {

void emit_base_box(YAML::Emitter& out, const BaseBoxRef& box) {
    out << YAML::Key << "base_box" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "image" << YAML::Value << box.image;
    out << YAML::Key << "man_user" << YAML::Value << box.man_user;
    out << YAML::EndMap;
}

template <typename T, typename Fn>
void emit_list(YAML::Emitter& out, const char* key, const std::vector<T>& items, Fn&& emit_item) {
    out << YAML::Key << key << YAML::Value;
    if (items.empty()) {
        out << YAML::Flow << YAML::BeginSeq << YAML::EndSeq;
        return;
    }
    out << YAML::BeginSeq;
    for (const auto& item : items) {
        out << YAML::BeginMap;
        emit_item(item);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
}

}  // namespace

std::string canonicalize(const TopologyDefinition& def) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << def.name;

    emit_list(out, "hosts", def.hosts, [&](const HostSpec& h) {
        out << YAML::Key << "name" << YAML::Value << h.name;
        emit_base_box(out, h.base_box);
        out << YAML::Key << "flavor" << YAML::Value << h.flavor;
        if (h.hidden) out << YAML::Key << "hidden" << YAML::Value << true;
    });
    emit_list(out, "routers", def.routers, [&](const RouterSpec& r) {
        out << YAML::Key << "name" << YAML::Value << r.name;
        out << YAML::Key << "cidr" << YAML::Value << r.cidr;
        emit_base_box(out, r.base_box);
        out << YAML::Key << "flavor" << YAML::Value << r.flavor;
        if (r.hidden) out << YAML::Key << "hidden" << YAML::Value << true;
    });
    emit_list(out, "networks", def.networks, [&](const NetworkSpec& n) {
        out << YAML::Key << "name" << YAML::Value << n.name;
        out << YAML::Key << "cidr" << YAML::Value << n.cidr;
    });
    emit_list(out, "net_mappings", def.net_mappings, [&](const NetMapping& m) {
        out << YAML::Key << "host" << YAML::Value << m.host;
        out << YAML::Key << "network" << YAML::Value << m.network;
        out << YAML::Key << "ip" << YAML::Value << m.ip;
    });
    emit_list(out, "router_mappings", def.router_mappings, [&](const RouterMapping& m) {
        out << YAML::Key << "router" << YAML::Value << m.router;
        out << YAML::Key << "network" << YAML::Value << m.network;
        out << YAML::Key << "ip" << YAML::Value << m.ip;
    });
    emit_list(out, "groups", def.groups, [&](const NodeGroup& g) {
        out << YAML::Key << "name" << YAML::Value << g.name;
        out << YAML::Key << "nodes" << YAML::Value;
        if (g.nodes.empty()) {
            out << YAML::Flow << YAML::BeginSeq << YAML::EndSeq;
        } else {
            out << YAML::BeginSeq;
            for (const auto& n : g.nodes) out << n;
            out << YAML::EndSeq;
        }
    });

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace rangekit::definition
