#include "rangekit/compiler/render.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>

#include "rangekit/core/error.hpp"

namespace rangekit::compiler {

namespace {

std::string finish(YAML::Emitter& out) { return std::string(out.c_str()) + "\n"; }

std::string render_machine(const NodePlan& node) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << node.name;
    out << YAML::Key << "role" << YAML::Value << std::string(to_string(node.role));
    out << YAML::Key << "box" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "image" << YAML::Value << node.base_box.image;
    out << YAML::Key << "man_user" << YAML::Value << node.base_box.man_user;
    out << YAML::EndMap;
    out << YAML::Key << "resources" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "flavor" << YAML::Value << node.flavor;
    out << YAML::Key << "vcpus" << YAML::Value << node.resources.vcpus;
    out << YAML::Key << "memory_gb" << YAML::Value << node.resources.memory_gb;
    out << YAML::EndMap;
    if (node.external_cidr) out << YAML::Key << "cidr" << YAML::Value << node.external_cidr->to_string();
    out << YAML::Key << "hidden" << YAML::Value << node.hidden;
    out << YAML::Key << "user_accessible" << YAML::Value << node.user_accessible;

    out << YAML::Key << "interfaces" << YAML::Value << YAML::BeginSeq;
    for (const auto& i : node.interfaces) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << i.name;
        out << YAML::Key << "network" << YAML::Value << i.network;
        out << YAML::Key << "ip" << YAML::Value << i.ip.to_string();
        out << YAML::Key << "netmask" << YAML::Value << i.prefix.netmask().to_string();
        out << YAML::Key << "prefix" << YAML::Value << i.prefix.to_string();
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::Key << "routes" << YAML::Value;
    if (node.routes.empty()) {
        out << YAML::Flow << YAML::BeginSeq << YAML::EndSeq;
    } else {
        out << YAML::BeginSeq;
        for (const auto& r : node.routes) {
            out << YAML::BeginMap;
            out << YAML::Key << "destination" << YAML::Value << r.destination.to_string();
            out << YAML::Key << "via" << YAML::Value << r.next_hop.to_string();
            out << YAML::Key << "interface" << YAML::Value << r.interface;
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    out << YAML::EndMap;
    return finish(out);
}

std::string render_inventory(const SandboxPlan& plan) {
    std::string out;
    auto host_line = [&](const NodePlan& n) {
        std::string line = n.name;
        if (!n.interfaces.empty()) line += " ansible_host=" + n.interfaces.front().ip.to_string();
        line += " ansible_user=" + n.base_box.man_user + "\n";
        return line;
    };
    out += "[hosts]\n";
    for (const auto& n : plan.nodes) {
        if (n.role == NodeRole::Host) out += host_line(n);
    }
    out += "\n[routers]\n";
    for (const auto& n : plan.nodes) {
        if (n.role == NodeRole::Router) out += host_line(n);
    }
    for (const auto& g : plan.topology.groups) {
        out += "\n[" + g.name + "]\n";
        for (const auto& member : g.nodes) out += member + "\n";
    }
    return out;
}

}  // namespace

Bundle render_local(const SandboxPlan& plan) {
    Bundle bundle;
    const bool with_provisioning = plan.provisioning && !plan.provisioning->empty();

    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << plan.topology.name;
    out << YAML::Key << "networks" << YAML::Value;
    if (plan.networks.empty()) {
        out << YAML::Flow << YAML::BeginSeq << YAML::EndSeq;
    } else {
        out << YAML::BeginSeq;
        for (const auto& n : plan.networks) {
            out << YAML::BeginMap;
            out << YAML::Key << "name" << YAML::Value << n.name;
            out << YAML::Key << "cidr" << YAML::Value << n.prefix.to_string();
            out << YAML::Key << "transit" << YAML::Value << n.transit;
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    out << YAML::Key << "machines" << YAML::Value;
    if (plan.nodes.empty()) {
        out << YAML::Flow << YAML::BeginSeq << YAML::EndSeq;
    } else {
        out << YAML::BeginSeq;
        for (const auto& n : plan.nodes) out << ("machines/" + n.name + ".yaml");
        out << YAML::EndSeq;
    }
    out << YAML::Key << "access_nodes" << YAML::Value << YAML::Flow << plan.access_nodes;
    if (with_provisioning) {
        out << YAML::Key << "provisioning" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "playbook" << YAML::Value << "provisioning/playbook.yml";
        out << YAML::Key << "inventory" << YAML::Value << "provisioning/inventory.ini";
        out << YAML::EndMap;
    }
    out << YAML::EndMap;
    bundle.emplace("plan.yaml", finish(out));

    for (const auto& n : plan.nodes) bundle.emplace("machines/" + n.name + ".yaml", render_machine(n));

    if (with_provisioning) {
        bundle.emplace("provisioning/playbook.yml", definition::canonicalize(*plan.provisioning));
        bundle.emplace("provisioning/inventory.ini", render_inventory(plan));
    }
    return bundle;
}

void write_bundle(const Bundle& bundle, const std::filesystem::path& dir) {
    for (const auto& [relative, content] : bundle) {
        auto path = dir / relative;
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw Error(ErrorCode::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
        std::ofstream file(path, std::ios::binary | std::ios::trunc);
        file << content;
        if (!file) throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
}

CloudResourcePlan render_cloud_plan(const SandboxPlan& plan, int count) {
    if (count < 1) throw Error(ErrorCode::InvalidValue, "sandbox count must be at least 1");
    CloudResourcePlan result;
    result.sandbox = plan.topology.name;
    result.count = count;
    auto& per = result.per_sandbox;
    per.instances = static_cast<long long>(plan.nodes.size());
    per.networks = static_cast<long long>(plan.networks.size());
    for (const auto& n : plan.nodes) {
        per.ports += static_cast<long long>(n.interfaces.size());
        per.vcpus += n.resources.vcpus;
        per.memory_gb += n.resources.memory_gb;
    }
    result.total = {per.instances * count, per.networks * count, per.ports * count, per.vcpus * count,
                    per.memory_gb * count};
    return result;
}

namespace {

nlohmann::ordered_json figures_json(const ResourceFigures& f) {
    nlohmann::ordered_json j;
    j["instances"] = f.instances;
    j["networks"] = f.networks;
    j["ports"] = f.ports;
    j["vcpus"] = f.vcpus;
    j["memory_gb"] = f.memory_gb;
    return j;
}

}  // namespace

std::string CloudResourcePlan::to_json() const {
    nlohmann::ordered_json j;
    j["sandbox"] = sandbox;
    j["count"] = count;
    j["per_sandbox"] = figures_json(per_sandbox);
    j["total"] = figures_json(total);
    return j.dump(2) + "\n";
}

std::string CloudResourcePlan::to_text() const {
    return "sandbox " + sandbox + " x " + std::to_string(count) + ": " + std::to_string(total.instances) +
           " instances, " + std::to_string(total.networks) + " networks, " + std::to_string(total.ports) +
           " ports, " + std::to_string(total.vcpus) + " vCPU, " + std::to_string(total.memory_gb) +
           " GB memory\n";
}

}  // namespace rangekit::compiler
