#include "rangekit/definition/provisioning.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <array>
#include <set>

#include "yaml_util.hpp"

namespace rangekit::definition {

using namespace detail;

namespace {

constexpr std::array<std::string_view, 22> kTaskKeywords = {
    "name",        "become",      "become_user", "when",          "register",    "tags",
    "notify",      "loop",        "with_items",  "ignore_errors", "vars",        "delegate_to",
    "changed_when", "failed_when", "environment", "args",         "no_log",      "until",
    "retries",     "delay",       "loop_control", "check_mode",
};

bool is_task_keyword(std::string_view key) {
    return std::find(kTaskKeywords.begin(), kTaskKeywords.end(), key) != kTaskKeywords.end();
}

std::string dump(const YAML::Node& node) {
    YAML::Emitter out;
    out << node;
    return out.c_str();
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

Task parse_task(const YAML::Node& node) {
    expect_map(node, "task");
    Task task;
    task.name = require_scalar(node, "name", "task");
    for (const auto& kv : node) {
        auto key = kv.first.as<std::string>();
        if (key == "name") continue;
        if (is_task_keyword(key)) {
            task.options.emplace_back(key, dump(kv.second));
            continue;
        }
        if (!task.module.empty()) {
            shape_error(kv.first, "task '" + task.name + "' has more than one module key ('" + task.module +
                                      "' and '" + key + "')");
        }
        task.module = key;
        task.parameters = dump(kv.second);
    }
    if (task.module.empty()) {
        throw Error(ErrorCode::MissingField, "task '" + task.name + "' has no module key" + where(node));
    }
    return task;
}

}  // namespace

std::vector<std::string> resolve_selector(std::string_view selector, const TopologyDefinition& topo) {
    std::set<std::string> wanted;
    std::string part;
    auto flush = [&](bool& ok) {
        auto name = trim(part);
        part.clear();
        if (name.empty()) return;
        if (name == "all") {
            for (const auto& h : topo.hosts) wanted.insert(h.name);
            for (const auto& r : topo.routers) wanted.insert(r.name);
        } else if (topo.has_node(name)) {
            wanted.insert(name);
        } else if (const auto* g = topo.find_group(name)) {
            wanted.insert(g->nodes.begin(), g->nodes.end());
        } else {
            ok = false;
        }
    };
    bool ok = true;
    for (char c : selector) {
        if (c == ',' || c == ':') {
            flush(ok);
        } else {
            part.push_back(c);
        }
    }
    flush(ok);
    if (!ok) return {};

    std::vector<std::string> resolved;
    for (const auto& h : topo.hosts) {
        if (wanted.count(h.name)) resolved.push_back(h.name);
    }
    for (const auto& r : topo.routers) {
        if (wanted.count(r.name)) resolved.push_back(r.name);
    }
    return resolved;
}

Parsed<ProvisioningDefinition> parse_provisioning(std::string_view document) {
    Parsed<ProvisioningDefinition> out;
    auto root = load_yaml(document);
    if (root.IsNull()) return out;
    if (!root.IsSequence()) shape_error(root, "provisioning document must be a list of plays");
    for (const auto& node : root) {
        expect_map(node, "play");
        Play play;
        auto hosts = require(node, "hosts", "play");
        if (hosts.IsSequence()) {
            for (const auto& h : hosts) {
                if (!play.hosts.empty()) play.hosts += ",";
                play.hosts += scalar(h, "play.hosts");
            }
        } else {
            play.hosts = scalar(hosts, "play.hosts");
        }
        if (auto become = node["become"]) play.become = as_bool(become, "play.become");
        for (const auto& kv : node) {
            auto key = kv.first.as<std::string>();
            if (key == "hosts" || key == "become" || key == "tasks") continue;
            play.options.emplace_back(key, dump(kv.second));
        }
        for (const auto& t : sequence(node, "tasks", "play")) play.tasks.push_back(parse_task(t));
        out.value.plays.push_back(std::move(play));
    }
    return out;
}

Parsed<ProvisioningDefinition> parse_provisioning(std::string_view document,
                                                  const TopologyDefinition& topo) {
    auto out = parse_provisioning(document);
    for (auto& play : out.value.plays) {
        play.resolved = resolve_selector(play.hosts, topo);
        if (play.resolved.empty()) {
            throw Error(ErrorCode::UnknownSelector,
                        "play selector '" + play.hosts + "' matches no host, router or group");
        }
    }
    return out;
}

std::string canonicalize(const ProvisioningDefinition& def) {
    YAML::Emitter out;
    out << YAML::BeginSeq;
    for (const auto& play : def.plays) {
        out << YAML::BeginMap;
        out << YAML::Key << "hosts" << YAML::Value << play.hosts;
        out << YAML::Key << "become" << YAML::Value << play.become;
        for (const auto& [key, text] : play.options) {
            out << YAML::Key << key << YAML::Value << YAML::Load(text);
        }
        out << YAML::Key << "tasks" << YAML::Value << YAML::BeginSeq;
        for (const auto& task : play.tasks) {
            out << YAML::BeginMap;
            out << YAML::Key << "name" << YAML::Value << task.name;
            out << YAML::Key << task.module << YAML::Value << YAML::Load(task.parameters);
            for (const auto& [key, text] : task.options) {
                out << YAML::Key << key << YAML::Value << YAML::Load(text);
            }
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    return std::string(out.c_str()) + "\n";
}

}  // namespace rangekit::definition
