#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "rangekit/compiler/plan.hpp"

namespace rangekit::compiler {

/// Relative path -> file content. Ordered so iteration and output are stable.
using Bundle = std::map<std::string, std::string>;

/// Local intermediate definition:
///   plan.yaml                  sandbox summary and network list
///   machines/<node>.yaml       one machine description per node
///   provisioning/playbook.yml  canonical playbook (only with provisioning)
///   provisioning/inventory.ini node groups with management addresses
Bundle render_local(const SandboxPlan& plan);

void write_bundle(const Bundle& bundle, const std::filesystem::path& dir);

struct ResourceFigures {
    long long instances = 0;
    long long networks = 0;
    long long ports = 0;
    long long vcpus = 0;
    long long memory_gb = 0;

    friend bool operator==(const ResourceFigures&, const ResourceFigures&) = default;
};

struct CloudResourcePlan {
    std::string sandbox;
    int count = 0;
    ResourceFigures per_sandbox;
    ResourceFigures total;

    std::string to_json() const;
    std::string to_text() const;
};

/// Per-sandbox figures multiplied by count. Throws Error{InvalidValue} for count < 1.
CloudResourcePlan render_cloud_plan(const SandboxPlan& plan, int count);

}  // namespace rangekit::compiler
