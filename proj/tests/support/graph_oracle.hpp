#pragma once

#include <map>
#include <queue>
#include <string>
#include <vector>

#include "rangekit/compiler/plan.hpp"

namespace rangekit::test {

/// Breadth-first shortest path over "shares a network" adjacency. Independent
/// of route tables; returns an empty path when disconnected.
inline std::vector<std::string> bfs_path(const compiler::SandboxPlan& plan, const std::string& from,
                                         const std::string& to) {
    std::map<std::string, std::vector<std::string>> members;
    for (const auto& n : plan.nodes) {
        for (const auto& i : n.interfaces) members[i.network].push_back(n.name);
    }
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& [net, nodes] : members) {
        for (const auto& a : nodes) {
            for (const auto& b : nodes) {
                if (a != b) adj[a].push_back(b);
            }
        }
    }
    std::map<std::string, std::string> parent{{from, ""}};
    std::queue<std::string> queue;
    queue.push(from);
    while (!queue.empty()) {
        auto cur = queue.front();
        queue.pop();
        if (cur == to) break;
        for (const auto& next : adj[cur]) {
            if (parent.emplace(next, cur).second) queue.push(next);
        }
    }
    if (!parent.count(to)) return {};
    std::vector<std::string> path;
    for (std::string at = to; !at.empty(); at = parent[at]) path.insert(path.begin(), at);
    return path;
}

}  // namespace rangekit::test
