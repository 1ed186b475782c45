#include "rangekit/definition/validation.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "rangekit/core/ipv4.hpp"

namespace rangekit::definition {

std::size_t ValidationReport::error_count() const {
    return static_cast<std::size_t>(std::count_if(findings.begin(), findings.end(), [](const Finding& f) {
        return f.severity == Severity::Error;
    }));
}

std::size_t ValidationReport::warning_count() const {
    return findings.size() - error_count();
}

bool ValidationReport::has(std::string_view code) const {
    return std::any_of(findings.begin(), findings.end(), [&](const Finding& f) { return f.code == code; });
}

bool ValidationReport::has(std::string_view code, std::string_view node) const {
    return std::any_of(findings.begin(), findings.end(),
                       [&](const Finding& f) { return f.code == code && f.node == node; });
}

std::string ValidationReport::to_json_lines() const {
    std::string out;
    for (const auto& f : findings) {
        nlohmann::ordered_json line;
        line["severity"] = f.severity == Severity::Error ? "error" : "warning";
        line["code"] = f.code;
        line["node"] = f.node;
        line["message"] = f.message;
        out += line.dump();
        out += '\n';
    }
    return out;
}

namespace {

class Collector {
public:
    explicit Collector(ValidationReport& report) : report_(report) {}

    void error(std::string code, std::string node, std::string message) {
        report_.findings.push_back({Severity::Error, std::move(code), std::move(node), std::move(message)});
    }
    void warning(std::string code, std::string node, std::string message) {
        report_.findings.push_back({Severity::Warning, std::move(code), std::move(node), std::move(message)});
    }

private:
    ValidationReport& report_;
};

void check_base_box(Collector& c, const std::string& node, const BaseBoxRef& box) {
    if (box.image.empty() || box.man_user.empty()) {
        c.error("empty-base-box", node, "base_box image and man_user must be non-empty");
    }
}

void check_flavor(Collector& c, const std::string& node, const std::string& flavor,
                  const FlavorRegistry& flavors) {
    if (!flavors.find(flavor)) c.error("unknown-flavor", node, "flavor '" + flavor + "' is not registered");
}

std::optional<Ipv4Prefix> check_cidr(Collector& c, const std::string& node, const std::string& cidr) {
    auto prefix = Ipv4Prefix::try_parse(cidr);
    if (!prefix) {
        std::string why = cidr.find(':') != std::string::npos ? " (IPv6 is not supported)" : "";
        c.error("invalid-cidr", node, "'" + cidr + "' is not a valid IPv4 prefix" + why);
        return std::nullopt;
    }
    if (prefix->length() < 8 || prefix->length() > 30) {
        c.error("prefix-length", node, "prefix length of '" + cidr + "' must be between 8 and 30");
        return std::nullopt;
    }
    return prefix;
}

struct Mapping {
    const std::string& node;
    const std::string& network;
    const std::string& ip;
    bool router;
};

}  // namespace

ValidationReport validate_topology(const TopologyDefinition& def, const FlavorRegistry& flavors) {
    ValidationReport report;
    Collector c(report);

    std::set<std::string> names;
    auto claim = [&](const std::string& name) {
        if (!is_identifier(name)) {
            c.error("invalid-identifier", name, "'" + name + "' is not a valid identifier");
        }
        if (!names.insert(name).second) c.error("duplicate-name", name, "name '" + name + "' is used twice");
    };

    for (const auto& h : def.hosts) {
        claim(h.name);
        check_base_box(c, h.name, h.base_box);
        check_flavor(c, h.name, h.flavor, flavors);
    }
    for (const auto& r : def.routers) {
        claim(r.name);
        check_base_box(c, r.name, r.base_box);
        check_flavor(c, r.name, r.flavor, flavors);
        check_cidr(c, r.name, r.cidr);
    }

    std::map<std::string, Ipv4Prefix> prefixes;
    for (const auto& n : def.networks) {
        claim(n.name);
        if (auto prefix = check_cidr(c, n.name, n.cidr)) prefixes.emplace(n.name, *prefix);
    }
    for (std::size_t i = 0; i < def.networks.size(); ++i) {
        for (std::size_t j = i + 1; j < def.networks.size(); ++j) {
            auto a = prefixes.find(def.networks[i].name);
            auto b = prefixes.find(def.networks[j].name);
            if (a == prefixes.end() || b == prefixes.end()) continue;
            if (a->second.overlaps(b->second)) {
                c.error("network-overlap", def.networks[j].name,
                        "network '" + def.networks[j].name + "' (" + def.networks[j].cidr +
                            ") overlaps '" + def.networks[i].name + "' (" + def.networks[i].cidr + ")");
            }
        }
    }

    std::vector<Mapping> mappings;
    for (const auto& m : def.net_mappings) mappings.push_back({m.host, m.network, m.ip, false});
    for (const auto& m : def.router_mappings) mappings.push_back({m.router, m.network, m.ip, true});

    std::set<std::pair<std::string, std::string>> attachments;
    std::set<std::pair<std::string, std::uint32_t>> used_ips;
    std::set<std::string> attached_nodes;
    std::set<std::string> routed_networks;
    for (const auto& m : mappings) {
        bool node_ok = m.router ? def.find_router(m.node) != nullptr : def.find_host(m.node) != nullptr;
        if (!node_ok) {
            c.error("unknown-node", m.node,
                    std::string(m.router ? "router" : "host") + " '" + m.node + "' is not defined");
        }
        const auto* net = def.find_network(m.network);
        if (!net) c.error("unknown-network", m.node, "network '" + m.network + "' is not defined");
        if (node_ok) attached_nodes.insert(m.node);
        if (m.router && net) routed_networks.insert(m.network);
        if (node_ok && net && !attachments.emplace(m.node, m.network).second) {
            c.error("duplicate-mapping", m.node, "'" + m.node + "' is mapped to '" + m.network + "' twice");
        }

        auto ip = Ipv4Address::try_parse(m.ip);
        if (!ip) {
            std::string why = m.ip.find(':') != std::string::npos ? " (IPv6 is not supported)" : "";
            c.error("invalid-ip", m.node, "'" + m.ip + "' is not a valid IPv4 address" + why);
            continue;
        }
        auto prefix = prefixes.find(m.network);
        if (prefix == prefixes.end()) continue;
        if (!prefix->second.contains(*ip)) {
            c.error("ip-outside-network", m.node,
                    m.ip + " is outside network '" + m.network + "' (" + prefix->second.to_string() + ")");
            continue;
        }
        if (!prefix->second.contains_host(*ip)) {
            c.error("ip-reserved", m.node,
                    m.ip + " is the network or broadcast address of '" + m.network + "'");
            continue;
        }
        if (!used_ips.emplace(m.network, ip->value()).second) {
            c.error("duplicate-ip", m.node, m.ip + " is assigned twice in network '" + m.network + "'");
        }
    }

    for (const auto& h : def.hosts) {
        if (!attached_nodes.count(h.name)) c.error("unattached-node", h.name, "host is not mapped to any network");
    }
    for (const auto& r : def.routers) {
        if (!attached_nodes.count(r.name)) c.error("unattached-node", r.name, "router is not mapped to any network");
    }
    for (const auto& n : def.networks) {
        if (!routed_networks.count(n.name)) {
            c.warning("unroutable-network", n.name, "network '" + n.name + "' has no router mapping");
        }
    }

    for (const auto& g : def.groups) {
        if (g.nodes.empty()) c.warning("empty-group", g.name, "group '" + g.name + "' has no nodes");
        for (const auto& n : g.nodes) {
            if (!def.has_node(n)) {
                c.error("unknown-node", n, "group '" + g.name + "' references undefined node '" + n + "'");
            }
        }
    }
    return report;
}

ValidationReport validate_training(const TrainingDefinition& def) {
    ValidationReport report;
    Collector c(report);

    std::set<int> orders;
    for (const auto& p : def.phases) {
        auto node = "phase " + std::to_string(p.order);
        if (p.order < 0) c.error("phase-order", node, "phase order must be nonnegative");
        if (!orders.insert(p.order).second) c.error("duplicate-order", node, "phase order is used twice");
        if (p.estimated_duration < 0) c.error("estimated-duration", node, "estimated_duration must be nonnegative");

        const auto* t = p.training();
        if (!t) continue;
        if (t->max_score <= 0) c.error("max-score", node, "max_score must be positive");
        if (t->flag.empty()) c.error("empty-flag", node, "flag must be non-empty");
        if (t->incorrect_flag_limit < 1) {
            c.error("incorrect-flag-limit", node, "incorrect_flag_limit must be at least 1");
        }
        std::set<int> hint_orders;
        for (const auto& h : t->hints) {
            if (h.hint_penalty < 0) {
                c.error("hint-penalty", node, "hint " + std::to_string(h.order) + " has a negative penalty");
            }
            if (h.order < 0 || !hint_orders.insert(h.order).second) {
                c.error("duplicate-hint-order", node, "hint order " + std::to_string(h.order) + " is invalid or repeated");
            }
        }
        if (t->total_penalty() > t->max_score) {
            c.error("penalties-exceed-max", node,
                    "sum of hint penalties " + std::to_string(t->total_penalty()) + " exceeds max_score " +
                        std::to_string(t->max_score));
        }
    }

    // Linear structure: [I...] [Q] P1..PN [Q], info phases allowed anywhere.
    auto sorted = def.phases_in_order();
    int first_training = -1;
    int last_training = -1;
    for (int i = 0; i < static_cast<int>(sorted.size()); ++i) {
        if (sorted[i]->kind() == PhaseKind::Training) {
            if (first_training < 0) first_training = i;
            last_training = i;
        }
    }
    if (first_training < 0) {
        c.error("no-training-phase", "", "at least one TRAINING phase is required");
        return report;
    }
    int before = 0;
    int after = 0;
    for (int i = 0; i < static_cast<int>(sorted.size()); ++i) {
        if (sorted[i]->kind() != PhaseKind::Questionnaire) continue;
        auto node = "phase " + std::to_string(sorted[i]->order);
        if (i < first_training) {
            if (++before > 1) c.error("questionnaire-placement", node, "more than one questionnaire before training");
        } else if (i > last_training) {
            if (++after > 1) c.error("questionnaire-placement", node, "more than one questionnaire after training");
        } else {
            c.error("questionnaire-placement", node, "questionnaire between training phases");
        }
    }
    return report;
}

}  // namespace rangekit::definition
