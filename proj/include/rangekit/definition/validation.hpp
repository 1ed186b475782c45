#pragma once

#include <string>
#include <vector>

#include "rangekit/definition/flavor.hpp"
#include "rangekit/definition/topology.hpp"
#include "rangekit/definition/training.hpp"

namespace rangekit::definition {

enum class Severity { Error, Warning };

struct Finding {
    Severity severity = Severity::Error;
    std::string code;
    std::string node;
    std::string message;

    friend bool operator==(const Finding&, const Finding&) = default;
};

struct ValidationReport {
    std::vector<Finding> findings;

    std::size_t error_count() const;
    std::size_t warning_count() const;
    bool deployable() const { return error_count() == 0; }
    bool has(std::string_view code) const;
    bool has(std::string_view code, std::string_view node) const;

    /// One JSON object per finding: {"severity","code","node","message"}.
    std::string to_json_lines() const;

    friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

// Finding codes emitted by validate_topology:
//   duplicate-name, invalid-identifier, invalid-cidr, prefix-length, network-overlap,
//   unknown-node, unknown-network, invalid-ip, ip-outside-network, ip-reserved,
//   duplicate-ip, duplicate-mapping, unattached-node, unknown-flavor, empty-base-box
//   (errors); unroutable-network, empty-group (warnings).
ValidationReport validate_topology(const TopologyDefinition& def,
                                   const FlavorRegistry& flavors = FlavorRegistry::defaults());

// Codes from validate_training: duplicate-order, no-training-phase,
// questionnaire-placement, max-score, penalties-exceed-max, incorrect-flag-limit,
// hint-penalty, duplicate-hint-order, empty-flag.
ValidationReport validate_training(const TrainingDefinition& def);

}  // namespace rangekit::definition
