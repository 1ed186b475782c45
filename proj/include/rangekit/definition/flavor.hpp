#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace rangekit::definition {

struct FlavorResources {
    int vcpus = 0;
    int memory_gb = 0;

    friend bool operator==(const FlavorResources&, const FlavorResources&) = default;
};

/// Maps opaque flavor labels to resource sizes.
class FlavorRegistry {
public:
    /// Contains tiny1x2 -> 1 vCPU, 2 GB.
    static FlavorRegistry defaults();

    void add(std::string name, FlavorResources resources);
    std::optional<FlavorResources> find(std::string_view name) const;
    const std::map<std::string, FlavorResources, std::less<>>& entries() const { return entries_; }

private:
    std::map<std::string, FlavorResources, std::less<>> entries_;
};

}  // namespace rangekit::definition
