#include "rangekit/definition/flavor.hpp"

namespace rangekit::definition {

FlavorRegistry FlavorRegistry::defaults() {
    FlavorRegistry registry;
    registry.add("tiny1x2", {1, 2});
    return registry;
}

void FlavorRegistry::add(std::string name, FlavorResources resources) {
    entries_.insert_or_assign(std::move(name), resources);
}

std::optional<FlavorResources> FlavorRegistry::find(std::string_view name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

}  // namespace rangekit::definition
