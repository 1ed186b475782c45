#pragma once

#include <string>
#include <vector>

namespace rangekit::definition {

/// A parsed document plus non-fatal diagnostics (unknown keys and similar).
template <typename T>
struct Parsed {
    T value;
    std::vector<std::string> warnings;
};

}  // namespace rangekit::definition
