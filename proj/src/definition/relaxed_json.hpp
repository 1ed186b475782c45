#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rangekit::definition::detail {

/// Strict JSON rewritten from the relaxed dialect, with a map from every
/// output byte back to its source offset for error reporting.
struct RelaxedJson {
    std::string text;
    std::vector<std::size_t> origin;

    /// 1-based line and column in the original document for an output offset.
    std::pair<std::size_t, std::size_t> source_position(std::string_view source,
                                                        std::size_t output_offset) const;
};

RelaxedJson relax_json(std::string_view source);

}  // namespace rangekit::definition::detail
