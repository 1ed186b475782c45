#pragma once

#include <cstdint>
#include <mutex>
#include <random>
#include <string>
#include <vector>

namespace rangekit::orchestrator {

/// Produces access tokens shaped `<word>-<4 digits>`, e.g. "falcon-0427".
class TokenGenerator {
public:
    explicit TokenGenerator(std::uint64_t seed, std::vector<std::string> words = default_words());

    std::string next();

    static std::vector<std::string> default_words();
    /// True when `token` has the `[a-z]+-[0-9]{4}` shape.
    static bool well_formed(const std::string& token);

private:
    std::mutex mutex_;
    std::mt19937_64 rng_;
    std::vector<std::string> words_;
};

}  // namespace rangekit::orchestrator
